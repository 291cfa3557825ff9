#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace smnarx;

TEST(Benchmark, TransitionMatrixAndNoise)
{
    const TrueSystem sys = benchmark_system();
    EXPECT_EQ(sys.A(0, 0), 0.98);
    EXPECT_EQ(sys.A(0, 1), 0.02);
    EXPECT_EQ(sys.A(0, 2), 0.0);
    EXPECT_DOUBLE_EQ(sys.noise_std * sys.noise_std, 0.01);
    EXPECT_EQ(sys.basis.size(), 165);
    for (Index s = 0; s < 3; ++s)
        EXPECT_EQ(support_of(sys.theta.row(s).transpose()).size(), 4u);
}

TEST(Benchmark, ModeOneTerms)
{
    const TrueSystem sys = benchmark_system();
    std::vector<std::pair<std::string, double>> got;
    for (Index i : support_of(sys.theta.row(0).transpose()))
        got.emplace_back(sys.basis.term_name(i), sys.theta(0, i));
    const std::vector<std::pair<std::string, double>> want{
        {"y(k-1)", 0.5}, {"u(k-2)", 0.8}, {"y(k-2)^2", -0.3}, {"u(k-1)^2", 1.0}};
    EXPECT_EQ(got, want);
}

TEST(Simulate, ZeroFixedPoint)
{
    TrueSystem sys = benchmark_system();
    sys.noise_std = 0.0;
    sys.A = MatrixXd::Identity(3, 3);
    sys.Pi = VectorXd::Unit(3, 0);
    sys.input_law = InputLaw{{0.0}, {0.0}};
    const TrajectoryDataset d = simulate(sys, 500, 1);
    EXPECT_EQ(d.segments[0].y.cwiseAbs().maxCoeff(), 0.0);
    for (int z : d.segments[0].modes)
        EXPECT_EQ(z, 0);
}

TEST(Simulate, SameSeedSameData)
{
    const TrajectoryDataset a = simulate(benchmark_system(), 2000, 42);
    const TrajectoryDataset b = simulate(benchmark_system(), 2000, 42);
    EXPECT_EQ(dataset_to_csv(a), dataset_to_csv(b));
    const TrajectoryDataset c = simulate(benchmark_system(), 2000, 43);
    EXPECT_NE(dataset_to_csv(a), dataset_to_csv(c));
}

TEST(Simulate, NoiselessRecursionIsExact)
{
    TrueSystem sys = benchmark_system();
    sys.noise_std = 0.0;
    const TrajectoryDataset d = simulate(sys, 300, 5);
    const auto& seg = d.segments[0];
    const BasisConfig& cfg = sys.basis.config();
    // rebuild the padded record and replay the recursion with the recorded modes
    const Index lag = cfg.max_lag();
    VectorXd y = VectorXd::Zero(300 + lag);
    MatrixXd u = MatrixXd::Zero(300 + lag, 1);
    u.bottomRows(300) = seg.u;
    for (Index k = 0; k < 300; ++k) {
        const Index t = k + lag;
        const double mean =
            sys.basis.evaluate(lagged_vector(cfg, y, u, t)).dot(sys.theta.row(seg.modes[static_cast<std::size_t>(k)]));
        y(t) = mean;
        EXPECT_EQ(seg.y(k), mean);
    }
}

TEST(Simulate, TransitionFrequenciesMatchA)
{
    // the mode chain uses its own stream, so zero dynamics give the benchmark's
    // mode sequence without any risk of divergence
    TrueSystem quiet = benchmark_system();
    quiet.theta.setZero();
    const TrajectoryDataset d = simulate(quiet, 100000, 8);
    const auto& z = d.segments[0].modes;
    MatrixXd counts = MatrixXd::Zero(3, 3);
    VectorXd occ = VectorXd::Zero(3);
    for (std::size_t k = 0; k < z.size(); ++k) {
        occ(z[k]) += 1;
        if (k > 0)
            counts(z[k - 1], z[k]) += 1;
    }
    const TrueSystem sys = benchmark_system();
    for (Index i = 0; i < 3; ++i) {
        const VectorXd freq = counts.row(i).transpose() / counts.row(i).sum();
        for (Index j = 0; j < 3; ++j)
            EXPECT_NEAR(freq(j), sys.A(i, j), 0.01);
    }
    // cyclic doubly stochastic A: uniform stationary law
    for (Index s = 0; s < 3; ++s)
        EXPECT_NEAR(occ(s) / 100000.0, 1.0 / 3.0, 0.05);
}

TEST(Simulate, SwitchCountConsistentWithTransitionMatrix)
{
    // every row leaves with probability 0.02, so switches ~ Binomial(N-1, 0.02):
    // mean about 240 for N = 12000, sd about 15.3
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const Index n = count_switches(oracle::stable_simulation(benchmark_system(), 12000, seed));
        EXPECT_GT(n, 240 - 5 * 16);
        EXPECT_LT(n, 240 + 5 * 16);
    }
}

TEST(Simulate, ModeSequenceDoesNotDependOnDynamics)
{
    TrueSystem quiet = benchmark_system();
    quiet.theta.setZero();
    const TrajectoryDataset a = simulate(quiet, 3000, 1);
    const TrajectoryDataset b = simulate(benchmark_system(), 3000, 1);
    EXPECT_EQ(a.segments[0].modes, b.segments[0].modes);
    EXPECT_EQ(a.segments[0].u, b.segments[0].u);
}

TEST(Simulate, BenchmarkCanDivergeOnLongRecords)
{
    // 0.2 y^3 in mode 2 and -0.3 y^2 in mode 1 make large excursions self-reinforcing
    int diverged = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        try {
            simulate(benchmark_system(), 12000, seed);
        } catch (const SimulationDiverged&) {
            ++diverged;
        }
    }
    EXPECT_GT(diverged, 0);
    EXPECT_LT(diverged, 20);
}

TEST(Simulate, DivergenceIsReported)
{
    TrueSystem sys = benchmark_system();
    sys.theta.setZero();
    sys.theta(0, 0) = 1.0;
    sys.theta(0, 1) = 2.0; // y(k-1) gain 2
    sys.A = MatrixXd::Identity(3, 3);
    sys.Pi = VectorXd::Unit(3, 0);
    EXPECT_THROW(simulate(sys, 1000, 1), SimulationDiverged);
}

TEST(Simulate, TooFewSamples)
{
    EXPECT_THROW(simulate(benchmark_system(), 3, 1), ConfigError);
    EXPECT_THROW(simulate(benchmark_system(), 4, 1), ConfigError);
    EXPECT_NO_THROW(simulate(benchmark_system(), 5, 1));
}

TEST(Simulate, InvalidSystemRejected)
{
    TrueSystem sys = benchmark_system();
    sys.A(0, 0) = 0.5;
    EXPECT_THROW(simulate(sys, 100, 1), ConfigError);
}

TEST(Split, BenchmarkLayout)
{
    const TrajectoryDataset raw = simulate(benchmark_system(), 12000, 2);
    const TrajectoryDataset d = split_dataset(raw, 10000, 1000, 1000, 200);
    EXPECT_EQ(d.subset(Split::train).segments.size(), 50u);
    ASSERT_EQ(d.subset(Split::validation).segments.size(), 1u);
    ASSERT_EQ(d.subset(Split::test).segments.size(), 1u);
    EXPECT_EQ(d.subset(Split::validation).segments[0].start, 10001);
    EXPECT_EQ(d.subset(Split::test).segments[0].start, 11001);
    EXPECT_EQ(d.total_samples(), 12000);
    EXPECT_EQ(d.segments[3].y(7), raw.segments[0].y(607));
}

TEST(Split, EdgeCases)
{
    const TrajectoryDataset raw = simulate(benchmark_system(), 1000, 2);
    EXPECT_EQ(split_dataset(raw, 800, 100, 100, 800).subset(Split::train).segments.size(), 1u);
    EXPECT_THROW(split_dataset(raw, 800, 100, 100, 0), ConfigError);
    EXPECT_THROW(split_dataset(raw, 900, 100, 100, 200), ConfigError);
    const TrajectoryDataset tail = split_dataset(raw, 450, 0, 0, 200);
    ASSERT_EQ(tail.segments.size(), 3u);
    EXPECT_FALSE(tail.segments[1].short_batch);
    EXPECT_TRUE(tail.segments[2].short_batch);
    EXPECT_EQ(tail.segments[2].size(), 50);
}
