#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace smnarx;

namespace {

struct Problem {
    MatrixXd X;
    VectorXd y, w;
};

Problem random_problem(std::mt19937_64& rng, Index N, Index n)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Problem p;
    p.X.resize(N, n);
    for (Index i = 0; i < p.X.size(); ++i)
        p.X.data()[i] = g(rng);
    VectorXd truth = VectorXd::Zero(n);
    for (Index i = 0; i < n; i += 3)
        truth(i) = g(rng);
    p.y = p.X * truth;
    for (Index i = 0; i < N; ++i)
        p.y(i) += 0.3 * g(rng);
    p.w.resize(N);
    for (Index i = 0; i < N; ++i)
        p.w(i) = u(rng);
    return p;
}

SolverSettings tight()
{
    SolverSettings s;
    s.coord_tol = 1e-13;
    s.max_sweeps = 100000;
    return s;
}

} // namespace

TEST(Lasso, ExactFitWithoutPenalty)
{
    const MatrixXd X = (MatrixXd(2, 1) << 1.0, 2.0).finished();
    const VectorXd y = (VectorXd(2) << 2.0, 4.0).finished();
    const VectorXd w = VectorXd::Ones(2);
    const LassoResult r = solve_weighted_lasso({X, y, w, 0.0}, tight());
    EXPECT_NEAR(r.theta(0), 2.0, 1e-14);
    EXPECT_TRUE(r.converged);
}

TEST(Lasso, FullShrinkage)
{
    std::mt19937_64 rng(1);
    const Problem p = random_problem(rng, 40, 6);
    const VectorXd c = p.X.transpose() * p.w.cwiseProduct(p.y);
    const double lambda = 2.0 * c.cwiseAbs().maxCoeff() * 1.0001;
    const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, lambda});
    EXPECT_EQ(r.theta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, MatchesProximalGradient)
{
    std::mt19937_64 rng(2);
    const Problem p = random_problem(rng, 50, 8);
    const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, 0.1}, tight());
    const VectorXd ref = oracle::proximal_gradient(p.X, p.y, p.w, 0.1);
    EXPECT_LT((r.theta - ref).cwiseAbs().maxCoeff(), 1e-6);
    const WeightedRegressionProblem prob{p.X, p.y, p.w, 0.1};
    EXPECT_NEAR(weighted_lasso_objective(prob, r.theta), weighted_lasso_objective(prob, ref), 1e-10);
}

TEST(Lasso, NormalEquationsAtZeroPenalty)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const Problem p = random_problem(rng, 120, 15);
        const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, 0.0}, tight());
        EXPECT_LT((r.theta - oracle::normal_equations(p.X, p.y, p.w)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Lasso, SubgradientConditions)
{
    std::mt19937_64 rng(4);
    for (double lambda : {0.5, 5.0, 40.0}) {
        const Problem p = random_problem(rng, 80, 20);
        const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, lambda}, tight());
        const WeightedGram g = weighted_gram(p.X, p.y, p.w);
        for (Index i = 0; i < 20; ++i) {
            const double z = g.G(i, i);
            const double rho = g.c(i) - g.G.row(i).dot(r.theta) + z * r.theta(i);
            if (r.theta(i) == 0.0)
                EXPECT_LE(std::abs(rho), lambda / 2 + 1e-6);
            else
                EXPECT_LE(std::abs(rho - z * r.theta(i) - std::copysign(lambda / 2, r.theta(i))), 1e-6);
        }
    }
}

TEST(Lasso, ObjectiveNeverIncreases)
{
    std::mt19937_64 rng(5);
    const Problem p = random_problem(rng, 60, 12);
    SolverSettings s;
    s.record_objective = true;
    s.warm_start = VectorXd::Constant(12, 0.7);
    const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, 2.0}, s);
    const double start = weighted_lasso_objective({p.X, p.y, p.w, 2.0}, *s.warm_start);
    ASSERT_FALSE(r.objective_trace.empty());
    EXPECT_LE(r.objective_trace.front(), start + 1e-9);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-9 * std::abs(r.objective_trace[i - 1]));
}

TEST(Lasso, ActiveSetHoldsOtherCoordinatesAtZero)
{
    std::mt19937_64 rng(6);
    const Problem p = random_problem(rng, 70, 10);
    const std::vector<Index> active{1, 4, 7};
    const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, 0.0, active}, tight());
    MatrixXd sub(70, 3);
    for (int j = 0; j < 3; ++j)
        sub.col(j) = p.X.col(active[static_cast<std::size_t>(j)]);
    const VectorXd ref = oracle::normal_equations(sub, p.y, p.w);
    for (Index i = 0; i < 10; ++i) {
        const auto it = std::find(active.begin(), active.end(), i);
        if (it == active.end())
            EXPECT_EQ(r.theta(i), 0.0);
        else
            EXPECT_NEAR(r.theta(i), ref(it - active.begin()), 1e-9);
    }
    // the Gram-form path with the same restriction agrees
    const LassoResult g = solve_lasso_gram(weighted_gram(p.X, p.y, p.w), 0.0, active, tight());
    EXPECT_LT((g.theta - r.theta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Lasso, ZeroWeightColumnIsDegenerate)
{
    std::mt19937_64 rng(7);
    Problem p = random_problem(rng, 30, 4);
    p.X.col(2).setZero();
    const LassoResult r = solve_weighted_lasso({p.X, p.y, p.w, 0.1});
    EXPECT_EQ(r.theta(2), 0.0);
    EXPECT_EQ(r.degenerate, std::vector<Index>{2});
}

TEST(Lasso, RejectsBadInput)
{
    const MatrixXd X = MatrixXd::Ones(3, 2);
    const VectorXd y = VectorXd::Ones(3);
    EXPECT_THROW(solve_weighted_lasso({X, y, VectorXd::Zero(3), 0.1}), ConfigError);
    EXPECT_THROW(solve_weighted_lasso({X, y, VectorXd::Ones(3), -1.0}), ConfigError);
    EXPECT_THROW(solve_weighted_lasso({X, y, VectorXd::Ones(2), 0.1}), DimensionError);
    EXPECT_THROW(solve_weighted_lasso({X, y, (VectorXd(3) << 1, -1, 1).finished(), 0.1}), ConfigError);
}

TEST(HardThreshold, Examples)
{
    const VectorXd x = (VectorXd(5) << 0.04, 0.06, 0.05, -0.05, -0.049).finished();
    const VectorXd t = hard_threshold(x, 0.05);
    EXPECT_EQ(t(0), 0.0);
    EXPECT_EQ(t(1), 0.06);
    EXPECT_EQ(t(2), 0.05);
    EXPECT_EQ(t(3), -0.05);
    EXPECT_EQ(t(4), 0.0);
    EXPECT_EQ(hard_threshold(x, 0.0), x);
    EXPECT_THROW(hard_threshold(x, -1.0), ConfigError);
}

TEST(HardThreshold, Idempotent)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.1);
    VectorXd x(200);
    for (Index i = 0; i < x.size(); ++i)
        x(i) = g(rng);
    const VectorXd once = hard_threshold(x, 0.07);
    EXPECT_EQ(hard_threshold(once, 0.07), once);
}

TEST(Support, Examples)
{
    EXPECT_TRUE(support_of(VectorXd::Zero(5)).empty());
    EXPECT_EQ(support_of(VectorXd::Ones(4)), (std::vector<Index>{0, 1, 2, 3}));
    EXPECT_EQ(support_of((VectorXd(4) << 0, -2, 0, 1e-300).finished()), (std::vector<Index>{1, 3}));
}
