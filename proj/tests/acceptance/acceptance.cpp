// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Tolerances are fixed below.

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace smnarx;

namespace {

// benchmark study
constexpr int kStudyRuns = 20;
constexpr double kMedianFsTrain = 0.98;
constexpr double kMedianFsTest = 0.94;
constexpr double kMedianFA = 0.98;
constexpr double kMedianFTheta = 0.97;
constexpr double kExactSupportRate = 0.80;
constexpr double kCoefficientTol = 0.01;
constexpr double kSigma2 = 0.010;
constexpr double kSigma2Tol = 0.002;

// lambda table
constexpr double kRmseHigh = 0.5013, kRmseHighTol = 0.08;
constexpr double kRmseLow = 0.1691, kRmseLowTol = 0.015;

// oracles
constexpr int kInferenceCases = 100;
constexpr double kInferenceTol = 1e-10;
constexpr int kSolverCases = 50;
constexpr double kSolverTol = 1e-6;
constexpr double kNormalEqTol = 1e-8;

// EM behaviour
constexpr int kMonotoneStarts = 20;
constexpr double kGemSlack = 1e-8;
constexpr double kPosteriorTol = 1e-9;

constexpr int kThresholdGrid = 1000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

TrajectoryDataset benchmark_data(std::uint64_t seed)
{
    return split_dataset(oracle::stable_simulation(benchmark_system(), 12000, seed), 10000, 1000, 1000, 200);
}

StudyResult benchmark_study()
{
    FitConfig cfg;
    cfg.basis = benchmark_system().basis.config();
    cfg.threads = 1;
    StudyOptions opts;
    opts.runs = kStudyRuns;
    opts.seed = 2024;
    opts.threads = threads();
    return run_study(benchmark_system(), cfg, opts);
}

Outcome study_indexes(const StudyResult& st)
{
    int exact = 0;
    for (const auto& r : st.runs)
        exact += r.ok && r.exact_support;
    const double rate = static_cast<double>(exact) / static_cast<double>(st.runs.size());
    Outcome o;
    o.pass = st.f_s_train.median >= kMedianFsTrain && st.f_s_test.median >= kMedianFsTest &&
             st.f_a.median >= kMedianFA && st.f_theta.median >= kMedianFTheta && rate >= kExactSupportRate;
    o.detail = fmt("median F_s train %.4f test %.4f, F_A %.4f, F_theta %.4f", st.f_s_train.median,
                   st.f_s_test.median, st.f_a.median, st.f_theta.median) +
               fmt(", exact support %.2f, failed runs %.0f", rate, st.failures);
    return o;
}

Outcome study_coefficients(const StudyResult& st)
{
    Outcome o;
    double worst = 0.0;
    for (std::size_t s = 0; s < st.true_values.size(); ++s)
        for (std::size_t i = 0; i < st.true_values[s].size(); ++i)
            worst = std::max(worst, std::abs(st.coefficient_stats[s][i].mean - st.true_values[s][i]));
    const double ds2 = std::abs(st.sigma2.mean - kSigma2);
    o.pass = worst <= kCoefficientTol && ds2 <= kSigma2Tol && st.failures < static_cast<int>(st.runs.size());
    o.detail = fmt("max |mean coef - truth| %.4g, mean sigma2 %.5f", worst, st.sigma2.mean);
    return o;
}

Outcome lambda_table()
{
    const TrajectoryDataset data = benchmark_data(1);
    FitConfig cfg;
    cfg.basis = benchmark_system().basis.config();
    cfg.threads = threads();
    const PolynomialBasis basis(cfg.basis);
    const DesignMatrix train = build_design_matrix(basis, data.subset(Split::train));
    const DesignMatrix val = build_design_matrix(basis, data.subset(Split::validation));
    const std::vector<double> lambdas{1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4};
    GridOptions go;
    go.patience = static_cast<int>(lambdas.size());
    go.restarts = cfg.restarts;
    const GridResult g = grid_search_lambda(train, val, basis, cfg, lambdas, go);

    Outcome o;
    auto rmse_at = [&](double lam) {
        for (const auto& r : g.rows)
            if (r.lambda == lam && r.ok)
                return r.rmse;
        return std::numeric_limits<double>::quiet_NaN();
    };
    bool monotone = true;
    for (std::size_t i = 1; i < 5; ++i)
        monotone = monotone && g.rows[i].ok && g.rows[i - 1].ok && g.rows[i].rmse <= g.rows[i - 1].rmse;
    const double hi = rmse_at(1e-1), lo = rmse_at(5e-4);
    o.pass = std::abs(hi - kRmseHigh) <= kRmseHighTol && std::abs(lo - kRmseLow) <= kRmseLowTol && monotone;
    o.detail = "rmse";
    for (const auto& r : g.rows)
        o.detail += fmt(" %.0e:%.4f", r.lambda, r.rmse);
    o.detail += monotone ? ", non-increasing to 1e-3" : ", NOT non-increasing to 1e-3";
    return o;
}

Outcome inference_oracle()
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    double worst = 0.0;
    for (int c = 0; c < kInferenceCases; ++c) {
        const Index S = 2 + c % 2;
        const Index N = 2 + (c / 2) % 5;
        const MatrixXd A = oracle::random_stochastic(rng, S, S);
        const VectorXd Pi = oracle::random_stochastic(rng, 1, S).row(0).transpose();
        MatrixXd b(N, S);
        for (Index k = 0; k < N; ++k)
            for (Index s = 0; s < S; ++s)
                b(k, s) = u(rng);
        const SegmentPosterior p = forward_backward(b, A, Pi);
        const auto ref = oracle::enumerate_paths(b, A, Pi);
        worst = std::max(worst, std::abs(p.loglik - std::log(ref.likelihood)));
    }
    return {worst <= kInferenceTol, fmt("max |loglik - log sum over paths| %.3g", worst)};
}

Outcome solver_oracle()
{
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> w01(0.05, 1.0);
    std::uniform_int_distribution<int> ncols(2, 40);
    SolverSettings tight;
    tight.coord_tol = 1e-13;
    tight.max_sweeps = 200000;
    double worst = 0.0, worst_ols = 0.0;
    for (int c = 0; c < kSolverCases; ++c) {
        const Index n = ncols(rng);
        const Index N = std::uniform_int_distribution<Index>(n + 5, 200)(rng);
        MatrixXd X(N, n);
        VectorXd y(N), w(N), truth = VectorXd::Zero(n);
        for (Index i = 0; i < n; i += 3)
            truth(i) = g(rng);
        for (Index r = 0; r < N; ++r) {
            for (Index j = 0; j < n; ++j)
                X(r, j) = g(rng);
            w(r) = w01(rng);
        }
        y = X * truth;
        for (Index r = 0; r < N; ++r)
            y(r) += 0.1 * g(rng);
        const double lambda = std::pow(10.0, std::uniform_real_distribution<double>(-2.0, 1.5)(rng));
        const LassoResult cd = solve_weighted_lasso({X, y, w, lambda}, tight);
        worst = std::max(worst, (cd.theta - oracle::proximal_gradient(X, y, w, lambda)).lpNorm<Eigen::Infinity>());
        const LassoResult ols = solve_weighted_lasso({X, y, w, 0.0}, tight);
        worst_ols = std::max(worst_ols, (ols.theta - oracle::normal_equations(X, y, w)).lpNorm<Eigen::Infinity>());
    }
    return {worst <= kSolverTol && worst_ols <= kNormalEqTol,
            fmt("max coef gap: proximal gradient %.3g, normal equations %.3g", worst, worst_ols)};
}

struct EmChecks {
    Outcome monotone, posterior;
};

EmChecks em_checks()
{
    const TrajectoryDataset data = benchmark_data(3);
    FitConfig cfg;
    cfg.basis = benchmark_system().basis.config();
    const PolynomialBasis basis(cfg.basis);
    const DesignMatrix dm = build_design_matrix(basis, data.subset(Split::train));

    double worst_row = 0.0, worst_xi = 0.0;
    long e_steps = 0;
    FitHooks hooks;
    hooks.on_e_step = [&](int, int, const PosteriorSet& post) {
        ++e_steps;
        for (const auto& seg : post.segments) {
            const Index N = seg.length();
            worst_row = std::max(worst_row, (seg.gamma.rowwise().sum().array() - 1.0).abs().maxCoeff());
            for (Index k = 0; k + 1 < N; ++k) {
                const MatrixXd x = seg.xi_matrix(k);
                worst_xi = std::max(worst_xi, (x.rowwise().sum() - seg.gamma.row(k).transpose())
                                                  .lpNorm<Eigen::Infinity>());
                worst_xi = std::max(worst_xi, (x.colwise().sum().transpose() - seg.gamma.row(k + 1).transpose())
                                                  .lpNorm<Eigen::Infinity>());
            }
        }
    };

    double worst_drop = 0.0;
    int grown = 0, collapsed = 0;
    for (int r = 0; r < kMonotoneStarts; ++r) {
        const FitReport rep = fit_single(dm, basis, cfg, r, hooks);
        if (rep.restarts.empty() || rep.restarts.front().collapsed) {
            ++collapsed;
            continue;
        }
        for (const auto& g : rep.gem_checks)
            worst_drop = std::max(worst_drop, g.before - g.after);
        for (std::size_t t = 1; t < rep.support_history.size(); ++t)
            for (std::size_t s = 0; s < rep.support_history[t].size(); ++s) {
                const auto& prev = rep.support_history[t - 1][s];
                for (Index i : rep.support_history[t][s])
                    grown += std::find(prev.begin(), prev.end(), i) == prev.end();
            }
    }
    EmChecks out;
    out.monotone = {worst_drop <= kGemSlack && grown == 0 && collapsed < kMonotoneStarts,
                    fmt("largest penalized-loglik drop %.3g, support entries gained %.0f, collapsed starts %.0f",
                        worst_drop, grown, collapsed)};
    out.posterior = {e_steps > 0 && worst_row <= kPosteriorTol && worst_xi <= kPosteriorTol,
                     fmt("%.0f E-steps, max |sum gamma - 1| %.3g, max xi marginal gap %.3g",
                         static_cast<double>(e_steps), worst_row, worst_xi)};
    return out;
}

Outcome threshold_semantics()
{
    const double ups = 5e-2;
    VectorXd x(kThresholdGrid);
    for (Index i = 0; i < kThresholdGrid; ++i)
        x(i) = -2.0 * ups + 4.0 * ups * static_cast<double>(i) / (kThresholdGrid - 1);
    // include the boundary and its neighbours exactly
    x(0) = ups;
    x(1) = -ups;
    x(2) = std::nextafter(ups, 0.0);
    x(3) = std::nextafter(-ups, 0.0);
    x(4) = std::nextafter(ups, 1.0);
    const VectorXd y = hard_threshold(x, ups);
    int wrong = 0;
    for (Index i = 0; i < kThresholdGrid; ++i) {
        const bool keep = std::abs(x(i)) >= ups;
        wrong += keep ? y(i) != x(i) : y(i) != 0.0;
    }
    return {wrong == 0, fmt("%.0f of %.0f entries misclassified", wrong, kThresholdGrid)};
}

} // namespace

int main()
{
    struct Row {
        int id;
        const char* name;
        Outcome o;
        double seconds;
    };
    std::vector<Row> rows;
    auto timed = [](const std::function<void()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("error: ") + e.what()};
        }
    };

    Outcome o4, o5, o8;
    double t4 = timed([&] { o4 = guarded(inference_oracle); });
    double t5 = timed([&] { o5 = guarded(solver_oracle); });
    double t8 = timed([&] { o8 = guarded(threshold_semantics); });
    EmChecks em;
    double t67 = timed([&] {
        try {
            em = em_checks();
        } catch (const std::exception& e) {
            em.monotone = em.posterior = {false, std::string("error: ") + e.what()};
        }
    });
    Outcome o2;
    double t2 = timed([&] { o2 = guarded(lambda_table); });
    Outcome o1, o3;
    double t13 = timed([&] {
        try {
            const StudyResult st = benchmark_study();
            o1 = study_indexes(st);
            o3 = study_coefficients(st);
        } catch (const std::exception& e) {
            o1 = o3 = {false, std::string("error: ") + e.what()};
        }
    });

    rows.push_back({1, "benchmark study indexes", o1, t13});
    rows.push_back({2, "lambda validation table", o2, t2});
    rows.push_back({3, "benchmark study coefficients", o3, t13});
    rows.push_back({4, "forward-backward vs path enumeration", o4, t4});
    rows.push_back({5, "lasso vs proximal gradient and normal equations", o5, t5});
    rows.push_back({6, "EM monotonicity and shrinking supports", em.monotone, t67});
    rows.push_back({7, "posterior algebra", em.posterior, t67});
    rows.push_back({8, "hard threshold semantics", o8, t8});

    int failed = 0;
    for (const auto& r : rows) {
        failed += !r.o.pass;
        std::printf("%s  [%d] %s: %s (%.1fs)\n", r.o.pass ? "PASS" : "FAIL", r.id, r.name, r.o.detail.c_str(),
                    r.seconds);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failed, rows.size());
    return failed == 0 ? 0 : 1;
}
