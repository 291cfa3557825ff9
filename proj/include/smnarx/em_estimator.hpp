#pragma once

#include "smnarx/design.hpp"
#include "smnarx/fb_inference.hpp"
#include "smnarx/model.hpp"
#include "smnarx/parallel.hpp"
#include "smnarx/rng.hpp"
#include "smnarx/sparse_solver.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace smnarx {

/// Estimator flavours: plain EM, EM with l1 penalty, EM with l1 + hard threshold.
enum class Variant { em, em_l1, em_l1_2s };

inline std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::em: return "em";
    case Variant::em_l1: return "em-l1";
    case Variant::em_l1_2s: break;
    }
    return "em-l1-2s";
}

inline Variant variant_from_string(std::string_view s)
{
    if (s == "em")
        return Variant::em;
    if (s == "em-l1")
        return Variant::em_l1;
    if (s == "em-l1-2s")
        return Variant::em_l1_2s;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected em, em-l1 or em-l1-2s)");
}

enum class Phase { burn_in, threshold };

/**
 * Estimator settings. Defaults reproduce the benchmark configuration.
 *
 * `lambda` is measured per unit of posterior mass: mode s minimizes
 *   (1 / (2 W_s)) sum_k gamma_k^s r_k^2 + lambda ||theta_s||_1,   W_s = sum_k gamma_k^s,
 * which the raw-loss solver receives as the penalty 2 lambda W_s.
 */
struct FitConfig {
    BasisConfig basis{4, 4, 1, 3};
    int modes = 3;
    Variant variant = Variant::em_l1_2s;
    double lambda = 5e-4;
    double upsilon = 5e-2;
    double burn_in_tol = 1e-2;   ///< |change| of total training loglik that ends burn-in
    double converge_tol = 1e-6;  ///< |change| of total training loglik that stops the run
    int max_iters = 100;
    int restarts = 10;
    double init_lo = 0.31;
    double init_hi = 0.35;
    double var_floor = 1e-12;
    double starvation_fraction = 1e-6; ///< restart collapses when some W_s < fraction * rows
    std::uint64_t seed = 0;
    int threads = 1;
    SolverSettings solver{};
    bool record_snapshots = false;
    /// Optional per-mode coordinate restriction applied from the first M-step on.
    std::optional<std::vector<std::vector<Index>>> active_sets = std::nullopt;

    double effective_lambda() const { return variant == Variant::em ? 0.0 : lambda; }
    bool thresholding() const { return variant == Variant::em_l1_2s; }

    void validate() const
    {
        basis.validate();
        if (modes < 1)
            throw ConfigError("mode count must be >= 1");
        if (!(lambda >= 0.0))
            throw ConfigError("lambda must be >= 0");
        if (!(upsilon >= 0.0))
            throw ConfigError("upsilon must be >= 0");
        if (!(converge_tol > 0.0) || !(converge_tol <= burn_in_tol))
            throw ConfigError("tolerances must satisfy 0 < converge_tol <= burn_in_tol");
        if (max_iters < 1)
            throw ConfigError("max_iters must be >= 1");
        if (restarts < 1)
            throw ConfigError("restarts must be >= 1");
        if (!(init_lo >= 0.0) || !(init_lo < init_hi))
            throw ConfigError("initial responsibility range must satisfy 0 <= lo < hi");
        if (!(var_floor > 0.0))
            throw ConfigError("variance floor must be > 0");
        if (threads < 1)
            throw ConfigError("threads must be >= 1");
        if (active_sets && static_cast<int>(active_sets->size()) != modes)
            throw ConfigError("active_sets needs one entry per mode");
        solver.validate();
    }
};

/// Mutable estimator state carried between EM iterations.
struct EmState {
    SmnarxModel model;
    std::vector<std::vector<Index>> active; ///< per-mode coordinates allowed nonzero
    Phase phase = Phase::burn_in;
};

struct CoefficientSnapshot {
    int iteration = 0;
    MatrixXd theta;
};

/// Penalized loglik before/after one burn-in iteration, both with that iteration's penalty weights.
struct GemCheck {
    int iteration = 0;
    double before = 0.0;
    double after = 0.0;
};

struct RestartSummary {
    int index = 0;
    double final_loglik = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    int phase_switch_iteration = -1;
    bool converged = false;
    bool collapsed = false;
    std::string message;
};

struct FitReport {
    SmnarxModel model;
    std::vector<double> loglik_trace;
    int phase_switch_iteration = -1;
    std::vector<CoefficientSnapshot> snapshots;
    std::vector<int> support_sizes; ///< numerically nonzero coefficients per mode
    std::vector<int> active_sizes;  ///< coordinates still available per mode
    std::vector<std::vector<std::vector<Index>>> support_history; ///< per threshold iteration, per mode
    std::vector<GemCheck> gem_checks;
    bool converged = false;
    int iterations = 0;
    double final_loglik = -std::numeric_limits<double>::infinity();
    int selected_restart = -1;
    std::vector<RestartSummary> restarts;
    FitConfig config;
};

/// Observers called during fitting (tests and diagnostics).
struct FitHooks {
    std::function<void(int restart, int iteration, const PosteriorSet&)> on_e_step;
};

class ModeStarvation : public EstimationFailure {
public:
    using EstimationFailure::EstimationFailure;
};

/// Rows x S matrix of state posteriors, segments stacked in design-matrix order.
inline MatrixXd stack_gamma(const PosteriorSet& post)
{
    Index rows = 0;
    for (const auto& s : post.segments)
        rows += s.length();
    const Index S = post.segments.empty() ? 0 : post.segments.front().modes();
    MatrixXd g(rows, S);
    Index r = 0;
    for (const auto& s : post.segments) {
        g.middleRows(r, s.length()) = s.gamma;
        r += s.length();
    }
    return g;
}

struct TransitionUpdate {
    MatrixXd A;
    VectorXd Pi;
    std::vector<int> starved_rows; ///< rows with zero expected outgoing mass, reset to uniform
};

/// A from expected transition counts over all segments, Pi from the mean first-step posterior.
inline TransitionUpdate m_step_transitions(const PosteriorSet& post, Index S)
{
    if (post.segments.empty())
        throw DataError("transition update needs at least one segment");
    MatrixXd counts = MatrixXd::Zero(S, S);
    VectorXd pi = VectorXd::Zero(S);
    for (const auto& seg : post.segments) {
        if (seg.modes() != S)
            throw DimensionError("posterior mode count mismatch");
        if (seg.xi.rows() > 0) {
            const VectorXd tot = seg.xi.colwise().sum().transpose();
            for (Index i = 0; i < S; ++i)
                for (Index j = 0; j < S; ++j)
                    counts(i, j) += tot(i * S + j);
        }
        pi += seg.gamma.row(0).transpose();
    }
    TransitionUpdate out;
    out.A.resize(S, S);
    for (Index i = 0; i < S; ++i) {
        const double row = counts.row(i).sum();
        if (row > 0.0) {
            out.A.row(i) = counts.row(i) / row;
            out.A.row(i) /= out.A.row(i).sum();
        } else {
            out.A.row(i).setConstant(1.0 / static_cast<double>(S));
            out.starved_rows.push_back(static_cast<int>(i));
        }
    }
    out.Pi = pi / static_cast<double>(post.segments.size());
    out.Pi /= out.Pi.sum();
    return out;
}

/// Shared noise variance from posterior-weighted residuals, floored.
inline double m_step_variance(const DesignMatrix& dm, const MatrixXd& gamma, const MatrixXd& theta, double var_floor)
{
    const MatrixXd resid = (dm.phi * theta.transpose()).colwise() - dm.y;
    const double num = gamma.cwiseProduct(resid.cwiseAbs2()).sum();
    const double den = gamma.sum();
    if (!(den > 0.0))
        throw ModeStarvation("variance update has zero posterior mass");
    return std::max(num / den, var_floor);
}

/// Per-mode solver penalty for the per-unit-mass lambda.
inline double raw_penalty(double lambda, double mass) { return 2.0 * lambda * mass; }

struct CoefficientUpdate {
    MatrixXd theta;
    std::vector<std::vector<Index>> active;
    std::vector<LassoResult> solves;
};

/**
 * Weighted l1 regression per mode, warm-started from `state.model.theta`.
 * In the threshold phase the result is hard-thresholded and the surviving
 * support becomes the next active set, so supports only shrink.
 */
inline CoefficientUpdate m_step_coefficients(const DesignMatrix& dm, const MatrixXd& gamma, const EmState& state,
                                             const FitConfig& config)
{
    const Index S = gamma.cols();
    const Index n = dm.phi.cols();
    CoefficientUpdate out;
    out.theta = MatrixXd::Zero(S, n);
    out.active = state.active;
    out.solves.resize(static_cast<std::size_t>(S));
    const double lambda = config.effective_lambda();

    for (Index s = 0; s < S; ++s) {
        const VectorXd w = gamma.col(s);
        const double mass = w.sum();
        if (!(mass > 0.0))
            throw ModeStarvation("mode " + std::to_string(s + 1) + " has zero posterior mass");
        SolverSettings settings = config.solver;
        if (state.model.theta.rows() == S && state.model.theta.cols() == n)
            settings.warm_start = state.model.theta.row(s).transpose();
        const auto& act = state.active[static_cast<std::size_t>(s)];
        std::optional<std::vector<Index>> active;
        if (static_cast<Index>(act.size()) != n)
            active = act;
        LassoResult res = solve_weighted_lasso({dm.phi, dm.y, w, raw_penalty(lambda, mass), active}, settings);
        if (state.phase == Phase::threshold) {
            res.theta = hard_threshold(res.theta, config.upsilon);
            out.active[static_cast<std::size_t>(s)] = support_of(res.theta);
        }
        out.theta.row(s) = res.theta.transpose();
        out.solves[static_cast<std::size_t>(s)] = std::move(res);
    }
    return out;
}

inline std::vector<std::vector<Index>> full_active_sets(Index S, Index n)
{
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        all[static_cast<std::size_t>(i)] = i;
    return std::vector<std::vector<Index>>(static_cast<std::size_t>(S), all);
}

/// Random responsibilities: i.i.d. U[init_lo, init_hi] per row and mode, rows renormalized.
inline MatrixXd initial_responsibilities(Index rows, const FitConfig& config, Rng& rng)
{
    std::uniform_real_distribution<double> unif(config.init_lo, config.init_hi);
    MatrixXd g(rows, config.modes);
    for (Index k = 0; k < rows; ++k) {
        for (Index s = 0; s < g.cols(); ++s)
            g(k, s) = unif(rng);
        g.row(k) /= g.row(k).sum();
    }
    return g;
}

/// Starting state: random responsibilities, uniform A and Pi, then theta and sigma2 from one M-step.
inline EmState initialize(const DesignMatrix& dm, const PolynomialBasis& basis, const FitConfig& config, Rng& rng,
                          MatrixXd* gamma_out = nullptr)
{
    const Index S = config.modes;
    const Index n = basis.size();
    EmState st;
    st.model.basis = basis;
    st.model.A = MatrixXd::Constant(S, S, 1.0 / static_cast<double>(S));
    st.model.Pi = VectorXd::Constant(S, 1.0 / static_cast<double>(S));
    st.active = config.active_sets ? *config.active_sets : full_active_sets(S, n);
    const MatrixXd gamma = initial_responsibilities(dm.rows(), config, rng);
    const CoefficientUpdate cu = m_step_coefficients(dm, gamma, st, config);
    st.model.theta = cu.theta;
    st.model.sigma2 = m_step_variance(dm, gamma, st.model.theta, config.var_floor);
    if (gamma_out)
        *gamma_out = gamma;
    return st;
}

/// Full M-step in the order theta, sigma2, (A, Pi). Returns the coefficient update diagnostics.
inline CoefficientUpdate m_step(EmState& st, const DesignMatrix& dm, const PosteriorSet& post, const MatrixXd& gamma,
                                const FitConfig& config)
{
    CoefficientUpdate cu = m_step_coefficients(dm, gamma, st, config);
    st.model.theta = cu.theta;
    st.active = cu.active;
    st.model.sigma2 = m_step_variance(dm, gamma, st.model.theta, config.var_floor);
    TransitionUpdate tu = m_step_transitions(post, st.model.modes());
    st.model.A = std::move(tu.A);
    st.model.Pi = std::move(tu.Pi);
    return cu;
}

namespace detail {

inline std::vector<int> nonzero_counts(const MatrixXd& theta)
{
    std::vector<int> out;
    for (Index s = 0; s < theta.rows(); ++s)
        out.push_back(static_cast<int>((theta.row(s).array() != 0.0).count()));
    return out;
}

inline std::vector<int> sizes_of(const std::vector<std::vector<Index>>& sets)
{
    std::vector<int> out;
    for (const auto& s : sets)
        out.push_back(static_cast<int>(s.size()));
    return out;
}

// Sum over modes of c_s ||theta_s||_1 with c_s = lambda W_s / sigma2: the penalty
// whose GEM objective the current M-step increases.
inline double penalty_term(const MatrixXd& theta, const VectorXd& weights)
{
    double p = 0.0;
    for (Index s = 0; s < theta.rows(); ++s)
        p += weights(s) * theta.row(s).lpNorm<1>();
    return p;
}

} // namespace detail

/// One EM run from a single random start.
inline FitReport fit_single(const DesignMatrix& dm, const PolynomialBasis& basis, const FitConfig& config,
                            int restart, const FitHooks& hooks = {})
{
    Rng rng = make_rng(config.seed, "restart", static_cast<std::uint64_t>(restart));
    FitReport rep;
    rep.config = config;
    rep.selected_restart = restart;
    RestartSummary summary;
    summary.index = restart;

    const double rows = static_cast<double>(dm.rows());
    const double lambda = config.effective_lambda();
    try {
        EmState st = initialize(dm, basis, config, rng);
        double prev = 0.0;
        bool have_final = false;
        std::optional<VectorXd> pending_weights; // penalty weights of the last burn-in M-step
        double pending_before = 0.0;

        for (int it = 1; it <= config.max_iters; ++it) {
            const PosteriorSet post = e_step(st.model, dm);
            if (hooks.on_e_step)
                hooks.on_e_step(restart, it, post);
            const double ll = post.loglik;
            rep.loglik_trace.push_back(ll);
            rep.iterations = it;

            if (pending_weights) {
                rep.gem_checks.push_back(
                    {it - 1, pending_before, ll - detail::penalty_term(st.model.theta, *pending_weights)});
                pending_weights.reset();
            }

            if (it > 1) {
                const double delta = std::abs(ll - prev);
                if (st.phase == Phase::burn_in && config.thresholding()) {
                    if (delta < config.burn_in_tol) {
                        st.phase = Phase::threshold;
                        rep.phase_switch_iteration = it;
                    }
                } else if (delta < config.converge_tol) {
                    rep.converged = true;
                    rep.final_loglik = ll;
                    have_final = true;
                    break;
                }
            }
            prev = ll;

            const MatrixXd gamma = stack_gamma(post);
            const VectorXd mass = gamma.colwise().sum().transpose();
            for (Index s = 0; s < mass.size(); ++s)
                if (!(mass(s) >= config.starvation_fraction * rows))
                    throw ModeStarvation("mode " + std::to_string(s + 1) + " starved at iteration " +
                                         std::to_string(it) + " (posterior mass " + std::to_string(mass(s)) + ")");

            if (st.phase == Phase::burn_in) {
                const VectorXd weights = lambda * mass / st.model.sigma2;
                pending_before = ll - detail::penalty_term(st.model.theta, weights);
                pending_weights = weights;
            }

            m_step(st, dm, post, gamma, config);

            if (st.phase == Phase::threshold)
                rep.support_history.push_back(st.active);
            if (config.record_snapshots)
                rep.snapshots.push_back({it, st.model.theta});
        }

        if (!have_final) {
            const PosteriorSet post = e_step(st.model, dm);
            rep.final_loglik = post.loglik;
            if (pending_weights)
                rep.gem_checks.push_back({rep.iterations, pending_before,
                                          post.loglik - detail::penalty_term(st.model.theta, *pending_weights)});
        }
        rep.model = st.model;
        rep.support_sizes = detail::nonzero_counts(st.model.theta);
        rep.active_sizes = detail::sizes_of(st.active);
    } catch (const ModeStarvation& e) {
        summary.collapsed = true;
        summary.message = e.what();
    } catch (const DegenerateEmissions& e) {
        summary.collapsed = true;
        summary.message = e.what();
    }
    summary.final_loglik = summary.collapsed ? -std::numeric_limits<double>::infinity() : rep.final_loglik;
    summary.iterations = rep.iterations;
    summary.phase_switch_iteration = rep.phase_switch_iteration;
    summary.converged = rep.converged;
    rep.restarts = {summary};
    return rep;
}

/// Runs every restart and keeps the one with the highest final training loglik.
inline FitReport fit(const DesignMatrix& dm, const PolynomialBasis& basis, const FitConfig& config,
                     const FitHooks& hooks = {})
{
    config.validate();
    if (basis.config() != config.basis)
        throw ConfigError("basis does not match the fit configuration");
    std::vector<FitReport> runs(static_cast<std::size_t>(config.restarts));
    parallel_for(config.restarts, config.threads,
                 [&](Index r) { runs[static_cast<std::size_t>(r)] = fit_single(dm, basis, config, static_cast<int>(r), hooks); });

    std::vector<RestartSummary> summaries;
    int best = -1;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        summaries.push_back(runs[r].restarts.front());
        if (summaries.back().collapsed)
            continue;
        if (best < 0 || runs[r].final_loglik > runs[static_cast<std::size_t>(best)].final_loglik)
            best = static_cast<int>(r);
    }
    if (best < 0) {
        std::string msg = "all " + std::to_string(config.restarts) + " restarts collapsed:";
        for (const auto& s : summaries)
            msg += "\n  restart " + std::to_string(s.index) + ": " + s.message;
        throw EstimationFailure(msg);
    }
    FitReport out = std::move(runs[static_cast<std::size_t>(best)]);
    out.restarts = std::move(summaries);
    out.selected_restart = best;
    return out;
}

/// Builds the basis and training design from the dataset's train segments.
inline FitReport fit(const TrajectoryDataset& data, FitConfig config, const FitHooks& hooks = {})
{
    config.basis.q = data.q;
    if (!data.has_split(Split::train))
        throw DataError("dataset has no training segments");
    const PolynomialBasis basis(config.basis);
    const DesignMatrix dm = build_design_matrix(basis, data.subset(Split::train));
    return fit(dm, basis, config, hooks);
}

/// Pooled one-step-ahead RMSE of the causal mixture prediction over all segments.
inline double one_step_rmse(const SmnarxModel& model, const DesignMatrix& dm)
{
    double sse = 0.0;
    for (Index s = 0; s < dm.segments(); ++s) {
        const FilterResult fr = filter_sequence(model, dm.segment_phi(s), dm.segment_y(s));
        sse += (fr.yhat - dm.segment_y(s)).squaredNorm();
    }
    return std::sqrt(sse / static_cast<double>(dm.rows()));
}

/// Log-spaced values from hi down to lo (a single point yields hi).
inline std::vector<double> descending_grid(double lo, double hi, int size)
{
    if (!(lo > 0.0) || !(hi > 0.0))
        throw ConfigError("grid window bounds must be positive");
    if (lo > hi)
        throw ConfigError("grid window requires lo <= hi");
    if (size < 1)
        throw ConfigError("grid size must be >= 1");
    std::vector<double> g;
    if (size == 1) {
        g.push_back(hi);
        return g;
    }
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < size; ++i)
        g.push_back(std::pow(10.0, lhi + (llo - lhi) * i / (size - 1)));
    g.front() = hi;
    g.back() = lo;
    return g;
}

struct GridRow {
    double lambda = 0.0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double train_loglik = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool ok = false;
    std::string message;
};

struct GridResult {
    double best_lambda = 0.0;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::vector<GridRow> rows;
    bool stopped_early = false;
};

struct GridOptions {
    int patience = 3;
    int restarts = 1; ///< restarts per grid point
};

/**
 * Decreasing search over `lambdas` (taken in the given order). Each point is
 * fitted without the threshold stage and scored by validation RMSE; the search
 * stops after `patience` consecutive points that fail to improve the best score.
 */
inline GridResult grid_search_lambda(const DesignMatrix& train, const DesignMatrix& validation,
                                     const PolynomialBasis& basis, FitConfig config, const std::vector<double>& lambdas,
                                     const GridOptions& opts = {})
{
    if (lambdas.empty())
        throw ConfigError("lambda grid is empty");
    if (validation.rows() < 1)
        throw DataError("validation split is empty");
    if (opts.patience < 1 || opts.restarts < 1)
        throw ConfigError("grid search needs patience >= 1 and restarts >= 1");
    config.variant = Variant::em_l1;
    config.restarts = opts.restarts;

    GridResult out;
    int misses = 0;
    for (double lam : lambdas) {
        GridRow row;
        row.lambda = lam;
        config.lambda = lam;
        try {
            const FitReport rep = fit(train, basis, config);
            row.rmse = one_step_rmse(rep.model, validation);
            row.train_loglik = rep.final_loglik;
            row.iterations = rep.iterations;
            row.ok = true;
        } catch (const EstimationFailure& e) {
            row.message = e.what();
        }
        out.rows.push_back(row);
        if (row.ok && row.rmse < out.best_rmse) {
            out.best_rmse = row.rmse;
            out.best_lambda = lam;
            misses = 0;
        } else if (++misses >= opts.patience) {
            out.stopped_early = true;
            break;
        }
    }
    if (!std::isfinite(out.best_rmse))
        throw EstimationFailure("no grid point produced a usable fit");
    return out;
}

inline GridResult grid_search_lambda(const TrajectoryDataset& data, FitConfig config, double lo, double hi,
                                     int grid_size, const GridOptions& opts = {})
{
    config.basis.q = data.q;
    if (!data.has_split(Split::validation))
        throw DataError("dataset has no validation split");
    if (!data.has_split(Split::train))
        throw DataError("dataset has no training segments");
    const PolynomialBasis basis(config.basis);
    const DesignMatrix train = build_design_matrix(basis, data.subset(Split::train));
    const DesignMatrix val = build_design_matrix(basis, data.subset(Split::validation));
    return grid_search_lambda(train, val, basis, config, descending_grid(lo, hi, grid_size), opts);
}

} // namespace smnarx
