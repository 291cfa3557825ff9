#pragma once

#include "smnarx/common.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace smnarx {

/**
 * min_theta  sum_k w_k (y_k - phi_k^T theta)^2 + lambda * ||theta||_1
 *
 * Raw weighted squared loss: no 1/2 and no 1/N in front, so the coordinate
 * update soft-thresholds at lambda / 2. Coordinates outside `active_set`
 * (when given) are held at zero.
 */
struct WeightedRegressionProblem {
    Eigen::Ref<const MatrixXd> design;
    Eigen::Ref<const VectorXd> targets;
    Eigen::Ref<const VectorXd> weights;
    double lambda = 0.0;
    std::optional<std::vector<Index>> active_set = std::nullopt;
};

struct SolverSettings {
    double coord_tol = 1e-8; ///< stop when the largest coefficient change of a sweep is below this
    int max_sweeps = 1000;
    std::optional<VectorXd> warm_start = std::nullopt;
    bool record_objective = false;

    void validate() const
    {
        if (!(coord_tol > 0.0) || max_sweeps < 1)
            throw ConfigError("solver settings need coord_tol > 0 and max_sweeps >= 1");
    }
};

struct LassoResult {
    VectorXd theta;
    int sweeps = 0;
    bool converged = false;
    std::vector<Index> degenerate; ///< active coordinates with zero weighted column norm, forced to 0
    double objective = 0.0;
    std::vector<double> objective_trace; ///< after each sweep, when requested
};

/// Weighted normal-equation blocks: G = X^T W X, c = X^T W y, yy = y^T W y.
struct WeightedGram {
    MatrixXd G;
    VectorXd c;
    double yy = 0.0;
};

inline WeightedGram weighted_gram(const Eigen::Ref<const MatrixXd>& X, const Eigen::Ref<const VectorXd>& y,
                                  const Eigen::Ref<const VectorXd>& w)
{
    if (X.rows() != y.size() || X.rows() != w.size())
        throw DimensionError("design, targets and weights must have the same number of rows");
    if ((w.array() < 0.0).any())
        throw ConfigError("regression weights must be non-negative");
    WeightedGram g;
    const MatrixXd Xw = X.array().colwise() * w.array().sqrt();
    g.G = MatrixXd::Zero(X.cols(), X.cols());
    g.G.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
    g.G.triangularView<Eigen::StrictlyUpper>() = g.G.transpose();
    g.c = X.transpose() * w.cwiseProduct(y);
    g.yy = w.dot(y.cwiseAbs2());
    return g;
}

inline double soft_threshold(double x, double t)
{
    if (x > t)
        return x - t;
    if (x < -t)
        return x + t;
    return 0.0;
}

/// Objective value from the Gram blocks.
inline double lasso_objective(const WeightedGram& g, double lambda, const VectorXd& theta)
{
    return g.yy - 2.0 * g.c.dot(theta) + theta.dot(g.G * theta) + lambda * theta.lpNorm<1>();
}

/**
 * Cyclic coordinate descent on the Gram form. Each update
 *   theta_i <- soft(rho_i, lambda/2) / z_i,
 *   rho_i = c_i - sum_{j != i} G_ij theta_j,  z_i = G_ii
 * exactly minimizes the objective along coordinate i, so the objective
 * never increases from the starting point.
 */
inline LassoResult solve_lasso_gram(const WeightedGram& g, double lambda, const std::optional<std::vector<Index>>& active,
                                    const SolverSettings& settings = {})
{
    settings.validate();
    if (!(lambda >= 0.0))
        throw ConfigError("lambda must be >= 0");
    const Index n = g.G.rows();

    std::vector<Index> coords;
    std::vector<char> in_active(static_cast<std::size_t>(n), active ? 0 : 1);
    if (active) {
        for (Index i : *active) {
            if (i < 0 || i >= n)
                throw DimensionError("active set index " + std::to_string(i) + " out of range");
            in_active[static_cast<std::size_t>(i)] = 1;
        }
    }
    for (Index i = 0; i < n; ++i)
        if (in_active[static_cast<std::size_t>(i)])
            coords.push_back(i);

    LassoResult res;
    if (settings.warm_start) {
        if (settings.warm_start->size() != n)
            throw DimensionError("warm start has the wrong length");
        res.theta = *settings.warm_start;
        for (Index i = 0; i < n; ++i)
            if (!in_active[static_cast<std::size_t>(i)])
                res.theta(i) = 0.0;
    } else {
        res.theta = VectorXd::Zero(n);
    }

    VectorXd gt = g.G * res.theta;
    const double half = 0.5 * lambda;
    for (Index i : coords) {
        if (!(g.G(i, i) > 0.0)) {
            res.degenerate.push_back(i);
            if (res.theta(i) != 0.0) {
                gt -= g.G.col(i) * res.theta(i);
                res.theta(i) = 0.0;
            }
        }
    }

    for (int sweep = 0; sweep < settings.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Index i : coords) {
            const double z = g.G(i, i);
            if (!(z > 0.0))
                continue;
            const double old = res.theta(i);
            const double rho = g.c(i) - (gt(i) - z * old);
            const double upd = soft_threshold(rho, half) / z;
            const double d = upd - old;
            if (d != 0.0) {
                gt.noalias() += g.G.col(i) * d;
                res.theta(i) = upd;
                max_delta = std::max(max_delta, std::abs(d));
            }
        }
        res.sweeps = sweep + 1;
        if (settings.record_objective)
            res.objective_trace.push_back(lasso_objective(g, lambda, res.theta));
        if (max_delta < settings.coord_tol) {
            res.converged = true;
            break;
        }
    }
    res.objective = lasso_objective(g, lambda, res.theta);
    return res;
}

inline LassoResult solve_weighted_lasso(const WeightedRegressionProblem& problem, const SolverSettings& settings = {})
{
    if (problem.weights.size() > 0 && !(problem.weights.sum() > 0.0))
        throw ConfigError("regression weights must have positive total mass");
    const Index n = problem.design.cols();
    if (!problem.active_set || static_cast<Index>(problem.active_set->size()) >= n) {
        const WeightedGram g = weighted_gram(problem.design, problem.targets, problem.weights);
        return solve_lasso_gram(g, problem.lambda, problem.active_set, settings);
    }

    // Small active set: solve on the gathered columns only, then scatter back.
    std::vector<Index> idx = *problem.active_set;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (Index i : idx)
        if (i < 0 || i >= n)
            throw DimensionError("active set index " + std::to_string(i) + " out of range");
    if (settings.warm_start && settings.warm_start->size() != n)
        throw DimensionError("warm start has the wrong length");
    const Index m = static_cast<Index>(idx.size());
    MatrixXd sub(problem.design.rows(), m);
    for (Index j = 0; j < m; ++j)
        sub.col(j) = problem.design.col(idx[static_cast<std::size_t>(j)]);
    SolverSettings local = settings;
    if (settings.warm_start) {
        VectorXd w(m);
        for (Index j = 0; j < m; ++j)
            w(j) = (*settings.warm_start)(idx[static_cast<std::size_t>(j)]);
        local.warm_start = w;
    }
    const WeightedGram g = weighted_gram(sub, problem.targets, problem.weights);
    LassoResult r = solve_lasso_gram(g, problem.lambda, std::nullopt, local);
    LassoResult out = r;
    out.theta = VectorXd::Zero(n);
    for (Index j = 0; j < m; ++j)
        out.theta(idx[static_cast<std::size_t>(j)]) = r.theta(j);
    out.degenerate.clear();
    for (Index j : r.degenerate)
        out.degenerate.push_back(idx[static_cast<std::size_t>(j)]);
    return out;
}

/// Objective evaluated directly on the data (no Gram shortcut).
inline double weighted_lasso_objective(const WeightedRegressionProblem& problem, const VectorXd& theta)
{
    const VectorXd r = problem.targets - problem.design * theta;
    return problem.weights.dot(r.cwiseAbs2()) + problem.lambda * theta.lpNorm<1>();
}

/**
 * eta_0(x; U) = x * 1{|x| >= sqrt(2 U)}, applied with U = upsilon^2 / 2, so an
 * entry survives iff |x| >= upsilon (boundary kept). The cutoff is used in its
 * reduced form to avoid sqrt rounding at the boundary.
 */
inline VectorXd hard_threshold(const VectorXd& theta, double upsilon)
{
    if (!(upsilon >= 0.0))
        throw ConfigError("threshold must be >= 0");
    VectorXd out = theta;
    for (Index i = 0; i < out.size(); ++i)
        if (!(std::abs(out(i)) >= upsilon))
            out(i) = 0.0;
    return out;
}

inline std::vector<Index> support_of(const VectorXd& theta)
{
    std::vector<Index> s;
    for (Index i = 0; i < theta.size(); ++i)
        if (theta(i) != 0.0)
            s.push_back(i);
    return s;
}

} // namespace smnarx
