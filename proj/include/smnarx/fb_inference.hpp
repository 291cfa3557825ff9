#pragma once

#include "smnarx/common.hpp"
#include "smnarx/design.hpp"
#include "smnarx/model.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace smnarx {

/// Posterior quantities of one segment from the scaled forward-backward pass.
struct SegmentPosterior {
    MatrixXd alpha_hat; ///< N x S, rows sum to 1
    MatrixXd beta_hat;  ///< N x S
    VectorXd scale;     ///< N normalizers c_k
    MatrixXd gamma;     ///< N x S
    MatrixXd xi;        ///< (N-1) x S*S, entry (k, i*S + j) = p(z_k = i, z_{k+1} = j | Y)
    double loglik = 0.0;

    Index length() const { return gamma.rows(); }
    Index modes() const { return gamma.cols(); }
    double xi_at(Index k, Index i, Index j) const { return xi(k, i * modes() + j); }
    MatrixXd xi_matrix(Index k) const
    {
        const Index S = modes();
        MatrixXd m(S, S);
        for (Index i = 0; i < S; ++i)
            for (Index j = 0; j < S; ++j)
                m(i, j) = xi(k, i * S + j);
        return m;
    }
};

struct PosteriorSet {
    std::vector<SegmentPosterior> segments;
    double loglik = 0.0;
};

inline double gaussian_density(double y, double mean, double sigma2)
{
    const double r = y - mean;
    return std::exp(-0.5 * r * r / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

/// b_k^s for one regressor row, floored at kEmissionFloor.
template <typename Row>
VectorXd emission_probs(const SmnarxModel& model, const Row& design_row, double y)
{
    if (!(model.sigma2 > 0.0))
        throw ConfigError("emission densities need sigma2 > 0");
    if (design_row.size() != model.theta.cols())
        throw DimensionError("design row length does not match the model basis");
    VectorXd b(model.modes());
    for (Index s = 0; s < model.modes(); ++s)
        b(s) = std::max(gaussian_density(y, model.theta.row(s).dot(design_row), model.sigma2), kEmissionFloor);
    return b;
}

/// Emission matrix (rows x S) for a block of regressor rows and targets.
template <typename Phi, typename Y>
MatrixXd emission_matrix(const SmnarxModel& model, const Phi& phi, const Y& y)
{
    if (!(model.sigma2 > 0.0))
        throw ConfigError("emission densities need sigma2 > 0");
    MatrixXd b = model.means(phi);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * model.sigma2);
    const double inv = -0.5 / model.sigma2;
    for (Index s = 0; s < b.cols(); ++s)
        for (Index k = 0; k < b.rows(); ++k) {
            const double r = y(k) - b(k, s);
            b(k, s) = std::max(norm * std::exp(inv * r * r), kEmissionFloor);
        }
    return b;
}

namespace detail {

inline double checked_scale(double c, Index k)
{
    if (!(c > 0.0) || !std::isfinite(c))
        throw DegenerateEmissions("degenerate emissions at step " + std::to_string(k + 1) +
                                  ": forward normalizer is " + std::to_string(c));
    return c;
}

} // namespace detail

/**
 * Scaled forward-backward over one segment given its emission matrix.
 *
 *   alpha_1 ∝ Pi ∘ b_1,   alpha_k ∝ (alpha_{k-1}^T A) ∘ b_k,  c_k = normalizer
 *   beta_N = 1,           beta_k = A (b_{k+1} ∘ beta_{k+1}) / c_{k+1}
 *   gamma_k = alpha_k ∘ beta_k
 *   xi_k(i, j) = alpha_k(i) A(i, j) b_{k+1}(j) beta_{k+1}(j) / c_{k+1}
 *   loglik = sum_k log c_k
 */
inline SegmentPosterior forward_backward(const MatrixXd& emissions, const MatrixXd& A, const VectorXd& Pi)
{
    const Index N = emissions.rows();
    const Index S = emissions.cols();
    if (N < 1)
        throw DataError("forward-backward needs at least one usable row");
    if (A.rows() != S || A.cols() != S || Pi.size() != S)
        throw DimensionError("emission columns do not match the transition matrix");

    SegmentPosterior post;
    post.alpha_hat.resize(N, S);
    post.beta_hat.resize(N, S);
    post.scale.resize(N);

    VectorXd a = Pi.cwiseProduct(emissions.row(0).transpose());
    double c = detail::checked_scale(a.sum(), 0);
    post.alpha_hat.row(0) = (a / c).transpose();
    post.scale(0) = c;
    for (Index k = 1; k < N; ++k) {
        a = (post.alpha_hat.row(k - 1) * A).transpose().cwiseProduct(emissions.row(k).transpose());
        c = detail::checked_scale(a.sum(), k);
        post.alpha_hat.row(k) = (a / c).transpose();
        post.scale(k) = c;
    }

    post.beta_hat.row(N - 1).setOnes();
    for (Index k = N - 2; k >= 0; --k) {
        const VectorXd next = emissions.row(k + 1).transpose().cwiseProduct(post.beta_hat.row(k + 1).transpose());
        post.beta_hat.row(k) = (A * next).transpose() / post.scale(k + 1);
    }

    post.gamma = post.alpha_hat.cwiseProduct(post.beta_hat);
    post.xi.resize(std::max<Index>(N - 1, 0), S * S);
    for (Index k = 0; k + 1 < N; ++k) {
        const double inv_c = 1.0 / post.scale(k + 1);
        for (Index i = 0; i < S; ++i)
            for (Index j = 0; j < S; ++j)
                post.xi(k, i * S + j) = post.alpha_hat(k, i) * A(i, j) * emissions(k + 1, j) *
                                        post.beta_hat(k + 1, j) * inv_c;
    }
    post.loglik = post.scale.array().log().sum();
    return post;
}

template <typename Phi, typename Y>
SegmentPosterior forward_backward(const SmnarxModel& model, const Phi& phi, const Y& y)
{
    return forward_backward(emission_matrix(model, phi, y), model.A, model.Pi);
}

/// E-step over every segment of a design matrix.
inline PosteriorSet e_step(const SmnarxModel& model, const DesignMatrix& dm)
{
    PosteriorSet out;
    out.segments.reserve(static_cast<std::size_t>(dm.segments()));
    const MatrixXd b = emission_matrix(model, dm.phi, dm.y);
    for (Index s = 0; s < dm.segments(); ++s) {
        out.segments.push_back(
            forward_backward(MatrixXd(b.middleRows(dm.segment_begin(s), dm.segment_rows(s))), model.A, model.Pi));
        out.loglik += out.segments.back().loglik;
    }
    return out;
}

/// f_k(j) = sum_i alpha_{k-1}(i) A(i, j), normalized.
template <typename Alpha>
VectorXd predictive_mode_probs(const MatrixXd& A, const Alpha& alpha_prev)
{
    if (alpha_prev.size() != A.rows())
        throw DimensionError("forward state does not match transition matrix");
    const VectorXd a = alpha_prev;
    VectorXd f = A.transpose() * a;
    return f / f.sum();
}

template <typename Alpha>
VectorXd predictive_mode_probs(const SmnarxModel& model, const Alpha& alpha_prev)
{
    return predictive_mode_probs(model.A, alpha_prev);
}

/// y_hat = sum_s f(s) theta_s^T phi.
template <typename Row>
double predict_one_step(const SmnarxModel& model, const VectorXd& f, const Row& design_row)
{
    if (f.size() != model.modes() || design_row.size() != model.theta.cols())
        throw DimensionError("predict_one_step: size mismatch");
    const VectorXd x = design_row;
    return f.dot(model.theta * x);
}

/// Causal pass: per-row predictive mode probabilities, mixture prediction and argmax mode.
struct FilterResult {
    MatrixXd f;           ///< N x S
    VectorXd yhat;        ///< N
    std::vector<int> mode; ///< argmax_s f_k(s)
    double loglik = 0.0;
};

inline int argmax(const auto& v)
{
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best))
            best = i;
    return static_cast<int>(best);
}

template <typename Phi, typename Y>
FilterResult filter_sequence(const SmnarxModel& model, const Phi& phi, const Y& y)
{
    const Index N = phi.rows();
    const Index S = model.modes();
    if (N < 1)
        throw DataError("filter_sequence needs a non-empty segment");
    FilterResult out;
    out.f.resize(N, S);
    out.yhat.resize(N);
    out.mode.resize(static_cast<std::size_t>(N));
    const MatrixXd means = model.means(phi);
    const MatrixXd b = emission_matrix(model, phi, y);
    VectorXd alpha;
    for (Index k = 0; k < N; ++k) {
        const VectorXd f = k == 0 ? VectorXd(model.Pi / model.Pi.sum()) : predictive_mode_probs(model.A, alpha);
        out.f.row(k) = f.transpose();
        out.yhat(k) = f.dot(means.row(k).transpose());
        out.mode[static_cast<std::size_t>(k)] = argmax(f);
        alpha = f.cwiseProduct(b.row(k).transpose());
        const double c = detail::checked_scale(alpha.sum(), k);
        alpha /= c;
        out.loglik += std::log(c);
    }
    return out;
}

} // namespace smnarx
