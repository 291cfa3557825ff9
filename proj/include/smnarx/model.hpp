#pragma once

#include "smnarx/common.hpp"
#include "smnarx/poly_basis.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace smnarx {

namespace detail {

inline void check_stochastic_rows(const MatrixXd& A, double tol, const char* what)
{
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < A.cols(); ++j)
            if (!(A(i, j) >= 0.0 && A(i, j) <= 1.0))
                throw ConfigError(std::string(what) + " entries must lie in [0, 1]");
        if (std::abs(A.row(i).sum() - 1.0) > tol)
            throw ConfigError(std::string(what) + " row " + std::to_string(i + 1) + " sums to " +
                              std::to_string(A.row(i).sum()) + ", expected 1");
    }
}

} // namespace detail

/// Parameters of a switched Markov polynomial NARX model.
struct SmnarxModel {
    PolynomialBasis basis;
    MatrixXd theta; ///< S x n, row s holds the coefficients of mode s
    double sigma2 = 1.0;
    MatrixXd A;  ///< S x S, A(i, j) = p(z_k = j | z_{k-1} = i)
    VectorXd Pi; ///< S

    Index modes() const { return theta.rows(); }

    void validate(double tol = kStochasticTol) const
    {
        const Index S = modes();
        if (S < 1)
            throw ConfigError("model needs at least one mode");
        if (theta.cols() != basis.size())
            throw DimensionError("theta has " + std::to_string(theta.cols()) + " columns, basis has " +
                                 std::to_string(basis.size()) + " terms");
        if (A.rows() != S || A.cols() != S || Pi.size() != S)
            throw DimensionError("transition matrix / initial distribution do not match mode count");
        if (!(sigma2 >= 1e-12) || !std::isfinite(sigma2))
            throw ConfigError("noise variance must be finite and >= 1e-12");
        if (!theta.allFinite())
            throw ConfigError("coefficients must be finite");
        detail::check_stochastic_rows(A, tol, "transition matrix");
        detail::check_stochastic_rows(Pi.transpose(), tol, "initial distribution");
    }

    /// Per-mode conditional means for a block of regressor rows (rows x S).
    template <typename Phi>
    MatrixXd means(const Phi& phi) const
    {
        return phi * theta.transpose();
    }
};

/// Exogenous input law: i.i.d. uniform on [lo_c, hi_c] per channel.
struct InputLaw {
    std::vector<double> lo{-1.0};
    std::vector<double> hi{1.0};

    void validate(int q) const
    {
        if (static_cast<int>(lo.size()) != q || static_cast<int>(hi.size()) != q)
            throw DimensionError("input law must give one [lo, hi] pair per input channel");
        for (std::size_t c = 0; c < lo.size(); ++c)
            if (!(lo[c] <= hi[c]))
                throw ConfigError("input law requires lo <= hi");
    }
};

/// Data-generating system: model parameters plus noise level and input law.
struct TrueSystem {
    PolynomialBasis basis;
    MatrixXd theta;
    MatrixXd A;
    VectorXd Pi;
    double noise_std = 0.0;
    InputLaw input_law;

    Index modes() const { return theta.rows(); }

    void validate() const
    {
        if (!(noise_std >= 0.0))
            throw ConfigError("noise_std must be >= 0");
        const Index S = modes();
        if (S < 1 || theta.cols() != basis.size())
            throw DimensionError("true system coefficients do not match the basis");
        if (A.rows() != S || A.cols() != S || Pi.size() != S)
            throw DimensionError("true system transition matrix / initial distribution do not match mode count");
        detail::check_stochastic_rows(A, 1e-12, "transition matrix");
        detail::check_stochastic_rows(Pi.transpose(), 1e-12, "initial distribution");
        input_law.validate(basis.config().q);
    }

    /// Model view with sigma2 = noise_std^2 (floored so the model stays valid).
    SmnarxModel as_model(double var_floor = 1e-12) const
    {
        return SmnarxModel{basis, theta, std::max(noise_std * noise_std, var_floor), A, Pi};
    }
};

/**
 * Relabels modes: new mode s is old mode perm[s]. Applied consistently to
 * coefficient rows, transition rows and columns, and the initial distribution.
 */
inline SmnarxModel permute_modes(const SmnarxModel& m, const std::vector<int>& perm)
{
    const Index S = m.modes();
    if (static_cast<Index>(perm.size()) != S)
        throw DimensionError("permutation size does not match mode count");
    SmnarxModel out = m;
    for (Index s = 0; s < S; ++s) {
        const Index from = perm[static_cast<std::size_t>(s)];
        out.theta.row(s) = m.theta.row(from);
        out.Pi(s) = m.Pi(from);
        for (Index t = 0; t < S; ++t)
            out.A(s, t) = m.A(from, perm[static_cast<std::size_t>(t)]);
    }
    return out;
}

} // namespace smnarx
