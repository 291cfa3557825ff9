#pragma once

#include "smnarx/common.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace smnarx {

/// Lag structure and polynomial degree of a NARX regressor dictionary.
struct BasisConfig {
    int n_a = 1; ///< output lags
    int n_b = 1; ///< input lags
    int q = 1;   ///< input channels
    int n_d = 1; ///< maximum monomial degree

    /// Length p of the lagged vector x_k.
    int lagged_size() const { return n_a + q * n_b; }
    /// Samples consumed at the start of every segment before x_k is defined.
    int max_lag() const { return std::max(n_a, n_b); }

    void validate() const
    {
        if (n_a < 1 || n_b < 1 || q < 1 || n_d < 1)
            throw ConfigError("basis config requires n_a, n_b, q, n_d >= 1 (got n_a=" + std::to_string(n_a) +
                              ", n_b=" + std::to_string(n_b) + ", q=" + std::to_string(q) +
                              ", n_d=" + std::to_string(n_d) + ")");
    }

    friend bool operator==(const BasisConfig&, const BasisConfig&) = default;
};

using Exponents = std::vector<int>;

/// C(p + d, d) computed without overflow for the sizes used here.
inline Index monomial_count(int p, int d)
{
    Index r = 1;
    for (int i = 1; i <= d; ++i)
        r = r * (p + i) / i;
    return r;
}

/**
 * Monomial dictionary over the lagged vector
 *   x_k = [y(k-1) .. y(k-n_a), u(k-1) .. u(k-n_b)]   (each u block has q entries)
 * with all exponent vectors of total degree <= n_d.
 *
 * Terms are ordered by degree, then by descending lexicographic order of the
 * exponent vector, so index 0 is the constant and for two variables (a, b)
 * the order is 1, a, b, a^2, ab, b^2.
 */
class PolynomialBasis {
public:
    PolynomialBasis() : PolynomialBasis(BasisConfig{}) {}

    explicit PolynomialBasis(BasisConfig config) : config_(config)
    {
        config_.validate();
        const int p = config_.lagged_size();
        Exponents current(static_cast<std::size_t>(p), 0);
        for (int d = 0; d <= config_.n_d; ++d)
            enumerate_degree(current, 0, d);
        factors_.reserve(terms_.size());
        for (const auto& e : terms_) {
            std::vector<std::pair<int, int>> f;
            for (int v = 0; v < p; ++v)
                if (e[static_cast<std::size_t>(v)] > 0)
                    f.emplace_back(v, e[static_cast<std::size_t>(v)]);
            factors_.push_back(std::move(f));
        }
    }

    const BasisConfig& config() const { return config_; }
    Index size() const { return static_cast<Index>(terms_.size()); }
    int lagged_size() const { return config_.lagged_size(); }
    const std::vector<Exponents>& terms() const { return terms_; }
    const Exponents& term(Index i) const { return terms_.at(static_cast<std::size_t>(i)); }

    int degree(Index i) const
    {
        int d = 0;
        for (int e : term(i))
            d += e;
        return d;
    }

    std::optional<Index> index_of(const Exponents& e) const
    {
        auto it = std::find(terms_.begin(), terms_.end(), e);
        if (it == terms_.end())
            return std::nullopt;
        return static_cast<Index>(it - terms_.begin());
    }

    std::string variable_name(int v) const
    {
        if (v < config_.n_a)
            return "y(k-" + std::to_string(v + 1) + ")";
        const int idx = v - config_.n_a;
        const int lag = idx / config_.q + 1;
        const std::string channel = config_.q == 1 ? "" : std::to_string(idx % config_.q + 1);
        return "u" + channel + "(k-" + std::to_string(lag) + ")";
    }

    std::string term_name(Index i) const
    {
        const auto& f = factors_.at(static_cast<std::size_t>(i));
        if (f.empty())
            return "1";
        std::string s;
        for (const auto& [v, e] : f) {
            if (!s.empty())
                s += "*";
            s += variable_name(v);
            if (e > 1)
                s += "^" + std::to_string(e);
        }
        return s;
    }

    /// Writes phi(x) into `out` (length size()).
    template <typename Out>
    void evaluate_into(std::span<const double> x, Out&& out) const
    {
        if (static_cast<int>(x.size()) != lagged_size())
            throw DimensionError("lagged vector has length " + std::to_string(x.size()) + ", basis expects " +
                                 std::to_string(lagged_size()));
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            double v = 1.0;
            for (const auto& [var, e] : factors_[i]) {
                const double xv = x[static_cast<std::size_t>(var)];
                for (int r = 0; r < e; ++r)
                    v *= xv;
            }
            out(static_cast<Index>(i)) = v;
        }
    }

    VectorXd evaluate(std::span<const double> x) const
    {
        VectorXd out(size());
        evaluate_into(x, out);
        return out;
    }

    VectorXd evaluate(const VectorXd& x) const { return evaluate(std::span<const double>(x.data(), x.size())); }

    friend bool operator==(const PolynomialBasis& a, const PolynomialBasis& b)
    {
        return a.config_ == b.config_ && a.terms_ == b.terms_;
    }

private:
    void enumerate_degree(Exponents& current, int var, int remaining)
    {
        const int p = static_cast<int>(current.size());
        if (var == p - 1) {
            current[static_cast<std::size_t>(var)] = remaining;
            terms_.push_back(current);
            current[static_cast<std::size_t>(var)] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[static_cast<std::size_t>(var)] = e;
            enumerate_degree(current, var + 1, remaining - e);
        }
        current[static_cast<std::size_t>(var)] = 0;
    }

    BasisConfig config_;
    std::vector<Exponents> terms_;
    std::vector<std::vector<std::pair<int, int>>> factors_;
};

inline PolynomialBasis enumerate_basis(const BasisConfig& config) { return PolynomialBasis(config); }

inline VectorXd evaluate_regressors(const PolynomialBasis& basis, std::span<const double> x)
{
    return basis.evaluate(x);
}

/**
 * Lagged vector at sample t of a contiguous record. `y` and `u` hold the
 * record, `u` row-major per sample (T x q). Requires t >= max_lag.
 */
template <typename YVec, typename UMat>
std::vector<double> lagged_vector(const BasisConfig& cfg, const YVec& y, const UMat& u, Index t)
{
    if (t < cfg.max_lag())
        throw DimensionError("lagged vector requested before the warm-up window");
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(cfg.lagged_size()));
    for (int i = 1; i <= cfg.n_a; ++i)
        x.push_back(y(t - i));
    for (int j = 1; j <= cfg.n_b; ++j)
        for (int c = 0; c < cfg.q; ++c)
            x.push_back(u(t - j, c));
    return x;
}

} // namespace smnarx
