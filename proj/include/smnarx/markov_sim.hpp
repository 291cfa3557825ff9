#pragma once

#include "smnarx/dataset.hpp"
#include "smnarx/model.hpp"
#include "smnarx/rng.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace smnarx {

namespace detail {

// Exponent vector over the lagged layout [y(k-1..k-n_a), u(k-1..k-n_b)] for q = 1.
struct Monomial {
    std::vector<std::pair<int, int>> y; // (lag, power)
    std::vector<std::pair<int, int>> u;
};

inline Index term_index(const PolynomialBasis& basis, const Monomial& m)
{
    const auto& cfg = basis.config();
    Exponents e(static_cast<std::size_t>(cfg.lagged_size()), 0);
    for (auto [lag, pw] : m.y)
        e[static_cast<std::size_t>(lag - 1)] += pw;
    for (auto [lag, pw] : m.u)
        e[static_cast<std::size_t>(cfg.n_a + (lag - 1) * cfg.q)] += pw;
    auto idx = basis.index_of(e);
    if (!idx)
        throw ConfigError("monomial not present in basis");
    return *idx;
}

} // namespace detail

/**
 * Three-mode benchmark system:
 *   mode 1: 0.5 y(k-1) + 0.8 u(k-2) + u(k-1)^2 - 0.3 y(k-2)^2
 *   mode 2: 0.2 y(k-1)^3 - 0.5 y(k-2) - 0.7 y(k-2) u(k-2)^2 + 0.6 u(k-2)^2
 *   mode 3: 0.5 y(k-2) - 0.4 y(k-1) + 0.2 u(k-1) - 0.4 u(k-3) y(k-1)
 * with noise N(0, 0.1^2), u ~ U[-1, 1], a cyclic 0.98-persistent transition
 * matrix and a uniform initial distribution, over the n_a = n_b = 4, n_d = 3
 * dictionary (165 terms).
 */
inline TrueSystem benchmark_system()
{
    using detail::Monomial;
    TrueSystem sys;
    sys.basis = PolynomialBasis(BasisConfig{4, 4, 1, 3});
    const Index n = sys.basis.size();
    sys.theta = MatrixXd::Zero(3, n);

    auto set = [&](int mode, double value, Monomial m) { sys.theta(mode, detail::term_index(sys.basis, m)) = value; };
    set(0, 0.5, {{{1, 1}}, {}});
    set(0, 0.8, {{}, {{2, 1}}});
    set(0, 1.0, {{}, {{1, 2}}});
    set(0, -0.3, {{{2, 2}}, {}});

    set(1, 0.2, {{{1, 3}}, {}});
    set(1, -0.5, {{{2, 1}}, {}});
    set(1, -0.7, {{{2, 1}}, {{2, 2}}});
    set(1, 0.6, {{}, {{2, 2}}});

    set(2, 0.5, {{{2, 1}}, {}});
    set(2, -0.4, {{{1, 1}}, {}});
    set(2, 0.2, {{}, {{1, 1}}});
    set(2, -0.4, {{{1, 1}}, {{3, 1}}});

    sys.A.resize(3, 3);
    sys.A << 0.98, 0.02, 0.0, //
        0.0, 0.98, 0.02,      //
        0.02, 0.0, 0.98;
    sys.Pi = VectorXd::Constant(3, 1.0 / 3.0);
    sys.noise_std = 0.1;
    sys.input_law = InputLaw{{-1.0}, {1.0}};
    return sys;
}

struct SimulationOptions {
    double overflow_guard = 1e6;
};

inline int sample_categorical(Rng& rng, const auto& probs)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r = unif(rng);
    double acc = 0.0;
    const int S = static_cast<int>(probs.size());
    for (int s = 0; s < S; ++s) {
        acc += probs(s);
        if (r < acc)
            return s;
    }
    // r landed in the rounding gap above the cumulative sum: last state with mass
    for (int s = S - 1; s >= 0; --s)
        if (probs(s) > 0.0)
            return s;
    return S - 1;
}

/**
 * Draws an N-sample trajectory. Lagged values before the first sample are
 * zero. Modes, inputs and noise use independent sub-streams of `seed`.
 */
inline TrajectoryDataset simulate(const TrueSystem& sys, Index N, std::uint64_t seed,
                                  const SimulationOptions& opts = {})
{
    sys.validate();
    const BasisConfig& cfg = sys.basis.config();
    if (N <= cfg.max_lag())
        throw ConfigError("sample count " + std::to_string(N) + " must exceed the maximum lag " +
                          std::to_string(cfg.max_lag()));

    Rng mode_rng = make_rng(seed, "modes");
    Rng input_rng = make_rng(seed, "inputs");
    Rng noise_rng = make_rng(seed, "noise");
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int q = cfg.q;
    const Index lag = cfg.max_lag();
    // padded record: `lag` zero samples, then the trajectory
    VectorXd y = VectorXd::Zero(N + lag);
    MatrixXd u = MatrixXd::Zero(N + lag, q);
    std::vector<int> z(static_cast<std::size_t>(N));

    for (Index k = 0; k < N; ++k) {
        const Index t = k + lag;
        for (int c = 0; c < q; ++c) {
            std::uniform_real_distribution<double> law(sys.input_law.lo[static_cast<std::size_t>(c)],
                                                       sys.input_law.hi[static_cast<std::size_t>(c)]);
            u(t, c) = law(input_rng);
        }
        const int mode = k == 0 ? sample_categorical(mode_rng, sys.Pi)
                                : sample_categorical(mode_rng, sys.A.row(z[static_cast<std::size_t>(k - 1)]));
        z[static_cast<std::size_t>(k)] = mode;
        const auto x = lagged_vector(cfg, y, u, t);
        const double mean = sys.basis.evaluate(x).dot(sys.theta.row(mode));
        const double noise = sys.noise_std > 0.0 ? sys.noise_std * gauss(noise_rng) : 0.0;
        y(t) = mean + noise;
        if (!std::isfinite(y(t)) || std::abs(y(t)) > opts.overflow_guard)
            throw SimulationDiverged("trajectory diverged at k=" + std::to_string(k + 1) + " (mode " +
                                     std::to_string(mode + 1) + ", |y|=" + std::to_string(std::abs(y(t))) +
                                     " exceeds guard " + std::to_string(opts.overflow_guard) + ")");
    }

    TrajectoryDataset data;
    data.q = q;
    Segment seg;
    seg.start = 1;
    seg.y = y.tail(N);
    seg.u = u.bottomRows(N);
    seg.modes = std::move(z);
    data.segments.push_back(std::move(seg));
    return data;
}

/// Count of k with z_k != z_{k-1} over all segments.
inline Index count_switches(const TrajectoryDataset& data)
{
    Index n = 0;
    for (const auto& s : data.segments)
        for (std::size_t k = 1; k < s.modes.size(); ++k)
            n += s.modes[k] != s.modes[k - 1];
    return n;
}

} // namespace smnarx
