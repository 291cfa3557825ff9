#pragma once

#include "smnarx/dataset.hpp"
#include "smnarx/poly_basis.hpp"

#include <string>
#include <vector>

namespace smnarx {

/**
 * Stacked regressor rows for every segment of a dataset.
 *
 * The first `warmup` samples of each segment have no complete lagged vector
 * and are excluded. Segment s owns rows [offsets[s], offsets[s+1]); row r of
 * that range is sample `warmup + (r - offsets[s])` of the segment.
 */
struct DesignMatrix {
    MatrixXd phi;             ///< rows x n
    VectorXd y;               ///< rows
    std::vector<Index> offsets; ///< segments + 1 entries
    std::vector<int> modes;   ///< per-row true mode (0-based) when known
    Index warmup = 0;

    Index rows() const { return phi.rows(); }
    Index segments() const { return static_cast<Index>(offsets.size()) - 1; }
    Index segment_begin(Index s) const { return offsets[static_cast<std::size_t>(s)]; }
    Index segment_rows(Index s) const
    {
        return offsets[static_cast<std::size_t>(s) + 1] - offsets[static_cast<std::size_t>(s)];
    }
    Index sample_of_row(Index s, Index r) const { return warmup + (r - segment_begin(s)); }

    auto segment_phi(Index s) const { return phi.middleRows(segment_begin(s), segment_rows(s)); }
    auto segment_y(Index s) const { return y.segment(segment_begin(s), segment_rows(s)); }
    bool has_modes() const { return !modes.empty(); }
};

inline DesignMatrix build_design_matrix(const PolynomialBasis& basis, const TrajectoryDataset& data)
{
    const BasisConfig& cfg = basis.config();
    if (data.q != cfg.q)
        throw DimensionError("dataset has q=" + std::to_string(data.q) + " input channels, basis expects " +
                             std::to_string(cfg.q));
    if (data.segments.empty())
        throw DataError("dataset has no segments");
    const Index lag = cfg.max_lag();
    Index rows = 0;
    for (std::size_t s = 0; s < data.segments.size(); ++s) {
        const Index len = data.segments[s].size();
        if (len <= lag)
            throw DataError("segment " + std::to_string(s) + " has " + std::to_string(len) +
                            " samples; at least " + std::to_string(lag + 1) + " are needed for lag depth " +
                            std::to_string(lag));
        rows += len - lag;
    }

    DesignMatrix dm;
    dm.warmup = lag;
    dm.phi.resize(rows, basis.size());
    dm.y.resize(rows);
    dm.offsets.reserve(data.segments.size() + 1);
    const bool modes = data.has_modes();
    if (modes)
        dm.modes.reserve(static_cast<std::size_t>(rows));

    Index r = 0;
    for (const auto& seg : data.segments) {
        dm.offsets.push_back(r);
        for (Index t = lag; t < seg.size(); ++t, ++r) {
            const auto x = lagged_vector(cfg, seg.y, seg.u, t);
            basis.evaluate_into(x, dm.phi.row(r));
            dm.y(r) = seg.y(t);
            if (modes)
                dm.modes.push_back(seg.modes[static_cast<std::size_t>(t)]);
        }
    }
    dm.offsets.push_back(r);
    return dm;
}

} // namespace smnarx
