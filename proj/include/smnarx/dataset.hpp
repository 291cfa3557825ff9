#pragma once

#include "smnarx/common.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace smnarx {

enum class Split { none, train, validation, test };

inline std::string_view to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::none: break;
    }
    return "none";
}

inline Split split_from_string(std::string_view s)
{
    if (s == "train")
        return Split::train;
    if (s == "validation" || s == "val")
        return Split::validation;
    if (s == "test")
        return Split::test;
    if (s == "none" || s.empty())
        return Split::none;
    throw DataError("unknown split tag '" + std::string(s) + "'");
}

/// One contiguous record of (u_k, y_k) samples.
struct Segment {
    Index start = 1; ///< global index k of the first sample
    Split split = Split::none;
    MatrixXd u;             ///< T x q
    VectorXd y;             ///< T
    std::vector<int> modes; ///< 0-based true modes, empty when unknown
    bool short_batch = false;

    Index size() const { return y.size(); }
    bool has_modes() const { return !modes.empty(); }
};

struct TrajectoryDataset {
    int q = 1;
    std::vector<Segment> segments;

    Index total_samples() const
    {
        Index n = 0;
        for (const auto& s : segments)
            n += s.size();
        return n;
    }

    bool has_modes() const
    {
        if (segments.empty())
            return false;
        for (const auto& s : segments)
            if (!s.has_modes())
                return false;
        return true;
    }

    bool has_split(Split which) const
    {
        for (const auto& s : segments)
            if (s.split == which)
                return true;
        return false;
    }

    /// Segments carrying the given tag, order preserved.
    TrajectoryDataset subset(Split which) const
    {
        TrajectoryDataset out;
        out.q = q;
        for (const auto& s : segments)
            if (s.split == which)
                out.segments.push_back(s);
        return out;
    }

    void validate() const
    {
        if (q < 1)
            throw DataError("dataset input dimension must be >= 1");
        for (const auto& s : segments) {
            if (s.u.rows() != s.y.size() || s.u.cols() != q)
                throw DimensionError("segment input block does not match its output length / q");
            if (s.has_modes() && static_cast<Index>(s.modes.size()) != s.size())
                throw DimensionError("segment mode labels do not match its length");
            for (int m : s.modes)
                if (m < 0)
                    throw DataError("true modes must be >= 1");
        }
    }
};

/**
 * Concatenates the samples of `data` in order and re-cuts them: the first
 * `train` samples become training segments of `batch_len` (a shorter tail
 * batch is kept and flagged), the next `val` samples one validation segment
 * and the following `test` samples one test segment.
 */
inline TrajectoryDataset split_dataset(const TrajectoryDataset& data, Index train, Index val, Index test,
                                       Index batch_len)
{
    if (batch_len <= 0)
        throw ConfigError("batch length must be positive");
    if (train < 0 || val < 0 || test < 0)
        throw ConfigError("split counts must be non-negative");
    const Index total = data.total_samples();
    if (train + val + test > total)
        throw ConfigError("split counts " + std::to_string(train) + "+" + std::to_string(val) + "+" +
                          std::to_string(test) + " exceed the " + std::to_string(total) + " available samples");

    const int q = data.q;
    const bool modes = data.has_modes();
    MatrixXd u(total, q);
    VectorXd y(total);
    std::vector<int> z;
    std::vector<Index> k(static_cast<std::size_t>(total));
    Index pos = 0;
    for (const auto& s : data.segments) {
        u.middleRows(pos, s.size()) = s.u;
        y.segment(pos, s.size()) = s.y;
        if (modes)
            z.insert(z.end(), s.modes.begin(), s.modes.end());
        for (Index i = 0; i < s.size(); ++i)
            k[static_cast<std::size_t>(pos + i)] = s.start + i;
        pos += s.size();
    }

    TrajectoryDataset out;
    out.q = q;
    auto cut = [&](Index from, Index len, Split tag, bool flagged) {
        Segment seg;
        seg.start = k[static_cast<std::size_t>(from)];
        seg.split = tag;
        seg.u = u.middleRows(from, len);
        seg.y = y.segment(from, len);
        if (modes)
            seg.modes.assign(z.begin() + from, z.begin() + from + len);
        seg.short_batch = flagged;
        out.segments.push_back(std::move(seg));
    };
    for (Index from = 0; from < train; from += batch_len) {
        const Index len = std::min(batch_len, train - from);
        cut(from, len, Split::train, len < batch_len);
    }
    if (val > 0)
        cut(train, val, Split::validation, false);
    if (test > 0)
        cut(train + val, test, Split::test, false);
    return out;
}

} // namespace smnarx
