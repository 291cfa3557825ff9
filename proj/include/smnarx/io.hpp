#pragma once

// File formats: model / true-system / fit-report JSON, dataset and diagnostic CSVs.

#include "smnarx/dataset.hpp"
#include "smnarx/em_estimator.hpp"
#include "smnarx/metrics.hpp"
#include "smnarx/model.hpp"
#include "smnarx/poly_basis.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace smnarx {

using json = nlohmann::json;

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s, std::string_view what)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end)
        throw DataError("cannot parse " + std::string(what) + " value '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, std::string_view what)
{
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end)
        throw DataError("cannot parse " + std::string(what) + " value '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------- basis / model JSON

inline json basis_to_json(const PolynomialBasis& b)
{
    const auto& c = b.config();
    return json{{"config", {{"n_a", c.n_a}, {"n_b", c.n_b}, {"q", c.q}, {"n_d", c.n_d}}}, {"terms", b.terms()}};
}

inline PolynomialBasis basis_from_json(const json& j)
{
    const auto& c = j.at("config");
    PolynomialBasis b(BasisConfig{c.at("n_a").get<int>(), c.at("n_b").get<int>(), c.at("q").get<int>(),
                                  c.at("n_d").get<int>()});
    if (j.contains("terms") && j.at("terms").get<std::vector<Exponents>>() != b.terms())
        throw ConfigError("basis terms in file do not match the enumeration for its config");
    return b;
}

inline json matrix_to_json(const MatrixXd& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j)
            r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline MatrixXd matrix_from_json(const json& j)
{
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.front().size()) : 0;
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw DataError("ragged matrix in JSON");
        for (Index k = 0; k < c; ++k)
            m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return m;
}

inline json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline VectorXd vector_from_json(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

/// Coefficients as sparse (index, term, value) triples per mode.
inline json theta_to_json(const PolynomialBasis& basis, const MatrixXd& theta)
{
    json modes = json::array();
    for (Index s = 0; s < theta.rows(); ++s) {
        json entries = json::array();
        for (Index i = 0; i < theta.cols(); ++i)
            if (theta(s, i) != 0.0)
                entries.push_back({{"index", i}, {"term", basis.term_name(i)}, {"value", theta(s, i)}});
        modes.push_back(std::move(entries));
    }
    return modes;
}

inline MatrixXd theta_from_json(const json& j, Index n)
{
    MatrixXd theta = MatrixXd::Zero(static_cast<Index>(j.size()), n);
    for (std::size_t s = 0; s < j.size(); ++s)
        for (const auto& e : j[s]) {
            const Index i = e.at("index").get<Index>();
            if (i < 0 || i >= n)
                throw DataError("coefficient index " + std::to_string(i) + " outside the basis");
            theta(static_cast<Index>(s), i) = e.at("value").get<double>();
        }
    return theta;
}

inline json model_to_json(const SmnarxModel& m)
{
    return json{{"format", "smnarx-model"},
                {"version", 1},
                {"basis", basis_to_json(m.basis)},
                {"modes", m.modes()},
                {"theta", theta_to_json(m.basis, m.theta)},
                {"sigma2", m.sigma2},
                {"A", matrix_to_json(m.A)},
                {"Pi", vector_to_json(m.Pi)}};
}

inline SmnarxModel model_from_json(const json& j)
{
    SmnarxModel m;
    m.basis = basis_from_json(j.at("basis"));
    m.theta = theta_from_json(j.at("theta"), m.basis.size());
    if (j.contains("modes") && j.at("modes").get<Index>() != m.theta.rows())
        throw DataError("'modes' does not match the number of coefficient rows");
    m.sigma2 = j.at("sigma2").get<double>();
    m.A = matrix_from_json(j.at("A"));
    m.Pi = vector_from_json(j.at("Pi"));
    m.validate(1e-8);
    return m;
}

inline json system_to_json(const TrueSystem& sys)
{
    json j = model_to_json(sys.as_model());
    j["format"] = "smnarx-system";
    j["sigma2"] = sys.noise_std * sys.noise_std;
    j["noise_std"] = sys.noise_std;
    j["input_law"] = {{"type", "uniform"}, {"lo", sys.input_law.lo}, {"hi", sys.input_law.hi}};
    return j;
}

inline TrueSystem system_from_json(const json& j)
{
    TrueSystem sys;
    sys.basis = basis_from_json(j.at("basis"));
    sys.theta = theta_from_json(j.at("theta"), sys.basis.size());
    sys.A = matrix_from_json(j.at("A"));
    sys.Pi = vector_from_json(j.at("Pi"));
    sys.noise_std = j.contains("noise_std") ? j.at("noise_std").get<double>() : std::sqrt(j.at("sigma2").get<double>());
    if (j.contains("input_law")) {
        const auto& law = j.at("input_law");
        if (law.value("type", std::string("uniform")) != "uniform")
            throw ConfigError("only uniform input laws are supported");
        sys.input_law.lo = law.at("lo").get<std::vector<double>>();
        sys.input_law.hi = law.at("hi").get<std::vector<double>>();
    } else {
        sys.input_law.lo.assign(static_cast<std::size_t>(sys.basis.config().q), -1.0);
        sys.input_law.hi.assign(static_cast<std::size_t>(sys.basis.config().q), 1.0);
    }
    sys.validate();
    return sys;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("invalid JSON in '" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out)
        throw DataError("write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- fit report JSON

inline json config_to_json(const FitConfig& c)
{
    json j{{"basis", {{"n_a", c.basis.n_a}, {"n_b", c.basis.n_b}, {"q", c.basis.q}, {"n_d", c.basis.n_d}}},
           {"modes", c.modes},
           {"variant", to_string(c.variant)},
           {"lambda", c.lambda},
           {"upsilon", c.upsilon},
           {"burn_in_tol", c.burn_in_tol},
           {"converge_tol", c.converge_tol},
           {"max_iters", c.max_iters},
           {"restarts", c.restarts},
           {"init_range", {c.init_lo, c.init_hi}},
           {"var_floor", c.var_floor},
           {"seed", c.seed},
           {"solver", {{"coord_tol", c.solver.coord_tol}, {"max_sweeps", c.solver.max_sweeps}}}};
    return j;
}

inline json report_to_json(const FitReport& r)
{
    json restarts = json::array();
    for (const auto& s : r.restarts)
        restarts.push_back({{"index", s.index},
                            {"final_loglik", s.collapsed ? json(nullptr) : json(s.final_loglik)},
                            {"iterations", s.iterations},
                            {"phase_switch_iteration", s.phase_switch_iteration},
                            {"converged", s.converged},
                            {"collapsed", s.collapsed},
                            {"message", s.message}});
    return json{{"format", "smnarx-fit-report"},
                {"model", model_to_json(r.model)},
                {"loglik_trace", r.loglik_trace},
                {"final_loglik", r.final_loglik},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"phase_switch_iteration", r.phase_switch_iteration},
                {"support_sizes", r.support_sizes},
                {"active_sizes", r.active_sizes},
                {"selected_restart", r.selected_restart},
                {"restarts", restarts},
                {"config", config_to_json(r.config)}};
}

// ---------------------------------------------------------------- dataset CSV

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t p = line.find(',', start);
        std::string_view f = line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start);
        while (!f.empty() && (f.back() == '\r' || f.back() == ' '))
            f.remove_suffix(1);
        while (!f.empty() && f.front() == ' ')
            f.remove_prefix(1);
        out.push_back(f);
        if (p == std::string_view::npos)
            break;
        start = p + 1;
    }
    return out;
}

} // namespace detail

/// Header `k,segment,split,u1..uq,y[,z]`, one row per sample, z 1-based.
inline std::string dataset_to_csv(const TrajectoryDataset& data, bool with_modes = true)
{
    const bool modes = with_modes && data.has_modes();
    std::ostringstream os;
    os << "k,segment,split";
    for (int c = 1; c <= data.q; ++c)
        os << ",u" << c;
    os << ",y";
    if (modes)
        os << ",z";
    os << "\n";
    for (std::size_t s = 0; s < data.segments.size(); ++s) {
        const auto& seg = data.segments[s];
        for (Index t = 0; t < seg.size(); ++t) {
            os << seg.start + t << ',' << s << ',' << to_string(seg.split);
            for (int c = 0; c < data.q; ++c)
                os << ',' << format_double(seg.u(t, c));
            os << ',' << format_double(seg.y(t));
            if (modes)
                os << ',' << seg.modes[static_cast<std::size_t>(t)] + 1;
            os << "\n";
        }
    }
    return os.str();
}

inline TrajectoryDataset dataset_from_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw DataError("dataset CSV is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 5 || header[0] != "k" || header[1] != "segment" || header[2] != "split")
        throw DataError("dataset CSV header must start with k,segment,split");
    int q = 0;
    while (3 + q < static_cast<int>(header.size()) && header[3 + static_cast<std::size_t>(q)] ==
                                                          "u" + std::to_string(q + 1))
        ++q;
    if (q < 1)
        throw DataError("dataset CSV needs at least one input column u1");
    const std::size_t ycol = 3 + static_cast<std::size_t>(q);
    if (ycol >= header.size() || header[ycol] != "y")
        throw DataError("dataset CSV is missing the y column after the inputs");
    const bool modes = header.size() == ycol + 2;
    if (modes && header[ycol + 1] != "z")
        throw DataError("unexpected trailing column '" + std::string(header[ycol + 1]) + "'");
    if (header.size() > ycol + 2)
        throw DataError("dataset CSV has too many columns");

    struct Builder {
        long long id = -1;
        Split split = Split::none;
        Index start = 0;
        Index last_k = 0;
        std::vector<double> u, y;
        std::vector<int> z;
    };
    std::vector<Builder> segs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(f.size()));
        const Index k = parse_int(f[0], "k");
        const long long seg = parse_int(f[1], "segment");
        const Split split = split_from_string(f[2]);
        if (segs.empty() || segs.back().id != seg) {
            for (const auto& b : segs)
                if (b.id == seg)
                    throw DataError("line " + std::to_string(lineno) + ": segment " + std::to_string(seg) +
                                    " is not contiguous");
            Builder b;
            b.id = seg;
            b.split = split;
            b.start = k;
            b.last_k = k - 1;
            segs.push_back(std::move(b));
        }
        Builder& b = segs.back();
        if (k != b.last_k + 1)
            throw DataError("line " + std::to_string(lineno) + ": sample indices within a segment must be consecutive");
        if (split != b.split)
            throw DataError("line " + std::to_string(lineno) + ": split tag changes inside a segment");
        b.last_k = k;
        for (int c = 0; c < q; ++c)
            b.u.push_back(parse_double(f[3 + static_cast<std::size_t>(c)], "u"));
        b.y.push_back(parse_double(f[ycol], "y"));
        if (modes) {
            const long long z = parse_int(f[ycol + 1], "z");
            if (z < 1)
                throw DataError("line " + std::to_string(lineno) + ": modes are numbered from 1");
            b.z.push_back(static_cast<int>(z - 1));
        }
    }
    TrajectoryDataset data;
    data.q = q;
    for (auto& b : segs) {
        Segment s;
        s.start = b.start;
        s.split = b.split;
        const Index T = static_cast<Index>(b.y.size());
        s.y = Eigen::Map<const VectorXd>(b.y.data(), T);
        s.u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(b.u.data(), T, q);
        s.modes = std::move(b.z);
        data.segments.push_back(std::move(s));
    }
    data.validate();
    return data;
}

inline TrajectoryDataset read_dataset_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open dataset '" + path + "'");
    return dataset_from_csv(in);
}

// ---------------------------------------------------------------- diagnostic CSVs

/// `k,segment,gamma_1..gamma_S,f_1..f_S,yhat` for every usable row.
inline std::string posterior_csv(const SmnarxModel& model, const TrajectoryDataset& data)
{
    const DesignMatrix dm = build_design_matrix(model.basis, data);
    const Index S = model.modes();
    std::ostringstream os;
    os << "k,segment";
    for (Index s = 1; s <= S; ++s)
        os << ",gamma_" << s;
    for (Index s = 1; s <= S; ++s)
        os << ",f_" << s;
    os << ",yhat\n";
    for (Index g = 0; g < dm.segments(); ++g) {
        const SegmentPosterior post = forward_backward(model, dm.segment_phi(g), dm.segment_y(g));
        const FilterResult fr = filter_sequence(model, dm.segment_phi(g), dm.segment_y(g));
        const auto& seg = data.segments[static_cast<std::size_t>(g)];
        for (Index r = 0; r < post.length(); ++r) {
            os << seg.start + dm.warmup + r << ',' << g;
            for (Index s = 0; s < S; ++s)
                os << ',' << format_double(post.gamma(r, s));
            for (Index s = 0; s < S; ++s)
                os << ',' << format_double(fr.f(r, s));
            os << ',' << format_double(fr.yhat(r)) << "\n";
        }
    }
    return os.str();
}

/// `k,segment,true_mode,predicted_mode` (1-based modes, empty true_mode when unknown).
inline std::string mode_trace_csv(const std::vector<ModeTraceRow>& trace)
{
    std::ostringstream os;
    os << "k,segment,true_mode,predicted_mode\n";
    for (const auto& r : trace) {
        os << r.k << ',' << r.segment << ',';
        if (r.true_mode >= 0)
            os << r.true_mode + 1;
        os << ',' << r.predicted_mode + 1 << "\n";
    }
    return os.str();
}

/// `iteration,mode,term,value` for every term that is nonzero in at least one snapshot of its mode.
inline std::string coefficient_path_csv(const std::vector<CoefficientSnapshot>& snaps)
{
    std::ostringstream os;
    os << "iteration,mode,term,value\n";
    if (snaps.empty())
        return os.str();
    const Index S = snaps.front().theta.rows();
    const Index n = snaps.front().theta.cols();
    for (Index s = 0; s < S; ++s) {
        std::vector<Index> used;
        for (Index i = 0; i < n; ++i)
            for (const auto& sn : snaps)
                if (sn.theta(s, i) != 0.0) {
                    used.push_back(i);
                    break;
                }
        for (const auto& sn : snaps)
            for (Index i : used)
                os << sn.iteration << ',' << s + 1 << ',' << i << ',' << format_double(sn.theta(s, i)) << "\n";
    }
    return os.str();
}

} // namespace smnarx
