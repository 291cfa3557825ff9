// smnarx: simulate / fit / evaluate / grid-search / study
//
//   smnarx simulate --benchmark --n 12000 --seed 7 --out data.csv --truth-out truth.json
//   smnarx fit data.csv --benchmark-defaults --out model.json --report report.json
//   smnarx evaluate --model model.json --data data.csv --truth truth.json
//   smnarx grid-search data.csv --window 1e-6,1e1 --grid-size 15
//   smnarx study --benchmark --runs 20 --out-dir study/
//
// Exit codes: 0 ok, 1 computational failure, 2 usage or I/O error.

#include "smnarx/smnarx.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace smnarx;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> parse_list(const std::string& s, const char* flag)
{
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t p = s.find(',', start);
        const std::string tok = s.substr(start, p == std::string::npos ? std::string::npos : p - start);
        try {
            out.push_back(parse_double(tok, flag));
        } catch (const DataError&) {
            throw UsageError(std::string(flag) + ": cannot parse '" + tok + "'");
        }
        if (p == std::string::npos)
            break;
        start = p + 1;
    }
    return out;
}

struct SplitFlags {
    std::string split; // "train,val,test"
    Index batch_len = 200;

    bool given() const { return !split.empty(); }

    void check() const
    {
        if (batch_len < 1)
            throw UsageError("--batch-len must be >= 1");
        if (!given())
            return;
        const auto v = parse_list(split, "--split");
        if (v.size() != 3)
            throw UsageError("--split expects three counts: train,validation,test");
        for (double x : v)
            if (x < 0 || x != std::floor(x))
                throw UsageError("--split counts must be non-negative integers");
    }

    TrajectoryDataset apply(const TrajectoryDataset& data) const
    {
        const auto v = parse_list(split, "--split");
        return split_dataset(data, static_cast<Index>(v[0]), static_cast<Index>(v[1]), static_cast<Index>(v[2]),
                             batch_len);
    }
};

struct FitFlags {
    int na = 4, nb = 4, nd = 3;
    int modes = 3;
    double lambda = 5e-4;
    double upsilon = 5e-2;
    int restarts = 10;
    int max_iters = 100;
    double burn_in_tol = 1e-2;
    double converge_tol = 1e-6;
    std::uint64_t seed = 0;
    std::string variant = "em-l1-2s";
    int threads = default_threads();

    void add(CLI::App* app, bool with_variant = true)
    {
        app->add_option("--na", na, "output lags")->capture_default_str();
        app->add_option("--nb", nb, "input lags")->capture_default_str();
        app->add_option("--nd", nd, "polynomial degree")->capture_default_str();
        app->add_option("--modes", modes, "number of modes S")->capture_default_str();
        app->add_option("--lambda", lambda, "l1 penalty per unit of posterior mass")->capture_default_str();
        app->add_option("--upsilon", upsilon, "hard-threshold cutoff")->capture_default_str();
        app->add_option("--restarts", restarts, "random initializations")->capture_default_str();
        app->add_option("--max-iters", max_iters)->capture_default_str();
        app->add_option("--burn-in-tol", burn_in_tol)->capture_default_str();
        app->add_option("--converge-tol", converge_tol)->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        if (with_variant)
            app->add_option("--variant", variant, "em | em-l1 | em-l1-2s")->capture_default_str();
        app->add_option("--threads", threads, "worker threads (default: SMNARX_THREADS or core count)")
            ->capture_default_str();
    }

    FitConfig config(int q) const
    {
        FitConfig c;
        c.basis = BasisConfig{na, nb, q, nd};
        c.modes = modes;
        try {
            c.variant = variant_from_string(variant);
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        c.lambda = lambda;
        c.upsilon = upsilon;
        c.restarts = restarts;
        c.max_iters = max_iters;
        c.burn_in_tol = burn_in_tol;
        c.converge_tol = converge_tol;
        c.seed = seed;
        c.threads = threads;
        try {
            c.basis.validate();
            c.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        if (threads < 1)
            throw UsageError("--threads must be >= 1");
        return c;
    }
};

json manifest(const std::string& command, const std::vector<std::string>& argv, json config, json seeds,
              json inputs, json outputs, json timings)
{
    return json{{"command", command},     {"argv", argv},       {"version", SMNARX_VERSION},
                {"config", std::move(config)}, {"seeds", std::move(seeds)}, {"inputs", std::move(inputs)},
                {"outputs", std::move(outputs)}, {"timings", std::move(timings)}};
}

TrueSystem load_system(bool benchmark, const std::string& path)
{
    if (benchmark == !path.empty())
        throw UsageError("pass exactly one of --benchmark or --system FILE");
    if (benchmark)
        return benchmark_system();
    try {
        return system_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw DataError("invalid system JSON '" + path + "': " + e.what());
    } catch (const ConfigError& e) {
        throw DataError("invalid system JSON '" + path + "': " + e.what());
    }
}

TrajectoryDataset prepare_dataset(const std::string& path, const SplitFlags& split, bool benchmark_split)
{
    TrajectoryDataset data = read_dataset_csv(path);
    if (split.given())
        return split.apply(data);
    if (!data.has_split(Split::train) && benchmark_split)
        return split_dataset(data, 10000, 1000, 1000, 200);
    return data;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    bool benchmark = false;
    std::string system;
    Index n = 12000;
    std::uint64_t seed = 0;
    SplitFlags split;
    std::string out = "data.csv";
    std::string truth_out = "truth.json";
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv)
{
    a.split.check();
    const TrueSystem sys = load_system(a.benchmark, a.system);
    if (a.n <= sys.basis.config().max_lag())
        throw UsageError("--n " + std::to_string(a.n) + " must exceed the warm-up of " +
                         std::to_string(sys.basis.config().max_lag()) + " samples");
    const auto t0 = Clock::now();
    TrajectoryDataset data = simulate(sys, a.n, a.seed);
    const Index switches = count_switches(data);
    if (a.split.given())
        data = a.split.apply(data);
    write_text_file(a.out, dataset_to_csv(data));
    write_json_file(a.truth_out, system_to_json(sys));
    write_json_file(a.out + ".manifest.json",
                    manifest("simulate", argv,
                             {{"samples", a.n},
                              {"system", a.benchmark ? "benchmark" : a.system},
                              {"split", a.split.split},
                              {"batch_len", a.split.batch_len}},
                             {{"master", a.seed}}, json::object(),
                             {{"dataset", a.out}, {"truth", a.truth_out}},
                             {{"total_seconds", seconds_since(t0)}}));
    std::cout << "wrote " << a.n << " samples (" << switches << " mode switches) to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data;
    bool benchmark_defaults = false;
    SplitFlags split;
    FitFlags fit;
    std::string out = "model.json";
    std::string report = "report.json";
    std::string path_csv;
    std::string posterior_csv;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv)
{
    a.split.check();
    FitConfig cfg = a.fit.config(1);
    const TrajectoryDataset data = prepare_dataset(a.data, a.split, a.benchmark_defaults);
    if (!data.has_split(Split::train))
        throw UsageError("dataset '" + a.data + "' has no train split; pass --split or --benchmark-defaults");
    cfg.basis.q = data.q;
    cfg.record_snapshots = !a.path_csv.empty();

    const auto t0 = Clock::now();
    const FitReport rep = fit(data, cfg);
    const double fit_seconds = seconds_since(t0);

    write_json_file(a.out, model_to_json(rep.model));
    write_json_file(a.report, report_to_json(rep));
    json outputs{{"model", a.out}, {"report", a.report}};
    if (!a.path_csv.empty()) {
        write_text_file(a.path_csv, coefficient_path_csv(rep.snapshots));
        outputs["coefficient_path"] = a.path_csv;
    }
    if (!a.posterior_csv.empty()) {
        write_text_file(a.posterior_csv, posterior_csv(rep.model, data.subset(Split::train)));
        outputs["posterior"] = a.posterior_csv;
    }
    json seeds{{"master", cfg.seed}, {"restarts", json::array()}};
    for (int r = 0; r < cfg.restarts; ++r)
        seeds["restarts"].push_back(derive_seed(cfg.seed, "restart", static_cast<std::uint64_t>(r)));
    write_json_file(a.out + ".manifest.json",
                    manifest("fit", argv, config_to_json(cfg), seeds, {{"dataset", a.data}}, outputs,
                             {{"fit_seconds", fit_seconds}, {"total_seconds", seconds_since(t0)}}));

    std::cout << "restart " << rep.selected_restart << " selected: loglik " << format_double(rep.final_loglik)
              << ", " << rep.iterations << " iterations" << (rep.converged ? "" : " (not converged)")
              << ", sigma2 " << rep.model.sigma2 << "\nnonzero per mode:";
    for (int s : rep.support_sizes)
        std::cout << ' ' << s;
    std::cout << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string truth;
    SplitFlags split;
    std::string out = "metrics.json";
    std::string trace;
    std::string posterior;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv)
{
    a.split.check();
    const auto t0 = Clock::now();
    SmnarxModel model;
    try {
        model = model_from_json(read_json_file(a.model));
    } catch (const json::exception& e) {
        throw DataError("invalid model JSON '" + a.model + "': " + e.what());
    } catch (const ConfigError& e) {
        throw DataError("invalid model JSON '" + a.model + "': " + e.what());
    }
    std::optional<TrueSystem> truth;
    if (!a.truth.empty())
        truth = load_system(false, a.truth);
    TrajectoryDataset data = prepare_dataset(a.data, a.split, false);
    // an untagged file is scored as a single test stretch
    bool tagged = false;
    for (const auto& s : data.segments)
        tagged = tagged || s.split != Split::none;
    if (!tagged)
        for (auto& s : data.segments)
            s.split = Split::test;

    const EvaluationReport ev = evaluate(model, data, truth ? &*truth : nullptr);
    json m{{"rmse_validation", optional_json(ev.rmse_validation)},
           {"rmse_test", optional_json(ev.rmse_test)},
           {"n_feat", ev.n_feat},
           {"permutation", ev.permutation}};
    if (truth) {
        m["f_theta"] = optional_json(ev.f_theta);
        m["f_a"] = optional_json(ev.f_a);
        m["f_s_train"] = optional_json(ev.f_s_train);
        m["f_s_test"] = optional_json(ev.f_s_test);
        m["exact_support"] = *ev.exact_support;
    }
    write_json_file(a.out, m);
    json outputs{{"metrics", a.out}};
    if (!a.trace.empty()) {
        write_text_file(a.trace, mode_trace_csv(ev.test_trace));
        outputs["mode_trace"] = a.trace;
    }
    if (!a.posterior.empty()) {
        write_text_file(a.posterior, posterior_csv(ev.matched, data));
        outputs["posterior"] = a.posterior;
    }
    write_json_file(a.out + ".manifest.json",
                    manifest("evaluate", argv, {{"split", a.split.split}, {"batch_len", a.split.batch_len}},
                             json::object(), {{"model", a.model}, {"dataset", a.data}, {"truth", a.truth}}, outputs,
                             {{"total_seconds", seconds_since(t0)}}));
    std::cout << m.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- grid-search

struct GridArgs {
    std::string data;
    bool benchmark_defaults = false;
    SplitFlags split;
    FitFlags fit;
    std::string window = "1e-6,1e1";
    int grid_size = 15;
    std::string lambdas;
    int patience = 3;
    int grid_restarts = 1;
    std::string out = "grid.csv";
    std::string best = "best_lambda.json";
};

int cmd_grid_search(const GridArgs& a, const std::vector<std::string>& argv)
{
    a.split.check();
    FitConfig cfg = a.fit.config(1);
    std::vector<double> grid;
    if (!a.lambdas.empty()) {
        grid = parse_list(a.lambdas, "--lambdas");
        for (double l : grid)
            if (!(l >= 0.0))
                throw UsageError("--lambdas entries must be >= 0");
    } else {
        const auto w = parse_list(a.window, "--window");
        if (w.size() != 2)
            throw UsageError("--window expects lo,hi");
        if (!(w[0] > 0.0) || !(w[1] > 0.0))
            throw UsageError("--window bounds must be positive");
        if (w[0] > w[1])
            throw UsageError("--window lo must not exceed hi");
        if (a.grid_size < 1)
            throw UsageError("--grid-size must be >= 1");
        grid = descending_grid(w[0], w[1], a.grid_size);
    }
    if (a.patience < 1 || a.grid_restarts < 1)
        throw UsageError("--patience and --restarts must be >= 1");

    const TrajectoryDataset data = prepare_dataset(a.data, a.split, a.benchmark_defaults);
    if (!data.has_split(Split::validation))
        throw UsageError("dataset '" + a.data + "' has an empty validation split");
    if (!data.has_split(Split::train))
        throw UsageError("dataset '" + a.data + "' has no train split");
    cfg.basis.q = data.q;

    const auto t0 = Clock::now();
    const PolynomialBasis basis(cfg.basis);
    const DesignMatrix train = build_design_matrix(basis, data.subset(Split::train));
    const DesignMatrix val = build_design_matrix(basis, data.subset(Split::validation));
    const GridResult res = grid_search_lambda(train, val, basis, cfg, grid, GridOptions{a.patience, a.grid_restarts});

    std::ostringstream os;
    os << "lambda,rmse,train_loglik,iterations,ok\n";
    for (const auto& r : res.rows)
        os << format_double(r.lambda) << ',' << (r.ok ? format_double(r.rmse) : "") << ','
           << (r.ok ? format_double(r.train_loglik) : "") << ',' << r.iterations << ',' << (r.ok ? 1 : 0) << "\n";
    write_text_file(a.out, os.str());
    json best{{"best_lambda", res.best_lambda},
              {"best_rmse", res.best_rmse},
              {"points_evaluated", res.rows.size()},
              {"stopped_early", res.stopped_early}};
    write_json_file(a.best, best);
    json c = config_to_json(cfg);
    c["variant"] = "em-l1";
    c["restarts"] = a.grid_restarts;
    c["grid"] = grid;
    c["patience"] = a.patience;
    write_json_file(a.out + ".manifest.json",
                    manifest("grid-search", argv, c, {{"master", cfg.seed}}, {{"dataset", a.data}},
                             {{"table", a.out}, {"best", a.best}}, {{"total_seconds", seconds_since(t0)}}));

    for (const auto& r : res.rows) {
        std::cout << "lambda " << r.lambda << "  ";
        if (r.ok)
            std::cout << "rmse " << r.rmse << "\n";
        else
            std::cout << "failed: " << r.message << "\n";
    }
    std::cout << "best lambda " << res.best_lambda << " (rmse " << res.best_rmse << ")\n";
    bool any = false;
    for (const auto& r : res.rows)
        any = any || r.ok;
    return any ? 0 : kExitFailure;
}

// ---------------------------------------------------------------- study

struct StudyArgs {
    bool benchmark = false;
    std::string system;
    int runs = 100;
    Index samples = 12000;
    SplitFlags split{"10000,1000,1000", 200};
    FitFlags fit;
    std::string out_dir = "study";
};

int cmd_study(const StudyArgs& a, const std::vector<std::string>& argv)
{
    if (a.runs < 1)
        throw UsageError("--runs must be >= 1");
    a.split.check();
    const auto counts = parse_list(a.split.split, "--split");
    const TrueSystem truth = load_system(a.benchmark, a.system);
    FitConfig cfg = a.fit.config(truth.basis.config().q);
    if (cfg.basis != truth.basis.config())
        throw UsageError("model orders do not match the true system's basis");
    if (a.samples <= truth.basis.config().max_lag())
        throw UsageError("--samples must exceed the warm-up");

    StudyOptions opts;
    opts.runs = a.runs;
    opts.samples = a.samples;
    opts.train = static_cast<Index>(counts[0]);
    opts.validation = static_cast<Index>(counts[1]);
    opts.test = static_cast<Index>(counts[2]);
    opts.batch_len = a.split.batch_len;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    if (opts.train + opts.validation + opts.test > opts.samples)
        throw UsageError("--split counts exceed --samples");
    cfg.threads = 1;

    const auto t0 = Clock::now();
    const StudyResult res = run_study(truth, cfg, opts);
    const double total = seconds_since(t0);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    const Index S = truth.modes();

    std::ostringstream per;
    per << "run,sim_seed,redraws,fit_seed,ok,f_s_train,f_s_test,f_a,f_theta,rmse_validation,rmse_test,sigma2,final_loglik,"
           "iterations,converged,exact_support";
    for (Index s = 1; s <= S; ++s)
        per << ",n_feat_" << s;
    for (Index s = 1; s <= S; ++s)
        per << ",n_avail_" << s;
    per << ",message\n";
    for (const auto& r : res.runs) {
        per << r.index << ',' << r.sim_seed << ',' << r.redraws << ',' << r.fit_seed << ',' << (r.ok ? 1 : 0);
        if (r.ok) {
            for (double v : {r.f_s_train, r.f_s_test, r.f_a, r.f_theta, r.rmse_validation, r.rmse_test, r.sigma2,
                             r.final_loglik})
                per << ',' << format_double(v);
            per << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << (r.exact_support ? 1 : 0);
            for (int v : r.n_feat)
                per << ',' << v;
            for (int v : r.n_feat_available)
                per << ',' << v;
            per << ",\n";
        } else {
            per << std::string(11 + 2 * static_cast<std::size_t>(S), ',');
            std::string msg = r.message;
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            std::replace(msg.begin(), msg.end(), ',', ';');
            per << ',' << msg << "\n";
        }
    }
    write_text_file((dir / "per_run.csv").string(), per.str());

    const PolynomialBasis& basis = truth.basis;
    std::ostringstream t3;
    t3 << "mode,term_index,term,true_value,mean,std,median\n";
    for (std::size_t s = 0; s < res.true_support.size(); ++s)
        for (std::size_t i = 0; i < res.true_support[s].size(); ++i) {
            const Index term = res.true_support[s][i];
            const SummaryStat& st = res.coefficient_stats[s][i];
            t3 << s + 1 << ',' << term << ',' << basis.term_name(term) << ',' << format_double(res.true_values[s][i])
               << ',' << format_double(st.mean) << ',' << format_double(st.std) << ',' << format_double(st.median)
               << "\n";
        }
    t3 << "sigma2,,," << format_double(truth.noise_std * truth.noise_std) << ',' << format_double(res.sigma2.mean)
       << ',' << format_double(res.sigma2.std) << ',' << format_double(res.sigma2.median) << "\n";
    write_text_file((dir / "table3.csv").string(), t3.str());

    std::ostringstream t2;
    t2 << "variant,statistic,f_s_train,f_s_test,f_a,f_theta,rmse_validation,rmse_test,exact_support_rate\n";
    auto row = [&](const char* name, auto get) {
        t2 << to_string(cfg.variant) << ',' << name;
        for (const SummaryStat* st :
             {&res.f_s_train, &res.f_s_test, &res.f_a, &res.f_theta, &res.rmse_validation, &res.rmse_test})
            t2 << ',' << format_double(get(*st));
        t2 << ',' << format_double(res.exact_support_rate) << "\n";
    };
    row("mean", [](const SummaryStat& s) { return s.mean; });
    row("std", [](const SummaryStat& s) { return s.std; });
    row("median", [](const SummaryStat& s) { return s.median; });
    write_text_file((dir / "table2.csv").string(), t2.str());

    json timings{{"total_seconds", total}, {"run_seconds", json::array()}};
    for (const auto& r : res.runs)
        timings["run_seconds"].push_back(r.seconds);
    json seeds{{"master", cfg.seed}, {"runs", json::array()}};
    for (const auto& r : res.runs)
        seeds["runs"].push_back({{"simulate", r.sim_seed}, {"redraws", r.redraws}, {"fit", r.fit_seed}});
    json c = config_to_json(cfg);
    c["runs"] = a.runs;
    c["samples"] = a.samples;
    c["split"] = a.split.split;
    c["batch_len"] = a.split.batch_len;
    c["system"] = a.benchmark ? "benchmark" : a.system;
    write_json_file((dir / "manifest.json").string(),
                    manifest("study", argv, c, seeds, json::object(),
                             {{"per_run", (dir / "per_run.csv").string()},
                              {"table2", (dir / "table2.csv").string()},
                              {"table3", (dir / "table3.csv").string()}},
                             timings));

    std::cout << res.runs.size() - static_cast<std::size_t>(res.failures) << "/" << res.runs.size()
              << " runs succeeded\n"
              << "median F_s train " << res.f_s_train.median << ", test " << res.f_s_test.median << ", F_A "
              << res.f_a.median << ", F_theta " << res.f_theta.median << "\n"
              << "exact support in " << 100.0 * res.exact_support_rate << "% of runs\n";
    return res.failures == static_cast<int>(res.runs.size()) ? kExitFailure : 0;
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Switched Markov polynomial NARX identification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SMNARX_VERSION);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "simulate a switched system");
    s->add_flag("--benchmark", sim.benchmark, "built-in three-mode benchmark system");
    s->add_option("--system", sim.system, "true-system JSON");
    s->add_option("--n", sim.n, "number of samples")->capture_default_str();
    s->add_option("--seed", sim.seed)->capture_default_str();
    s->add_option("--split", sim.split.split, "train,validation,test sample counts");
    s->add_option("--batch-len", sim.split.batch_len)->capture_default_str();
    s->add_option("--out", sim.out, "dataset CSV")->capture_default_str();
    s->add_option("--truth-out", sim.truth_out, "true-system JSON")->capture_default_str();

    FitArgs fa;
    auto* f = app.add_subcommand("fit", "estimate a model with EM");
    f->add_option("data", fa.data, "dataset CSV")->required();
    f->add_flag("--benchmark-defaults", fa.benchmark_defaults,
                "benchmark settings; untagged data is split 10000,1000,1000 with batches of 200");
    f->add_option("--split", fa.split.split, "train,validation,test sample counts");
    f->add_option("--batch-len", fa.split.batch_len)->capture_default_str();
    fa.fit.add(f);
    f->add_option("--out", fa.out, "model JSON")->capture_default_str();
    f->add_option("--report", fa.report, "fit report JSON")->capture_default_str();
    f->add_option("--path", fa.path_csv, "coefficient path CSV");
    f->add_option("--posterior", fa.posterior_csv, "posterior CSV on the training segments");

    EvaluateArgs ea;
    auto* e = app.add_subcommand("evaluate", "score a model on a dataset");
    e->add_option("--model", ea.model, "model JSON")->required();
    e->add_option("--data", ea.data, "dataset CSV")->required();
    e->add_option("--truth", ea.truth, "true-system JSON");
    e->add_option("--split", ea.split.split, "train,validation,test sample counts");
    e->add_option("--batch-len", ea.split.batch_len)->capture_default_str();
    e->add_option("--out", ea.out, "metrics JSON")->capture_default_str();
    e->add_option("--trace", ea.trace, "test mode-trace CSV");
    e->add_option("--posterior", ea.posterior, "posterior CSV for all segments");

    GridArgs ga;
    auto* g = app.add_subcommand("grid-search", "validation search over lambda");
    g->add_option("data", ga.data, "dataset CSV")->required();
    g->add_flag("--benchmark-defaults", ga.benchmark_defaults, "split untagged data 10000,1000,1000 / 200");
    g->add_option("--split", ga.split.split, "train,validation,test sample counts");
    g->add_option("--batch-len", ga.split.batch_len)->capture_default_str();
    ga.fit.add(g, false);
    g->remove_option(g->get_option("--restarts"));
    g->remove_option(g->get_option("--upsilon"));
    g->add_option("--restarts", ga.grid_restarts, "restarts per grid point")->capture_default_str();
    g->add_option("--window", ga.window, "lo,hi")->capture_default_str();
    g->add_option("--grid-size", ga.grid_size)->capture_default_str();
    g->add_option("--lambdas", ga.lambdas, "explicit comma-separated lambda list (overrides --window)");
    g->add_option("--patience", ga.patience)->capture_default_str();
    g->add_option("--out", ga.out, "lambda table CSV")->capture_default_str();
    g->add_option("--best", ga.best, "best-lambda JSON")->capture_default_str();

    StudyArgs sa;
    auto* st = app.add_subcommand("study", "repeated simulate / fit / evaluate");
    st->add_flag("--benchmark", sa.benchmark, "built-in benchmark system");
    st->add_option("--system", sa.system, "true-system JSON");
    st->add_option("--runs", sa.runs)->capture_default_str();
    st->add_option("--samples", sa.samples)->capture_default_str();
    st->add_option("--split", sa.split.split)->capture_default_str();
    st->add_option("--batch-len", sa.split.batch_len)->capture_default_str();
    sa.fit.add(st);
    st->add_option("--out-dir", sa.out_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitUsage;
    }

    try {
        if (s->parsed())
            return cmd_simulate(sim, args);
        if (f->parsed())
            return cmd_fit(fa, args);
        if (e->parsed())
            return cmd_evaluate(ea, args);
        if (g->parsed())
            return cmd_grid_search(ga, args);
        return cmd_study(sa, args);
    } catch (const UsageError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const DataError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const Error& ex) {
        std::cerr << "failed: " << ex.what() << "\n";
        return kExitFailure;
    }
}
