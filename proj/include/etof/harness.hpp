#pragma once

// Experiment orchestration: configuration, run-matrix execution with
// append-only persistence and resume, convergence bands, block matrices for
// the statistics pipeline, and markdown/CSV reports.
//
// Output directory layout:
//   config.json           normalized configuration
//   manifests/<suite>.json suite manifests
//   results.csv           algorithm,function,dim,run,seed,final_fitness
//   curves.jsonl          one record per run with its best-so-far curve
//   timings.csv           wall-clock seconds per run (never used in statistics)
//   failures.csv          runs that raised, with the reason
//
// results.csv and curves.jsonl are appended in completion order while the
// experiment runs and rewritten in canonical (algorithm, problem, run) order
// once every run is done, so two executions with the same configuration
// produce byte-identical files regardless of worker count or interruptions.

#include "etof/baselines.hpp"
#include "etof/benchmarks.hpp"
#include "etof/core.hpp"
#include "etof/diagnostics.hpp"
#include "etof/eto.hpp"
#include "etof/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace etof::harness {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct AlgorithmConfig {
    std::string name;   // registry key: ETO, PSO, RandomSearch
    std::string label;  // column name in results; defaults to name
    json params = json::object();
};

/// Per-suite budget and population size; unset fields use the global value.
struct SuiteOverride {
    std::optional<std::size_t> budget;
    std::optional<std::size_t> n_agents;
};

struct ExperimentConfig {
    std::vector<bench::SuiteSpec> suites;
    std::map<std::string, SuiteOverride> overrides;
    std::vector<AlgorithmConfig> algorithms;
    std::size_t n_runs = 25;
    std::size_t n_agents = 30;
    std::size_t budget = 500;
    std::uint64_t master_seed = 0;
    BoundaryPolicy boundary{};
    BestUpdate best_update = BestUpdate::synchronous;
    std::string output_dir = "results";
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s = "invalid configuration:";
        for (const auto& x : e) s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> errors_;
};

inline const std::vector<std::string>& known_algorithms() {
    static const std::vector<std::string> names{"ETO", "PSO", "RandomSearch"};
    return names;
}

/// ETO options from a JSON parameter map.
inline eto::EtoOptions eto_options_from_json(const json& p) {
    eto::EtoOptions o;
    o.params.a = p.value("a", o.params.a);
    o.params.b = p.value("b", o.params.b);
    o.params.switch_threshold = p.value("switch_threshold", o.params.switch_threshold);
    o.per_dimension_draws = p.value("per_dimension_draws", false);
    o.enforce_contraction = p.value("enforce_contraction", false);
    o.schedule_length = p.value("schedule_length", o.schedule_length);
    const std::string tb = p.value("schedule_timebase", std::string("frozen"));
    if (tb == "frozen") o.timebase = eto::ScheduleTimebase::frozen;
    else if (tb == "per_iteration") o.timebase = eto::ScheduleTimebase::per_iteration;
    else throw std::invalid_argument("ETO: unknown schedule_timebase " + tb);
    const std::string ix = p.value("schedule_indexing", std::string("shared"));
    if (ix == "shared") o.indexing = eto::ScheduleIndexing::shared;
    else if (ix == "per_agent") o.indexing = eto::ScheduleIndexing::per_agent;
    else throw std::invalid_argument("ETO: unknown schedule_indexing " + ix);
    return o;
}

inline OptimizerFactory make_factory(const AlgorithmConfig& alg) {
    if (alg.name == "ETO") {
        const auto opts = eto_options_from_json(alg.params);
        return [opts] { return std::make_unique<eto::EtoOptimizer>(opts); };
    }
    if (alg.name == "PSO") {
        ParticleSwarmParams p;
        p.inertia_start = alg.params.value("inertia_start", p.inertia_start);
        p.inertia_end = alg.params.value("inertia_end", p.inertia_end);
        p.cognitive = alg.params.value("cognitive", p.cognitive);
        p.social = alg.params.value("social", p.social);
        p.max_velocity_fraction = alg.params.value("max_velocity_fraction", p.max_velocity_fraction);
        return [p] { return std::make_unique<ParticleSwarm>(p); };
    }
    if (alg.name == "RandomSearch") return [] { return std::make_unique<RandomSearch>(); };
    throw std::invalid_argument("unknown algorithm: " + alg.name);
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    for (const auto& s : c.suites) {
        json m = bench::suite_to_manifest(s);
        if (auto it = c.overrides.find(s.name); it != c.overrides.end()) {
            if (it->second.budget) m["budget"] = *it->second.budget;
            if (it->second.n_agents) m["n_agents"] = *it->second.n_agents;
        }
        j["suites"].push_back(std::move(m));
    }
    for (const auto& a : c.algorithms) j["algorithms"].push_back({{"name", a.name}, {"label", a.label}, {"params", a.params}});
    j["n_runs"] = c.n_runs;
    j["n_agents"] = c.n_agents;
    j["budget"] = c.budget;
    j["master_seed"] = c.master_seed;
    j["boundary"] = to_string(c.boundary.mode);
    j["best_update"] = c.best_update == BestUpdate::synchronous ? "synchronous" : "asynchronous";
    j["output_dir"] = c.output_dir;
    return j;
}

/// Parses and validates a configuration. Every problem found is reported in
/// one ConfigError. Relative manifest paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir = {}) {
    ExperimentConfig c;
    std::vector<std::string> errors;
    auto positive = [&](const char* key, std::size_t& dst) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() <= 0) errors.push_back(std::string(key) + " must be a positive integer");
        else dst = v.get<std::size_t>();
    };
    positive("n_runs", c.n_runs);
    positive("n_agents", c.n_agents);
    positive("budget", c.budget);
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("boundary")) {
        try {
            c.boundary.mode = parse_boundary_mode(j.at("boundary").get<std::string>());
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    }
    if (j.contains("best_update")) {
        const auto s = j.at("best_update").get<std::string>();
        if (s == "synchronous") c.best_update = BestUpdate::synchronous;
        else if (s == "asynchronous") c.best_update = BestUpdate::asynchronous;
        else errors.push_back("unknown best_update: " + s);
    }

    auto bad_name = [](const std::string& s) {
        return s.empty() || s.find_first_of(",/\n\"") != std::string::npos;
    };

    std::set<std::string> suite_names;
    if (!j.contains("suites") || !j.at("suites").is_array() || j.at("suites").empty())
        errors.push_back("at least one suite is required");
    else
        for (const auto& s : j.at("suites")) {
            try {
                bench::SuiteSpec suite;
                if (s.contains("manifest")) {
                    fs::path p = s.at("manifest").get<std::string>();
                    if (p.is_relative()) p = base_dir / p;
                    std::ifstream in(p);
                    if (!in) throw std::invalid_argument("cannot open manifest " + p.string());
                    suite = bench::suite_from_manifest(json::parse(in));
                } else if (s.contains("functions")) {
                    suite = bench::suite_from_manifest(s);
                } else {
                    const auto name = s.at("name").get<std::string>();
                    const auto kind = bench::parse_suite_kind(s.value("kind", std::string("basic")));
                    const auto nf = s.value("n_functions", std::size_t{10});
                    const auto dims = s.value("dims", std::vector<std::size_t>{10});
                    SearchSpace space{dims.empty() ? 1 : dims.front(), s.value("lower", -100.0), s.value("upper", 100.0)};
                    suite = bench::build_suite(name, kind, nf, dims, space, s.value("seed", std::uint64_t{0}));
                }
                if (bad_name(suite.name)) errors.push_back("suite name '" + suite.name + "' is empty or has , / \" characters");
                if (!suite_names.insert(suite.name).second) errors.push_back("duplicate suite name: " + suite.name);
                if (suite.dims.empty()) errors.push_back("suite " + suite.name + " has no dims");
                SuiteOverride ov;
                for (const char* key : {"budget", "n_agents"}) {
                    if (!s.contains(key)) continue;
                    const auto& v = s.at(key);
                    if (!v.is_number_integer() || v.get<long long>() <= 0) {
                        errors.push_back("suite " + suite.name + ": " + key + " must be a positive integer");
                        continue;
                    }
                    (std::string_view(key) == "budget" ? ov.budget : ov.n_agents) = v.get<std::size_t>();
                }
                if (ov.budget || ov.n_agents) c.overrides[suite.name] = ov;
                c.suites.push_back(std::move(suite));
            } catch (const std::exception& e) {
                errors.push_back(std::string("suite: ") + e.what());
            }
        }

    std::set<std::string> labels;
    if (!j.contains("algorithms") || !j.at("algorithms").is_array() || j.at("algorithms").empty())
        errors.push_back("at least one algorithm is required");
    else
        for (const auto& a : j.at("algorithms")) {
            AlgorithmConfig alg;
            alg.name = a.is_string() ? a.get<std::string>() : a.value("name", std::string());
            alg.label = a.is_object() ? a.value("label", alg.name) : alg.name;
            if (a.is_object() && a.contains("params")) alg.params = a.at("params");
            const auto& known = known_algorithms();
            if (std::find(known.begin(), known.end(), alg.name) == known.end()) {
                errors.push_back("unknown algorithm name: '" + alg.name + "'");
                continue;
            }
            try {
                (void)make_factory(alg);
            } catch (const std::exception& e) {
                errors.push_back(e.what());
            }
            if (bad_name(alg.label)) errors.push_back("algorithm label '" + alg.label + "' is empty or has , / \" characters");
            if (!labels.insert(alg.label).second) errors.push_back("duplicate algorithm label: " + alg.label);
            c.algorithms.push_back(std::move(alg));
        }
    if (c.algorithms.size() > 0xffff) errors.push_back("too many algorithms");
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file " + path.string()});
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("config does not parse: ") + e.what()});
    }
    return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
    std::string algorithm;
    std::string function;  // "<suite>/<function>"
    std::size_t dim = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    double final_fitness = 0.0;
};

using RunKey = std::tuple<std::string, std::string, std::size_t, std::size_t>;
using CurveKey = std::tuple<std::string, std::string, std::size_t>;

inline RunKey key_of(const ResultRow& r) { return {r.algorithm, r.function, r.dim, r.run}; }

struct FailureRow {
    std::string algorithm;
    std::string function;
    std::size_t dim = 0;
    std::size_t run = 0;
    std::string reason;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    /// (algorithm, function, dim) -> run index -> best-so-far curve.
    std::map<CurveKey, std::map<std::size_t, Vector>> curves;
    std::vector<FailureRow> failures;

    bool complete() const noexcept { return failures.empty(); }
};

inline constexpr std::string_view kResultsHeader = "algorithm,function,dim,run,seed,final_fitness";

inline std::string results_line(const ResultRow& r) {
    return r.algorithm + ',' + r.function + ',' + std::to_string(r.dim) + ',' + std::to_string(r.run) + ',' +
           std::to_string(r.seed) + ',' + fmt17(r.final_fitness);
}

inline std::string curve_line(const ResultRow& r, const Vector& curve) {
    json j;
    j["algorithm"] = r.algorithm;
    j["function"] = r.function;
    j["dim"] = r.dim;
    j["run"] = r.run;
    j["seed"] = r.seed;
    json c = json::array();
    for (double v : curve) c.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    j["curve"] = std::move(c);
    return j.dump();
}

inline std::vector<ResultRow> read_results_csv(const fs::path& path) {
    std::vector<ResultRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    if (!std::getline(in, line)) return rows;
    if (line != kResultsHeader) throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) continue;  // torn final line after a crash
        try {
            ResultRow r;
            r.algorithm = f[0];
            r.function = f[1];
            r.dim = std::stoull(f[2]);
            r.run = std::stoull(f[3]);
            r.seed = std::stoull(f[4]);
            r.final_fitness = std::strtod(f[5].c_str(), nullptr);
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
        }
    }
    return rows;
}

inline std::map<RunKey, Vector> read_curves_jsonl(const fs::path& path) {
    std::map<RunKey, Vector> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            continue;
        }
        Vector c;
        for (const auto& v : j.at("curve")) c.push_back(v.is_null() ? kInf : v.get<double>());
        out[{j.at("algorithm").get<std::string>(), j.at("function").get<std::string>(), j.at("dim").get<std::size_t>(),
             j.at("run").get<std::size_t>()}] = std::move(c);
    }
    return out;
}

/// Loads whatever results.csv and curves.jsonl hold in `dir`. A run counts
/// only when both files have it.
inline ExperimentResult load_results(const fs::path& dir) {
    ExperimentResult res;
    const auto rows = read_results_csv(dir / "results.csv");
    const auto curves = read_curves_jsonl(dir / "curves.jsonl");
    std::set<RunKey> seen;
    for (const auto& r : rows) {
        const auto k = key_of(r);
        auto it = curves.find(k);
        if (it == curves.end() || !seen.insert(k).second) continue;
        res.rows.push_back(r);
        res.curves[{r.algorithm, r.function, r.dim}][r.run] = it->second;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Execution

struct Problem {
    std::string suite;
    std::string function;  // "<suite>/<name>"
    const bench::ObjectiveSpec* spec = nullptr;
    SearchSpace space;
    std::size_t budget = 0;
    std::size_t n_agents = 0;
};

inline std::vector<Problem> enumerate_problems(const ExperimentConfig& c) {
    std::vector<Problem> out;
    for (const auto& s : c.suites)
        for (std::size_t d : s.dims)
            for (const auto* f : s.functions_for(d)) {
                Problem p;
                p.suite = s.name;
                p.function = s.name + "/" + f->name;
                p.spec = f;
                p.space = SearchSpace{d, s.space.lower, s.space.upper};
                const auto ov = c.overrides.find(s.name);
                p.budget = ov != c.overrides.end() && ov->second.budget ? *ov->second.budget : c.budget;
                p.n_agents = ov != c.overrides.end() && ov->second.n_agents ? *ov->second.n_agents : c.n_agents;
                out.push_back(std::move(p));
            }
    return out;
}

struct RunOptions {
    std::size_t workers = 1;
    /// Stop after this many new runs (simulates an interruption in tests).
    std::optional<std::size_t> max_new_runs;
    /// Replaces the built-in registry (tests inject failing optimizers).
    std::function<OptimizerFactory(const AlgorithmConfig&)> factory;
};

/// Executes the full (algorithm x problem x run) matrix, skipping runs
/// already persisted in the output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
    const fs::path dir = config.output_dir;
    fs::create_directories(dir / "manifests");
    {
        std::ofstream(dir / "config.json") << config_to_json(config).dump(2) << '\n';
        for (const auto& s : config.suites)
            std::ofstream(dir / "manifests" / (s.name + ".json")) << bench::suite_to_manifest(s).dump(2) << '\n';
    }
    const auto problems = enumerate_problems(config);
    ExperimentResult done = load_results(dir);
    std::set<RunKey> finished;
    for (const auto& r : done.rows) finished.insert(key_of(r));

    struct Task {
        std::size_t alg, prob, run;
    };
    std::vector<Task> tasks;
    for (std::size_t a = 0; a < config.algorithms.size(); ++a)
        for (std::size_t p = 0; p < problems.size(); ++p)
            for (std::size_t r = 0; r < config.n_runs; ++r)
                if (!finished.count({config.algorithms[a].label, problems[p].function, problems[p].space.dim, r}))
                    tasks.push_back({a, p, r});
    if (options.max_new_runs && tasks.size() > *options.max_new_runs) tasks.resize(*options.max_new_runs);

    const bool fresh_results = !fs::exists(dir / "results.csv") || fs::file_size(dir / "results.csv") == 0;
    std::ofstream results_out(dir / "results.csv", std::ios::app);
    if (fresh_results) results_out << kResultsHeader << '\n' << std::flush;
    std::ofstream curves_out(dir / "curves.jsonl", std::ios::app);
    const bool fresh_timings = !fs::exists(dir / "timings.csv");
    std::ofstream timings_out(dir / "timings.csv", std::ios::app);
    if (fresh_timings) timings_out << "algorithm,function,dim,run,seconds\n";
    std::ofstream failures_out(dir / "failures.csv", std::ios::trunc);
    failures_out << "algorithm,function,dim,run,reason\n";

    std::vector<OptimizerFactory> factories;
    for (const auto& a : config.algorithms) factories.push_back(options.factory ? options.factory(a) : make_factory(a));

    std::mutex write_mutex;
    std::vector<FailureRow> failures;
    std::atomic<std::size_t> next{0};
    LoopOptions loop;
    loop.boundary = config.boundary;
    loop.best_update = config.best_update;

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& task = tasks[i];
            const auto& alg = config.algorithms[task.alg];
            const auto& prob = problems[task.prob];
            ResultRow row;
            row.algorithm = alg.label;
            row.function = prob.function;
            row.dim = prob.space.dim;
            row.run = task.run;
            row.seed = derive_run_seed(config.master_seed, static_cast<std::uint32_t>(task.alg),
                                       static_cast<std::uint32_t>(task.prob), static_cast<std::uint32_t>(task.run));
            const auto t0 = std::chrono::steady_clock::now();
            try {
                auto opt = factories[task.alg]();
                const auto objective = bench::make_objective(*prob.spec);
                const RunRecord rec =
                    run_optimizer(*opt, objective, prob.space, prob.n_agents, prob.budget, row.seed, loop);
                row.final_fitness = rec.final_fitness;
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::lock_guard lock(write_mutex);
                curves_out << curve_line(row, rec.curve) << '\n' << std::flush;
                results_out << results_line(row) << '\n' << std::flush;
                timings_out << row.algorithm << ',' << row.function << ',' << row.dim << ',' << row.run << ','
                            << fmt17(secs) << '\n';
            } catch (const std::exception& e) {
                std::string reason = e.what();
                std::replace(reason.begin(), reason.end(), ',', ';');
                std::replace(reason.begin(), reason.end(), '\n', ' ');
                std::lock_guard lock(write_mutex);
                failures.push_back({row.algorithm, row.function, row.dim, row.run, reason});
                failures_out << row.algorithm << ',' << row.function << ',' << row.dim << ',' << row.run << ','
                             << reason << '\n'
                             << std::flush;
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, tasks.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    results_out.close();
    curves_out.close();
    timings_out.close();

    ExperimentResult result = load_results(dir);
    result.failures = std::move(failures);

    // Canonical order, rewritten only when the matrix is complete.
    std::map<std::string, std::size_t> alg_rank, prob_rank;
    for (std::size_t a = 0; a < config.algorithms.size(); ++a) alg_rank[config.algorithms[a].label] = a;
    for (std::size_t p = 0; p < problems.size(); ++p) prob_rank[problems[p].function + "#" + std::to_string(problems[p].space.dim)] = p;
    auto order = [&](const ResultRow& r) {
        const auto ai = alg_rank.find(r.algorithm);
        const auto pi = prob_rank.find(r.function + "#" + std::to_string(r.dim));
        return std::make_tuple(ai == alg_rank.end() ? SIZE_MAX : ai->second, pi == prob_rank.end() ? SIZE_MAX : pi->second,
                               r.run, r.algorithm, r.function, r.dim);
    };
    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [&](const ResultRow& x, const ResultRow& y) { return order(x) < order(y); });
    const std::size_t expected = config.algorithms.size() * problems.size() * config.n_runs;
    if (result.rows.size() == expected && result.failures.empty()) {
        std::ofstream rs(dir / "results.csv.tmp", std::ios::trunc);
        std::ofstream cs(dir / "curves.jsonl.tmp", std::ios::trunc);
        rs << kResultsHeader << '\n';
        for (const auto& r : result.rows) {
            rs << results_line(r) << '\n';
            cs << curve_line(r, result.curves.at({r.algorithm, r.function, r.dim}).at(r.run)) << '\n';
        }
        rs.close();
        cs.close();
        fs::rename(dir / "results.csv.tmp", dir / "results.csv");
        fs::rename(dir / "curves.jsonl.tmp", dir / "curves.jsonl");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Convergence bands

struct BandRow {
    double q1 = 0.0, median = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

using ConvergenceBands = std::vector<BandRow>;

/// Percentile with midpoint interpolation: mean of the two order statistics
/// around position (n - 1) q. `sorted` must be ascending.
inline double midpoint_percentile(std::span<const double> sorted, double q) {
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return 0.5 * (sorted[lo] + sorted[hi]);
}

inline ConvergenceBands convergence_bands(const std::vector<Vector>& curves) {
    if (curves.size() < 4) throw std::invalid_argument("convergence_bands: need at least 4 runs");
    const std::size_t T = curves.front().size();
    for (const auto& c : curves)
        if (c.size() != T) throw std::invalid_argument("convergence_bands: curves differ in length");
    ConvergenceBands bands(T);
    Vector col(curves.size());
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = 0; r < curves.size(); ++r) col[r] = curves[r][t];
        std::sort(col.begin(), col.end());
        bands[t] = {midpoint_percentile(col, 0.25), midpoint_percentile(col, 0.5), midpoint_percentile(col, 0.75),
                    col.front(), col.back()};
    }
    return bands;
}

inline void write_bands_csv(std::ostream& os, const ConvergenceBands& bands) {
    os << "q1,median,q3,min,max\n";
    for (const auto& b : bands)
        os << fmt17(b.q1) << ',' << fmt17(b.median) << ',' << fmt17(b.q3) << ',' << fmt17(b.min) << ','
           << fmt17(b.max) << '\n';
}

// ---------------------------------------------------------------------------
// Block matrices

/// A (suite, dim) slice of the results; one Friedman analysis each.
struct Group {
    std::string suite;
    std::size_t dim = 0;
    auto operator<=>(const Group&) const = default;
};

inline std::string suite_of(const std::string& function) {
    const auto slash = function.find('/');
    return slash == std::string::npos ? std::string() : function.substr(0, slash);
}

/// Groups in order of first appearance.
inline std::vector<Group> groups_of(const ExperimentResult& res) {
    std::vector<Group> out;
    for (const auto& r : res.rows) {
        Group g{suite_of(r.function), r.dim};
        if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    }
    return out;
}

/// Algorithms in order of first appearance.
inline std::vector<std::string> algorithms_of(const ExperimentResult& res) {
    std::vector<std::string> out;
    for (const auto& r : res.rows)
        if (std::find(out.begin(), out.end(), r.algorithm) == out.end()) out.push_back(r.algorithm);
    return out;
}

class BlockError : public std::runtime_error {
public:
    BlockError(std::vector<std::string> gaps)
        : std::runtime_error("block matrix has " + std::to_string(gaps.size()) + " missing cells, first: " +
                             (gaps.empty() ? std::string() : gaps.front())),
          gaps_(std::move(gaps)) {}
    const std::vector<std::string>& gaps() const noexcept { return gaps_; }

private:
    std::vector<std::string> gaps_;
};

/// One block per (function, run) of the group, columns in `algorithms` order
/// (first-appearance order when empty). Refuses, listing every gap, when any
/// cell is missing.
inline stats::BlockMatrix to_block_matrix(const ExperimentResult& res, const Group& group,
                                          std::vector<std::string> algorithms = {}) {
    if (algorithms.empty()) algorithms = algorithms_of(res);
    std::map<RunKey, double> cell;
    std::vector<std::string> functions;
    std::set<std::size_t> runs;
    for (const auto& r : res.rows) {
        if (r.dim != group.dim || suite_of(r.function) != group.suite) continue;
        cell[key_of(r)] = r.final_fitness;
        if (std::find(functions.begin(), functions.end(), r.function) == functions.end()) functions.push_back(r.function);
        runs.insert(r.run);
    }
    stats::BlockMatrix m;
    m.algorithm_names = algorithms;
    std::vector<std::string> gaps;
    for (const auto& f : functions)
        for (std::size_t run : runs) {
            m.block_ids.push_back(f + "#" + std::to_string(run));
            for (const auto& a : algorithms) {
                auto it = cell.find({a, f, group.dim, run});
                if (it == cell.end()) {
                    gaps.push_back(a + " " + f + " dim " + std::to_string(group.dim) + " run " + std::to_string(run));
                    m.values.push_back(0.0);
                } else {
                    m.values.push_back(it->second);
                }
            }
        }
    if (!gaps.empty()) throw BlockError(std::move(gaps));
    return m;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    return s == "-0.000" ? "0.000" : s;
}

inline std::string concordance_label(double w) {
    if (w >= 0.7) return "High concordance among rankings";
    if (w >= 0.6) return "Moderate-to-high concordance";
    if (w >= 0.3) return "Moderate concordance among rankings";
    if (w >= 0.1) return "Weak concordance among rankings";
    return "Negligible concordance among rankings";
}

inline std::string group_title(const Group& g) { return g.suite + ", " + std::to_string(g.dim) + "-dimensional"; }

/// Friedman block, average-rank/quartile block and post-hoc block.
inline void write_comparison_markdown(std::ostream& os, const std::string& title, const stats::ComparisonReport& rep,
                                      double alpha = 0.05) {
    const auto& f = rep.friedman;
    os << "### " << title << "\n\n";
    os << "**Friedman test**\n\n| Statistic | Value | Interpretation |\n|---|---:|---|\n";
    os << "| chi2(" << f.df << ", N=" << f.n_blocks << ") | " << fmt3(f.chi2) << " | Test statistic for rank variance |\n";
    os << "| p-value | " << stats::format_p(f.p_value) << " | "
       << (f.p_value < alpha ? "Evidence against H0 at alpha = " : "No evidence against H0 at alpha = ") << alpha
       << " |\n";
    os << "| Kendall's W | " << fmt3(f.kendalls_w) << " | " << concordance_label(f.kendalls_w) << " |\n";
    if (std::abs(f.chi2 - f.chi2_uncorrected) > 1e-6)
        os << "| chi2 without tie correction | " << fmt3(f.chi2_uncorrected) << " | |\n";
    os << "\n**Average ranks and quartiles**\n\n|";
    for (const auto& n : rep.algorithm_names) os << " | " << n;
    os << " |\n|---";
    for (std::size_t i = 0; i < rep.algorithm_names.size(); ++i) os << "|---:";
    os << "|\n| Average Rank";
    for (double r : f.avg_ranks) os << " | " << fmt3(r);
    os << " |\n| Quartile";
    for (int q : f.quartile_tags) os << " | " << q;
    os << " |\n\n**Post hoc pair-wise comparison (Dunn-Sidak corrected)**\n\n";
    os << "| Group 1 | Group 2 | Adjusted P | Wilcoxon P | Effect size r | Cliff's delta | Median Diff. | Note |\n";
    os << "|---|---|---:|---:|---:|---:|---:|---|\n";
    for (const auto& r : rep.rows) {
        os << "| " << r.group1 << " | " << r.group2 << " | " << stats::format_p(r.p_adjusted) << " | "
           << stats::format_p(r.p_raw) << " | " << fmt3(r.effect_r) << " | " << fmt3(r.cliffs_delta) << " | "
           << fmt3(r.median_diff) << " | ";
        if (r.status != "ok") os << r.status;
        else if (r.p_adjusted < alpha) os << "significant";
        if (r.zeros_dropped) os << (r.status != "ok" || r.p_adjusted < alpha ? "; " : "") << r.zeros_dropped << " ties dropped";
        os << " |\n";
    }
    os << '\n';
}

struct GroupComparison {
    Group group;
    stats::ComparisonReport report;
};

inline std::vector<GroupComparison> compare_groups(const ExperimentResult& res, const std::string& reference) {
    std::vector<GroupComparison> out;
    for (const auto& g : groups_of(res)) out.push_back({g, stats::compare_all(to_block_matrix(res, g), reference)});
    return out;
}

inline void write_comparison_files(const fs::path& out_dir, const std::vector<GroupComparison>& comps, double alpha) {
    fs::create_directories(out_dir);
    std::ofstream md(out_dir / "comparison.md");
    md << "# Statistical comparison\n\n";
    for (const auto& c : comps) write_comparison_markdown(md, group_title(c.group), c.report, alpha);

    std::ofstream fr(out_dir / "friedman.csv");
    fr << "suite,dim,n_blocks,k,chi2,chi2_uncorrected,df,p_value,kendalls_w\n";
    std::ofstream rk(out_dir / "ranks.csv");
    rk << "suite,dim,algorithm,avg_rank,quartile\n";
    std::ofstream pw(out_dir / "comparison.csv");
    pw << "suite,dim,group1,group2,p_adjusted,p_raw,z,effect_r,cliffs_delta,median_diff,n_pairs,zeros_dropped,exact,status\n";
    for (const auto& c : comps) {
        const auto& f = c.report.friedman;
        fr << c.group.suite << ',' << c.group.dim << ',' << f.n_blocks << ',' << c.report.algorithm_names.size() << ','
           << fmt17(f.chi2) << ',' << fmt17(f.chi2_uncorrected) << ',' << f.df << ',' << fmt17(f.p_value) << ','
           << fmt17(f.kendalls_w) << '\n';
        for (std::size_t j = 0; j < c.report.algorithm_names.size(); ++j)
            rk << c.group.suite << ',' << c.group.dim << ',' << c.report.algorithm_names[j] << ','
               << fmt17(f.avg_ranks[j]) << ',' << f.quartile_tags[j] << '\n';
        for (const auto& r : c.report.rows)
            pw << c.group.suite << ',' << c.group.dim << ',' << r.group1 << ',' << r.group2 << ','
               << fmt17(r.p_adjusted) << ',' << fmt17(r.p_raw) << ',' << fmt17(r.z) << ',' << fmt17(r.effect_r) << ','
               << fmt17(r.cliffs_delta) << ',' << fmt17(r.median_diff) << ',' << r.n_pairs << ',' << r.zeros_dropped
               << ',' << (r.exact ? 1 : 0) << ',' << r.status << '\n';
    }
}

inline std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '#' || c == ' ') c = '_';
    return s;
}

/// Markdown report with one three-block table per (suite, dim), a band CSV
/// per (algorithm, function, dim), and an optional flaw report appended.
inline void render_report(const ExperimentResult& res, const std::vector<GroupComparison>& comps,
                          const fs::path& out_dir, const diag::FlawReport* flaws = nullptr, double alpha = 0.05) {
    fs::create_directories(out_dir / "bands");
    std::ofstream md(out_dir / "report.md");
    md << "# Benchmark report\n\n";
    const auto algs = algorithms_of(res);
    md << "Algorithms: ";
    for (std::size_t i = 0; i < algs.size(); ++i) md << (i ? ", " : "") << algs[i];
    md << "  \nResult rows: " << res.rows.size() << "\n\n";
    md << "## Statistical tests\n\n";
    for (const auto& c : comps) write_comparison_markdown(md, group_title(c.group), c.report, alpha);

    md << "## Convergence bands\n\n";
    md << "Per-iteration quartiles (midpoint interpolation) and min/max envelope of the best-so-far curves, "
          "one CSV per (algorithm, function, dim) under `bands/`.\n\n";
    md << "| Algorithm | Function | Dim | Runs | Final median | Final IQR |\n|---|---|---:|---:|---:|---:|\n";
    for (const auto& [key, runs] : res.curves) {
        const auto& [alg, fn, dim] = key;
        if (runs.size() < 4) continue;
        std::vector<Vector> curves;
        for (const auto& [run, c] : runs) curves.push_back(c);
        const auto bands = convergence_bands(curves);
        std::ofstream csv(out_dir / "bands" / (sanitize(alg) + "__" + sanitize(fn) + "__d" + std::to_string(dim) + ".csv"));
        write_bands_csv(csv, bands);
        md << "| " << alg << " | " << fn << " | " << dim << " | " << runs.size() << " | "
           << diag::fmt_num(bands.back().median, 6) << " | " << diag::fmt_num(bands.back().q3 - bands.back().q1, 6)
           << " |\n";
    }
    md << '\n';
    if (flaws) diag::write_markdown(md, *flaws, "Optimizer diagnostics");
}

}  // namespace etof::harness
