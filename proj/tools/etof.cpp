// etof: run experiments, compare algorithms, diagnose the ETO kernel, and
// render reports.
//
// Exit codes: 0 success, 1 invalid input or failure, 2 partial completion.

#include "etof/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace etof;

namespace {

int cmd_run(const std::string& config_path, std::size_t workers, const std::string& out) {
    harness::ExperimentConfig cfg;
    try {
        cfg = harness::load_config(config_path);
    } catch (const harness::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    if (!out.empty()) cfg.output_dir = out;
    harness::RunOptions opts;
    opts.workers = workers;
    const auto res = harness::run_experiment(cfg, opts);
    const std::size_t expected =
        cfg.algorithms.size() * harness::enumerate_problems(cfg).size() * cfg.n_runs;
    std::cout << "completed " << res.rows.size() << " of " << expected << " runs in " << cfg.output_dir << '\n';
    if (!res.failures.empty()) {
        std::cerr << res.failures.size() << " runs failed, see failures.csv\n";
        return 2;
    }
    return res.rows.size() == expected ? 0 : 2;
}

std::string default_reference(const harness::ExperimentResult& res, const std::string& requested) {
    if (!requested.empty()) return requested;
    const auto algs = harness::algorithms_of(res);
    return std::find(algs.begin(), algs.end(), "ETO") != algs.end() ? "ETO" : algs.front();
}

int cmd_stats(const std::string& input, const std::string& reference, double alpha, const std::string& out) {
    const auto res = harness::load_results(input);
    if (res.rows.empty()) {
        std::cerr << "no results found in " << input << '\n';
        return 1;
    }
    const auto comps = harness::compare_groups(res, default_reference(res, reference));
    harness::write_comparison_files(out, comps, alpha);
    std::cout << "wrote comparison for " << comps.size() << " groups to " << out << '\n';
    return 0;
}

int cmd_report(const std::string& input, const std::string& reference, double alpha, const std::string& out) {
    const auto res = harness::load_results(input);
    if (res.rows.empty()) {
        std::cerr << "no results found in " << input << '\n';
        return 1;
    }
    const auto comps = harness::compare_groups(res, default_reference(res, reference));
    harness::write_comparison_files(out, comps, alpha);
    harness::render_report(res, comps, out, nullptr, alpha);
    // A flaw report produced by `diagnose` next to the results is appended.
    for (const fs::path p : {fs::path(input) / "flaw_report.md", fs::path(out) / "flaw_report.md"}) {
        if (!fs::exists(p)) continue;
        std::ifstream in(p);
        std::ofstream md(fs::path(out) / "report.md", std::ios::app);
        md << '\n' << in.rdbuf();
        break;
    }
    std::cout << "wrote " << (fs::path(out) / "report.md").string() << '\n';
    return 0;
}

struct DiagnoseArgs {
    std::size_t budget = 500;
    std::size_t samples = 1'000'000;
    std::string rule = "all";
    std::string domain = "-5:10";
    double resolution = 0.01;
    double t_fraction = 0.5;
    std::uint64_t seed = 1;
    std::string out = "diagnostics";
};

int cmd_diagnose(const DiagnoseArgs& a) {
    const auto colon = a.domain.find(':');
    if (colon == std::string::npos) {
        std::cerr << "--domain must be LO:HI\n";
        return 1;
    }
    SearchSpace space{1, std::stod(a.domain.substr(0, colon)), std::stod(a.domain.substr(colon + 1))};
    std::vector<int> rules;
    if (a.rule == "all") rules = {1, 2, 3, 4};
    else rules = {std::stoi(a.rule)};

    const fs::path out = a.out;
    fs::create_directories(out);
    eto::EtoParams params;
    params.budget = a.budget;
    diag::FlawReport report = diag::audit_kernel(params);

    std::vector<diag::ProbeResult> results;
    for (int rule : rules) {
        diag::ProbeConfig cfg;
        cfg.rule = rule;
        cfg.n_samples = a.samples;
        cfg.space = space;
        cfg.resolution_fraction = a.resolution;
        cfg.t_fraction = a.t_fraction;
        cfg.budget = a.budget;
        cfg.seed = a.seed;
        results.push_back(diag::probe_update_distribution(cfg));
        std::ofstream csv(out / ("histogram_rule" + std::to_string(rule) + ".csv"));
        diag::write_histogram_csv(csv, results.back().pdf);
    }
    if (rules.size() == 4) {
        diag::ProbeConfig cfg;
        cfg.rule = 4;
        cfg.n_samples = a.samples;
        cfg.space = space;
        cfg.resolution_fraction = a.resolution;
        cfg.t_fraction = a.t_fraction;
        cfg.budget = a.budget;
        cfg.seed = a.seed;
        cfg.gamma = diag::GammaReading::stated_constant;
        const auto stated = diag::probe_update_distribution(cfg);
        std::ofstream csv(out / "histogram_rule4_stated_gamma.csv");
        diag::write_histogram_csv(csv, stated.pdf);
        report.append(diag::probe_findings(results, &stated));
    }

    {
        std::ofstream csv(out / "envelopes.csv");
        diag::write_envelope_csv(csv, diag::trace_controls(a.budget, 1000, a.seed));
    }
    {
        std::ofstream csv(out / "switch_probability.csv");
        csv << "t,probability\n";
        for (const auto& p : diag::switch_probability_curve(a.budget)) csv << p.t << ',' << diag::fmt_num(p.probability, 17) << '\n';
    }
    {
        // Instrumented run on a 10-dimensional sphere.
        eto::EtoOptimizer opt;
        const auto obj = bench::make_objective({"sphere", bench::BaseFunction::sphere, 10});
        run_optimizer(opt, obj, SearchSpace{10, -100.0, 100.0}, 30, a.budget, a.seed);
        std::ofstream csv(out / "eto_trace.csv");
        eto::write_trace_csv(csv, opt.trace());
        std::size_t fired = 0;
        for (const auto& e : opt.trace()) fired += e.trigger_fired ? 1 : 0;
        report.add("TRACE_TRIGGER_FIRES", fired ? diag::Severity::info : diag::Severity::defect,
                   "iterations of an instrumented sphere run where any agent fired the trigger",
                   static_cast<double>(fired));
    }

    std::ofstream md(out / "flaw_report.md");
    diag::write_markdown(md, report, "ETO kernel diagnostics");
    std::cout << "wrote " << report.findings.size() << " findings to " << (out / "flaw_report.md").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness and diagnostics for population-based optimizers"};
    app.require_subcommand(1);

    std::string config, out_run;
    std::size_t workers = 1;
    auto* run = app.add_subcommand("run", "execute the run matrix of a configuration");
    run->add_option("--config", config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_run, "output directory (overrides the config)");

    std::string input, reference, out_stats = "stats";
    double alpha = 0.05;
    auto* st = app.add_subcommand("stats", "Friedman and pairwise comparison of stored results");
    st->add_option("--input", input, "results directory")->required()->check(CLI::ExistingDirectory);
    st->add_option("--reference", reference, "reference algorithm (default ETO, or the first)");
    st->add_option("--alpha", alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    st->add_option("--out", out_stats, "output directory");

    DiagnoseArgs d;
    auto* dg = app.add_subcommand("diagnose", "closed-form audits and update-rule probes of the ETO kernel");
    dg->add_option("--budget", d.budget, "iteration budget T")->check(CLI::PositiveNumber);
    dg->add_option("--samples", d.samples, "Monte-Carlo samples per rule");
    dg->add_option("--rule", d.rule, "1, 2, 3, 4 or all")->check(CLI::IsMember({"1", "2", "3", "4", "all"}));
    dg->add_option("--domain", d.domain, "probe domain LO:HI");
    dg->add_option("--resolution", d.resolution, "bin width as a fraction of the domain");
    dg->add_option("--t-fraction", d.t_fraction, "probe iteration as a fraction of T");
    dg->add_option("--seed", d.seed, "probe seed");
    dg->add_option("--out", d.out, "output directory");

    std::string report_in, report_out = "report", report_ref;
    auto* rp = app.add_subcommand("report", "markdown report with statistics and convergence bands");
    rp->add_option("--input", report_in, "results directory")->required()->check(CLI::ExistingDirectory);
    rp->add_option("--out", report_out, "output directory");
    rp->add_option("--reference", report_ref, "reference algorithm");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(config, workers, out_run);
        if (*st) return cmd_stats(input, reference, alpha, out_stats);
        if (*dg) return cmd_diagnose(d);
        if (*rp) return cmd_report(report_in, report_ref, 0.05, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
