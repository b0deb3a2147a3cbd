#pragma once

// Forensic checks on the ETO kernel: control-coefficient envelopes,
// constancy detection, trigger-schedule audit, switch probabilities, draw
// budgets and Monte-Carlo probes of the four update rules.

#include "etof/eto.hpp"
#include "etof/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace etof::diag {

// ---------------------------------------------------------------------------
// Flaw reports

enum class Severity { info, warning, defect };

inline std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::info: return "info";
        case Severity::warning: return "warning";
        case Severity::defect: return "defect";
    }
    return "?";
}

struct Finding {
    std::string code;
    Severity severity = Severity::info;
    std::string detail;
    double measured = 0.0;
    std::optional<double> expected;
};

struct FlawReport {
    std::vector<Finding> findings;

    void add(std::string code, Severity sev, std::string detail, double measured,
             std::optional<double> expected = std::nullopt) {
        findings.push_back({std::move(code), sev, std::move(detail), measured, expected});
    }

    const Finding* find(std::string_view code) const {
        for (const auto& f : findings)
            if (f.code == code) return &f;
        return nullptr;
    }

    void append(const FlawReport& other) {
        findings.insert(findings.end(), other.findings.begin(), other.findings.end());
    }
};

inline std::string fmt_num(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

inline void write_markdown(std::ostream& os, const FlawReport& report, std::string_view title = "Flaw report") {
    os << "## " << title << "\n\n";
    os << "| Code | Severity | Measured | Expected | Detail |\n";
    os << "|---|---|---:|---:|---|\n";
    for (const auto& f : report.findings)
        os << "| " << f.code << " | " << to_string(f.severity) << " | " << fmt_num(f.measured) << " | "
           << (f.expected ? fmt_num(*f.expected) : std::string("-")) << " | " << f.detail << " |\n";
    os << '\n';
}

// ---------------------------------------------------------------------------
// Constancy

struct Constancy {
    bool constant = false;
    double spread = 0.0;
    double first = 0.0;
};

inline Constancy constancy_check(std::span<const double> series, double tol) {
    if (series.empty()) throw std::invalid_argument("constancy_check: empty series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    Constancy c;
    c.spread = *hi - *lo;
    c.constant = c.spread <= tol;
    c.first = series.front();
    return c;
}

/// tan(d1/d2) and exp(d1/d2) for t = 1..T.
inline std::vector<double> tan_ratio_series(std::size_t T) {
    std::vector<double> s;
    for (std::size_t t = 1; t <= T; ++t) s.push_back(std::tan(eto::oscillation_pair(t, T).ratio()));
    return s;
}

inline std::vector<double> exp_ratio_series(std::size_t T) {
    std::vector<double> s;
    for (std::size_t t = 1; t <= T; ++t) s.push_back(std::exp(eto::oscillation_pair(t, T).ratio()));
    return s;
}

inline std::vector<double> gamma_series(std::size_t T) {
    std::vector<double> s;
    for (std::size_t t = 1; t <= T; ++t) s.push_back(eto::coeff_gamma(t, T));
    return s;
}

// ---------------------------------------------------------------------------
// Control envelopes

struct Envelope {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

struct EnvelopeRow {
    std::size_t t = 0;
    double d1 = 0.0;
    double d2 = 0.0;
    double gamma = 0.0;
    double switch_probability = 0.0;
    Envelope mu, alpha1, alpha2, alpha3;
};

/// Per iteration: exact deterministic terms plus min/mean/max of the
/// stochastic coefficients over `n_samples_per_t` draws of (r1, r4, r6,
/// r10, r11), drawn in that order.
inline std::vector<EnvelopeRow> trace_controls(std::size_t T, std::size_t n_samples_per_t, std::uint64_t seed) {
    if (T < 1) throw std::invalid_argument("trace_controls: T must be >= 1");
    if (n_samples_per_t < 1) throw std::invalid_argument("trace_controls: need at least one sample per t");
    Rng rng(seed);
    std::vector<EnvelopeRow> rows;
    rows.reserve(T);
    const double n = static_cast<double>(n_samples_per_t);
    for (std::size_t t = 1; t <= T; ++t) {
        EnvelopeRow row;
        row.t = t;
        const auto d = eto::oscillation_pair(t, T);
        row.d1 = d.d1;
        row.d2 = d.d2;
        row.gamma = eto::coeff_gamma(t, T);
        row.switch_probability = eto::mode_switch_probability(t, T);
        auto init = [](Envelope& e) {
            e.min = kInf;
            e.max = -kInf;
            e.mean = 0.0;
        };
        auto push = [](Envelope& e, double v) {
            e.min = std::min(e.min, v);
            e.max = std::max(e.max, v);
            e.mean += v;
        };
        init(row.mu);
        init(row.alpha1);
        init(row.alpha2);
        init(row.alpha3);
        for (std::size_t s = 0; s < n_samples_per_t; ++s) {
            const double r1 = rng.uniform();
            const double r4 = rng.uniform();
            const double r6 = rng.uniform();
            const double r10 = rng.uniform();
            const double r11 = rng.uniform();
            push(row.mu, eto::mode_coefficient(t, T, r1));
            push(row.alpha1, eto::coeff_alpha1(t, T, r4));
            push(row.alpha2, eto::coeff_alpha2(t, T, r6));
            push(row.alpha3, eto::coeff_alpha3(t, T, r10, r11));
        }
        for (Envelope* e : {&row.mu, &row.alpha1, &row.alpha2, &row.alpha3}) e->mean /= n;
        rows.push_back(row);
    }
    return rows;
}

inline void write_envelope_csv(std::ostream& os, const std::vector<EnvelopeRow>& rows) {
    os << "t,d1,d2,gamma,switch_probability,mu_min,mu_mean,mu_max,alpha1_min,alpha1_mean,alpha1_max,"
          "alpha2_min,alpha2_mean,alpha2_max,alpha3_min,alpha3_mean,alpha3_max\n";
    for (const auto& r : rows) {
        os << r.t << ',' << fmt_num(r.d1, 17) << ',' << fmt_num(r.d2, 17) << ',' << fmt_num(r.gamma, 17) << ','
           << fmt_num(r.switch_probability, 17);
        for (const Envelope* e : {&r.mu, &r.alpha1, &r.alpha2, &r.alpha3})
            os << ',' << fmt_num(e->min, 17) << ',' << fmt_num(e->mean, 17) << ',' << fmt_num(e->max, 17);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Switch probability

struct SwitchPoint {
    std::size_t t = 0;
    double probability = 0.0;
};

inline std::vector<SwitchPoint> switch_probability_curve(std::size_t T, double threshold = 1.0) {
    if (T < 1) throw std::invalid_argument("switch_probability_curve: T must be >= 1");
    std::vector<SwitchPoint> curve;
    curve.reserve(T);
    for (std::size_t t = 1; t <= T; ++t) curve.push_back({t, eto::mode_switch_probability(t, T, threshold)});
    return curve;
}

/// Fraction of `n` fresh r1 draws with mu(t) > threshold.
inline double switch_frequency(std::size_t t, std::size_t T, std::size_t n, std::uint64_t seed,
                               double threshold = 1.0) {
    Rng rng(seed);
    std::size_t hits = 0;
    const double scale = eto::mode_scale(t, T);
    for (std::size_t i = 0; i < n; ++i)
        if (scale * rng.uniform() > threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Schedule audit

inline FlawReport audit_schedule(const eto::EtoParams& params, std::size_t schedule_length = 8) {
    FlawReport rep;
    const auto s = eto::trigger_schedule(params, schedule_length);
    const auto T = static_cast<std::int64_t>(params.budget);
    rep.add("EPSILON_1", Severity::info, "seed of the trigger recursion", static_cast<double>(s.epsilon.front()));
    std::optional<std::int64_t> in_budget;
    std::optional<std::int64_t> first_out;
    for (std::size_t i = 1; i < s.epsilon.size(); ++i) {
        const auto e = s.epsilon[i];
        if (e >= 1 && e <= T) {
            if (!in_budget) in_budget = e;
        } else if (!first_out) {
            first_out = e;
        }
    }
    if (!in_budget) {
        std::ostringstream detail;
        detail << "no trigger entry beyond epsilon_1 = " << s.epsilon.front() << " lies in [1, " << T << "]";
        if (first_out) detail << "; first out-of-budget entry epsilon_2 = " << *first_out;
        if (s.overflow_index) detail << "; recursion overflows at index " << *s.overflow_index;
        detail << "; the contracted bounds are never computed";
        rep.add("INERT_TRIGGER", Severity::defect, detail.str(),
                first_out ? static_cast<double>(*first_out) : kInf, static_cast<double>(T));
    } else {
        rep.add("TRIGGER_REACHABLE", Severity::info, "a trigger entry beyond epsilon_1 lies inside the budget",
                static_cast<double>(*in_budget), static_cast<double>(T));
    }
    // Same question when the recurrence is re-evaluated with the current t.
    std::size_t dynamic_hits = 0;
    for (std::size_t t = 1; t <= params.budget; ++t)
        if (eto::trigger_schedule(params, schedule_length, t).fires_at(t)) ++dynamic_hits;
    rep.add("TRIGGER_DYNAMIC_HITS", dynamic_hits ? Severity::info : Severity::warning,
            "iterations that fire when the recursion is re-evaluated at each t", static_cast<double>(dynamic_hits));
    return rep;
}

// ---------------------------------------------------------------------------
// Draw budget

/// Named draws on a rule path, r1 first, optionally with the trigger draws.
inline std::vector<std::string> path_draw_names(int rule, bool trigger_fired = false) {
    std::vector<std::string> names;
    for (const auto& d : eto::kIterationDraws) names.emplace_back(d.name);
    if (trigger_fired)
        for (const auto& d : eto::kTriggerDraws) names.emplace_back(d.name);
    for (const auto& d : eto::rule_draws(rule)) names.emplace_back(d.name);
    return names;
}

/// Distinct named uniform draws over every path (the initialization draw
/// r0 excluded).
inline std::size_t distinct_named_draws() {
    std::set<std::string> all;
    for (int rule = 1; rule <= 4; ++rule)
        for (auto& n : path_draw_names(rule, true)) all.insert(n);
    return all.size();
}

inline FlawReport stochastic_budget_report(std::size_t T, std::size_t n_agents = 30) {
    FlawReport rep;
    const std::size_t tp = eto::phase_boundary(T);
    double expected_total = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        const double p = eto::mode_switch_probability(t, T);
        const int hi = t <= tp ? 1 : 3;
        const double k_hi = static_cast<double>(eto::draws_per_agent(hi, 1, false, false));
        const double k_lo = static_cast<double>(eto::draws_per_agent(hi + 1, 1, false, false));
        expected_total += 1.0 + static_cast<double>(n_agents) * (p * k_hi + (1.0 - p) * k_lo);
    }
    for (int rule = 1; rule <= 4; ++rule) {
        const auto names = path_draw_names(rule);
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        const std::size_t per_agent = eto::draws_per_agent(rule, 1, false, false);
        rep.add("DRAWS_RULE" + std::to_string(rule), Severity::info,
                "named draws " + list + "; per iteration with " + std::to_string(n_agents) +
                    " agents: " + std::to_string(1 + n_agents * per_agent),
                static_cast<double>(names.size()));
    }
    rep.add("DRAWS_TRIGGER", Severity::info, "extra draws r2, r3 per agent on triggered iterations",
            static_cast<double>(eto::kTriggerDraws.size()));
    rep.add("DRAWS_EXPECTED_RUN", Severity::info,
            "expected uniform draws over a " + std::to_string(T) + "-iteration run with " + std::to_string(n_agents) +
                " agents (initialization excluded)",
            expected_total);
    rep.add("STOCHASTIC_SATURATION", Severity::warning,
            "distinct named uniform draws across all update paths (r1..r14)",
            static_cast<double>(distinct_named_draws()), 14.0);
    return rep;
}

/// Every closed-form finding on the kernel for the given parameters.
inline FlawReport audit_kernel(const eto::EtoParams& params) {
    params.validate();
    const std::size_t T = params.budget;
    FlawReport rep = audit_schedule(params);

    rep.add("UNENFORCED_CONTRACTION", Severity::defect,
            "the contracted bounds are not consulted by any of the four update rules", 0.0, 4.0);

    const auto tan_c = constancy_check(tan_ratio_series(T), 1e-12);
    rep.add("CONSTANT_RATIO", Severity::defect,
            "d2 = -d1 at every t, so tan(d1/d2) is constant (spread " + fmt_num(tan_c.spread) + ")", tan_c.first,
            std::tan(-1.0));
    const auto exp_c = constancy_check(exp_ratio_series(T), 1e-12);
    rep.add("CONSTANT_EXP_RATIO", Severity::defect,
            "exp(d1/d2) is constant (spread " + fmt_num(exp_c.spread) + ")", exp_c.first, std::exp(-1.0));

    const auto g = constancy_check(gamma_series(T), 0.0);
    rep.add("GAMMA_CONSTANT", Severity::warning, "gamma does not vary with t (spread " + fmt_num(g.spread) + ")",
            g.first);
    char gamma_detail[256];
    std::snprintf(gamma_detail, sizeof gamma_detail,
                  "exp(tan(d1/d2)) evaluates to exp(tan(-1)) = %.4f; the constant exp(tan(1)) = %.4f is obtained "
                  "only by using |d1/d2|. The kernel uses the former",
                  eto::coeff_gamma(1, T), eto::gamma_stated_constant());
    rep.add("GAMMA_INCONSISTENT", Severity::defect, gamma_detail,
            eto::coeff_gamma(1, T), eto::gamma_stated_constant());

    std::size_t negative = 0;
    for (std::size_t t = 1; t <= T; ++t)
        if (eto::alpha1_closed_form(t, T, 1.0) < 0.0) ++negative;
    const double neg_frac = static_cast<double>(negative) / static_cast<double>(T);
    rep.add("ALPHA1_SIGN", Severity::warning,
            "alpha1 = 3 e^-2 r4 (t/T - 0.85) is negative before t/T = 0.85 (fraction of iterations shown)",
            neg_frac);
    rep.add("ALPHA2_SIGN", Severity::warning, "alpha2 = 3 e^-0.3 r6 (t/T - 0.85) shares the sign flip", neg_frac);

    const double a3_first = eto::coeff_alpha3(1, T, 0.5, 0.5);
    const double a3_last = eto::coeff_alpha3(T, T, 0.5, 0.5);
    rep.add("ALPHA3_NARROW", Severity::info,
            "alpha3 at r10 = r11 = 0.5 moves from " + fmt_num(a3_first, 4) + " (t=1) to " + fmt_num(a3_last, 4) +
                " (t=T)",
            a3_first - a3_last);

    const auto curve = switch_probability_curve(T, params.switch_threshold);
    std::size_t confined_from = T + 1;
    for (std::size_t i = curve.size(); i-- > 0;) {
        if (curve[i].probability > 0.0) break;
        confined_from = curve[i].t;
    }
    rep.add("SWITCH_CONFINED", Severity::defect,
            "P[mu(t) > threshold] is " + fmt_num(curve.front().probability, 4) + " at t=1 and exactly 0 from t=" +
                std::to_string(confined_from) + " on",
            curve.front().probability);
    rep.append(stochastic_budget_report(T));
    return rep;
}

// ---------------------------------------------------------------------------
// Update-rule distribution probe

enum class GammaReading {
    printed_formula,  // exp(tan(d1/d2)) = exp(tan(-1)), what the kernel uses
    stated_constant,  // exp(tan(1))
};

struct EmpiricalPdf {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> bin_edges;
    std::vector<double> mass;
    std::uint64_t n_samples = 0;
    double out_of_bounds_low = 0.0;
    double out_of_bounds_high = 0.0;
};

struct BiasMetrics {
    double mean = 0.0;
    double median = 0.0;
    double oob_fraction = 0.0;
    /// In-range mass above 0, as a fraction of the in-range mass.
    double positive_mass = 0.0;
    /// In-range mass above the domain midpoint, same normalization.
    double above_midpoint_mass = 0.0;
    double skew_proxy = 0.0;
};

struct ProbeConfig {
    int rule = 1;
    std::size_t n_samples = 1'000'000;
    SearchSpace space{1, -5.0, 10.0};
    double resolution_fraction = 0.01;
    double t_fraction = 0.5;
    std::size_t budget = 500;
    std::uint64_t seed = 1;
    GammaReading gamma = GammaReading::printed_formula;
    /// Pin x_best to this value instead of sampling it.
    std::optional<double> fixed_best;
};

struct ProbeResult {
    EmpiricalPdf pdf;
    BiasMetrics bias;
    std::size_t iteration = 0;
};

inline constexpr std::size_t kMinProbeSamples = 10'000;
inline constexpr std::size_t kProbeChunk = 1u << 16;

/// Iteration the probe draws coefficients at: round(t_fraction T), >= 1.
inline std::size_t probe_iteration(double t_fraction, std::size_t T) {
    const auto t = static_cast<std::size_t>(std::llround(t_fraction * static_cast<double>(T)));
    return std::clamp<std::size_t>(t, 1, T);
}

namespace detail {

/// One scalar output of the chosen rule (first coordinate), draws taken in
/// the kernel's order after x and x_best.
inline double probe_sample(const ProbeConfig& cfg, std::size_t t, double gamma, Rng& rng, Vector& x, Vector& xb) {
    const std::size_t T = cfg.budget;
    for (double& v : x) v = rng.uniform(cfg.space.lower, cfg.space.upper);
    for (double& v : xb) v = cfg.fixed_best ? *cfg.fixed_best : rng.uniform(cfg.space.lower, cfg.space.upper);
    switch (cfg.rule) {
        case 1: {
            const double a1 = eto::coeff_alpha1(t, T, rng.uniform());
            const double r5 = rng.uniform();
            return eto::update_rule_1(x, xb, a1, r5)[0];
        }
        case 2: {
            const double a2 = eto::coeff_alpha2(t, T, rng.uniform());
            const double r7 = rng.uniform();
            const double r8 = rng.uniform();
            const double r9 = rng.uniform();
            return eto::update_rule_2(x, xb, a2, r7, r8, r9)[0];
        }
        case 3: {
            const double r10 = rng.uniform();
            const double r11 = rng.uniform();
            const double a3 = eto::coeff_alpha3(t, T, r10, r11);
            const double r12 = rng.uniform();
            const double r13 = rng.uniform();
            return eto::update_rule_3(x, xb, a3, r12, r13)[0];
        }
        default: {
            const double r10 = rng.uniform();
            const double r11 = rng.uniform();
            const double a3 = eto::coeff_alpha3(t, T, r10, r11);
            const double r14 = rng.uniform();
            return eto::update_rule_4(x, xb, a3, gamma, r14)[0];
        }
    }
}

}  // namespace detail

/// Applies one rule to i.i.d. uniform (x, x_best) without any boundary
/// handling and histograms the result on fixed-width bins over the domain.
/// Samples are generated in chunks of 65536, chunk c using its own stream
/// seeded with mix64(seed + c), so the output is independent of how chunks
/// are scheduled.
inline ProbeResult probe_update_distribution(const ProbeConfig& cfg) {
    if (cfg.rule < 1 || cfg.rule > 4) throw std::invalid_argument("probe: rule must be 1..4");
    if (cfg.n_samples < kMinProbeSamples)
        throw std::invalid_argument("probe: need at least " + std::to_string(kMinProbeSamples) + " samples");
    if (!(cfg.resolution_fraction > 0.0 && cfg.resolution_fraction <= 1.0))
        throw std::invalid_argument("probe: resolution fraction must be in (0, 1]");
    cfg.space.validate();
    if (!(cfg.space.upper > cfg.space.lower)) throw std::invalid_argument("probe: domain must have positive width");

    const std::size_t t = probe_iteration(cfg.t_fraction, cfg.budget);
    const double gamma =
        cfg.gamma == GammaReading::printed_formula ? eto::coeff_gamma(t, cfg.budget) : eto::gamma_stated_constant();
    const double lo = cfg.space.lower;
    const double hi = cfg.space.upper;
    const double width = cfg.resolution_fraction * (hi - lo);
    const auto n_bins = static_cast<std::size_t>(std::ceil(1.0 / cfg.resolution_fraction - 1e-9));

    std::vector<std::uint64_t> counts(n_bins, 0);
    std::uint64_t low = 0, high = 0, positive = 0, above_mid = 0;
    std::vector<double> samples;
    samples.reserve(cfg.n_samples);
    const double mid = 0.5 * (lo + hi);
    Vector x(cfg.space.dim), xb(cfg.space.dim);
    for (std::size_t start = 0, chunk = 0; start < cfg.n_samples; start += kProbeChunk, ++chunk) {
        Rng rng(mix64(cfg.seed + chunk));
        const std::size_t end = std::min(cfg.n_samples, start + kProbeChunk);
        for (std::size_t i = start; i < end; ++i) {
            const double y = detail::probe_sample(cfg, t, gamma, rng, x, xb);
            samples.push_back(y);
            if (y < lo) {
                ++low;
            } else if (y > hi) {
                ++high;
            } else {
                const auto bin = std::min(n_bins - 1, static_cast<std::size_t>((y - lo) / width));
                ++counts[bin];
                if (y > 0.0) ++positive;
                if (y > mid) ++above_mid;
            }
        }
    }

    ProbeResult res;
    res.iteration = t;
    const double n = static_cast<double>(cfg.n_samples);
    auto& pdf = res.pdf;
    pdf.lower = lo;
    pdf.upper = hi;
    pdf.n_samples = cfg.n_samples;
    for (std::size_t b = 0; b <= n_bins; ++b) pdf.bin_edges.push_back(std::min(hi, lo + static_cast<double>(b) * width));
    pdf.bin_edges.back() = hi;
    for (auto c : counts) pdf.mass.push_back(static_cast<double>(c) / n);
    pdf.out_of_bounds_low = static_cast<double>(low) / n;
    pdf.out_of_bounds_high = static_cast<double>(high) / n;

    auto& bias = res.bias;
    double sum = 0.0;
    for (double y : samples) sum += y;
    bias.mean = sum / n;
    const auto mid_it = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
    std::nth_element(samples.begin(), mid_it, samples.end());
    bias.median = *mid_it;
    if (samples.size() % 2 == 0) bias.median = 0.5 * (bias.median + *std::max_element(samples.begin(), mid_it));
    bias.oob_fraction = static_cast<double>(low + high) / n;
    const double in_range = static_cast<double>(cfg.n_samples - low - high);
    bias.positive_mass = in_range > 0 ? static_cast<double>(positive) / in_range : 0.0;
    bias.above_midpoint_mass = in_range > 0 ? static_cast<double>(above_mid) / in_range : 0.0;
    bias.skew_proxy = bias.mean - bias.median;
    return res;
}

inline void write_histogram_csv(std::ostream& os, const EmpiricalPdf& pdf) {
    os << "bin_lo,bin_hi,mass\n";
    for (std::size_t b = 0; b < pdf.mass.size(); ++b)
        os << fmt_num(pdf.bin_edges[b], 17) << ',' << fmt_num(pdf.bin_edges[b + 1], 17) << ','
           << fmt_num(pdf.mass[b], 17) << '\n';
}

/// Binomial standard error of a proportion p estimated from n samples.
inline double binomial_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

/// Findings from probing all four rules under the same protocol.
inline FlawReport probe_findings(const std::vector<ProbeResult>& by_rule, const ProbeResult* rule4_stated = nullptr) {
    FlawReport rep;
    if (by_rule.size() != 4) throw std::invalid_argument("probe_findings: need results for rules 1..4");
    for (int r = 0; r < 4; ++r) {
        const auto& b = by_rule[r].bias;
        rep.add("RULE" + std::to_string(r + 1) + "_PROFILE", Severity::info,
                "mean " + fmt_num(b.mean, 4) + ", median " + fmt_num(b.median, 4) + ", in-range mass above 0 " +
                    fmt_num(b.positive_mass, 4) + ", above midpoint " + fmt_num(b.above_midpoint_mass, 4) +
                    " (measured: out-of-bounds fraction)",
                b.oob_fraction);
    }
    const double oob1 = by_rule[0].bias.oob_fraction;
    const double oob3 = by_rule[2].bias.oob_fraction;
    rep.add("RULE3_BOUNDARY_VIOLATIONS", oob3 > oob1 ? Severity::defect : Severity::info,
            "rule 3 out-of-bounds fraction vs rule 1 (expected column)", oob3, oob1);
    const double pos4 = by_rule[3].bias.positive_mass;
    rep.add("RULE4_POSITIVE_DRIFT", pos4 > 0.9 ? Severity::defect : Severity::warning,
            "rule 4 in-range mass above 0 with gamma = exp(tan(-1)); the step is never negative", pos4, 0.9);
    if (rule4_stated) {
        const double p = rule4_stated->bias.positive_mass;
        rep.add("RULE4_POSITIVE_DRIFT_STATED_GAMMA", p > 0.9 ? Severity::defect : Severity::warning,
                "rule 4 in-range mass above 0 with gamma = exp(tan(1)); out-of-bounds fraction " +
                    fmt_num(rule4_stated->bias.oob_fraction, 4),
                p, 0.9);
    }
    return rep;
}

}  // namespace etof::diag
