#pragma once

// Exponential-Trigonometric Optimizer, reconstructed term by term and
// instrumented so every control coefficient is observable per iteration.
//
// Random draw consumption order (the replay contract):
//   iteration start : r1
//   per agent, in index order:
//     trigger fired : r2, r3
//     rule 1        : r4, r5
//     rule 2        : r6, r7, r8, r9
//     rule 3        : r10, r11, r12, r13
//     rule 4        : r10, r11, r14
// With per-dimension draws enabled, the multiplicative draws
// (r2, r3, r7, r8, r12, r14) are taken once per coordinate instead of once
// per agent, each block consumed coordinate by coordinate in the order listed.

#include "etof/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etof::eto {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct EtoParams {
    double a = 4.6;
    double b = 1.55;
    double switch_threshold = 1.0;
    std::size_t budget = 500;

    void validate() const {
        if (!(b > 0.0)) throw std::invalid_argument("eto: b must be > 0");
        if (budget < 1) throw std::invalid_argument("eto: budget must be >= 1");
    }
};

namespace detail {

inline void check_iteration(std::size_t t, std::size_t T) {
    if (T < 1) throw std::invalid_argument("eto: T must be >= 1");
    if (t < 1 || t > T)
        throw std::invalid_argument("eto: iteration " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

inline double frac(std::size_t t, std::size_t T) { return static_cast<double>(t) / static_cast<double>(T); }

/// Broadcast access: a one-element draw span applies to every coordinate.
inline double at(std::span<const double> r, std::size_t j) { return r.size() == 1 ? r[0] : r[j]; }

inline void check_sizes(std::span<const double> x, std::span<const double> x_best) {
    if (x.size() != x_best.size()) throw std::invalid_argument("eto: x and x_best differ in length");
}

}  // namespace detail

struct OscillationPair {
    double d1 = 0.0;
    double d2 = 0.0;

    /// d1/d2 evaluated literally. The cosine factor has no integer zeros, so
    /// the quotient is always -1; the fallback only guards the 0/0 limit.
    double ratio() const noexcept { return d2 != 0.0 ? d1 / d2 : -1.0; }
};

inline OscillationPair oscillation_pair(std::size_t t, std::size_t T) {
    detail::check_iteration(t, T);
    const double td = static_cast<double>(t);
    const double Td = static_cast<double>(T);
    const double d1 = 0.1 * std::exp(-0.01 * td) * std::cos(0.5 * Td * (1.0 - td / Td));
    return {d1, -d1};
}

/// mu(t) = 0.01 r1 (sqrt(t/T))^tan(d1/d2).
inline double mode_coefficient(std::size_t t, std::size_t T, double r1) {
    if (t == 0) throw std::invalid_argument("eto: mode coefficient is singular at t = 0");
    const auto d = oscillation_pair(t, T);
    return 0.01 * r1 * std::pow(std::sqrt(detail::frac(t, T)), std::tan(d.ratio()));
}

/// The deterministic factor multiplying r1 in mu(t).
inline double mode_scale(std::size_t t, std::size_t T) { return mode_coefficient(t, T, 1.0); }

/// P[mu(t) > 1] for r1 ~ U(0,1): 1 - 1/c(t) when c(t) > 1, else 0.
inline double mode_switch_probability(std::size_t t, std::size_t T, double threshold = 1.0) {
    const double c = mode_scale(t, T);
    return c > threshold ? 1.0 - threshold / c : 0.0;
}

inline std::size_t phase_boundary(std::size_t T) {
    if (T < 1) throw std::invalid_argument("eto: T must be >= 1");
    return static_cast<std::size_t>(std::floor(1.2 + static_cast<double>(T) / 2.25));
}

inline double coeff_alpha1(std::size_t t, std::size_t T, double r4) {
    const auto d = oscillation_pair(t, T);
    return 3.0 * r4 * (detail::frac(t, T) - 0.85) * std::exp(d.ratio() - 1.0);
}

inline double coeff_alpha2(std::size_t t, std::size_t T, double r6) {
    const auto d = oscillation_pair(t, T);
    return 3.0 * r6 * (detail::frac(t, T) - 0.85) * std::exp(std::abs(d.ratio()) - 1.3);
}

inline double coeff_alpha3(std::size_t t, std::size_t T, double r10, double r11) {
    detail::check_iteration(t, T);
    return r10 * std::exp(std::tanh(1.5 * (-detail::frac(t, T) - 0.75) - r11));
}

/// gamma = exp(tan(d1/d2)), evaluated as printed: exp(tan(-1)).
inline double coeff_gamma(std::size_t t, std::size_t T) {
    const auto d = oscillation_pair(t, T);
    return std::exp(std::tan(d.ratio()));
}

/// The constant exp(tan(1)) obtained by taking |d1/d2| inside the tangent.
/// Exposed for flaw reporting only; the kernel never uses it.
inline double gamma_stated_constant() { return std::exp(std::tan(1.0)); }

// Simplified closed forms once d1/d2 = -1 is substituted.
inline double alpha1_closed_form(std::size_t t, std::size_t T, double r4) {
    return 3.0 * std::exp(-2.0) * r4 * (detail::frac(t, T) - 0.85);
}
inline double alpha2_closed_form(std::size_t t, std::size_t T, double r6) {
    return 3.0 * std::exp(-0.3) * r6 * (detail::frac(t, T) - 0.85);
}

// ---------------------------------------------------------------------------
// Trigger schedule

/// Recurrence entries epsilon_1, epsilon_2, ... evaluated at one iteration.
struct TriggerSchedule {
    std::vector<std::int64_t> epsilon;
    std::size_t horizon = 0;
    /// Iteration at which the recurrence was evaluated.
    std::size_t evaluated_at = 1;
    /// 1-based index of the first entry that left the exactly representable
    /// integer range; entries from there on are not materialized.
    std::optional<std::size_t> overflow_index;

    /// Entries with index >= 2 are the ones the trigger compares against;
    /// epsilon_1 only seeds the recursion.
    bool fires_at(std::size_t t) const {
        for (std::size_t i = 1; i < epsilon.size(); ++i)
            if (epsilon[i] == static_cast<std::int64_t>(t)) return true;
        return false;
    }
};

inline TriggerSchedule trigger_schedule(const EtoParams& params, std::size_t max_index, std::size_t t = 1) {
    params.validate();
    if (max_index < 1) throw std::invalid_argument("eto: schedule needs max_index >= 1");
    constexpr double kExactLimit = 9007199254740992.0;  // 2^53
    TriggerSchedule s;
    s.horizon = params.budget;
    s.evaluated_at = t;
    const double T = static_cast<double>(params.budget);
    s.epsilon.push_back(static_cast<std::int64_t>(std::floor(1.0 + T / params.b)));
    const double td = static_cast<double>(t);
    while (s.epsilon.size() < max_index) {
        const double prev = static_cast<double>(s.epsilon.back());
        const double next = std::floor(2.0 - 2.0 * td * (T - params.a * prev)) + prev;
        if (!std::isfinite(next) || std::abs(next) >= kExactLimit) {
            s.overflow_index = s.epsilon.size() + 1;
            break;
        }
        s.epsilon.push_back(static_cast<std::int64_t>(next));
    }
    return s;
}

/// Componentwise x_best -/+ r2 (1 - t/T) |r3 x_best - x|.
inline std::pair<Vector, Vector> contracted_bounds(std::span<const double> x_best, std::span<const double> x,
                                                   double t, double T, std::span<const double> r2,
                                                   std::span<const double> r3) {
    detail::check_sizes(x, x_best);
    if (!(T >= 1.0) || t < 0.0 || t > T) throw std::invalid_argument("eto: contracted_bounds needs 0 <= t <= T");
    Vector lower(x.size()), upper(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double half = detail::at(r2, j) * (1.0 - t / T) * std::abs(detail::at(r3, j) * x_best[j] - x[j]);
        upper[j] = x_best[j] + half;
        lower[j] = x_best[j] - half;
    }
    return {std::move(lower), std::move(upper)};
}

inline std::pair<Vector, Vector> contracted_bounds(std::span<const double> x_best, std::span<const double> x,
                                                   double t, double T, double r2, double r3) {
    return contracted_bounds(x_best, x, t, T, std::span<const double>(&r2, 1), std::span<const double>(&r3, 1));
}

// ---------------------------------------------------------------------------
// Update rules. The span overloads accept one draw (broadcast) or one per
// coordinate for the multiplicative factors.

/// x_best +/- alpha1 |x_best - x|, plus branch iff r5 <= 0.5.
inline Vector update_rule_1(std::span<const double> x, std::span<const double> x_best, double alpha1, double r5) {
    detail::check_sizes(x, x_best);
    const double sign = r5 <= 0.5 ? 1.0 : -1.0;
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x_best[j] + sign * alpha1 * std::abs(x_best[j] - x[j]);
    return out;
}

/// x_best +/- r7 alpha2 |r8 x_best - x|, plus branch iff r9 < 0.5.
inline Vector update_rule_2(std::span<const double> x, std::span<const double> x_best, double alpha2,
                            std::span<const double> r7, std::span<const double> r8, double r9) {
    detail::check_sizes(x, x_best);
    const double sign = r9 < 0.5 ? 1.0 : -1.0;
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = x_best[j] + sign * detail::at(r7, j) * alpha2 * std::abs(detail::at(r8, j) * x_best[j] - x[j]);
    return out;
}

inline Vector update_rule_2(std::span<const double> x, std::span<const double> x_best, double alpha2, double r7,
                            double r8, double r9) {
    return update_rule_2(x, x_best, alpha2, std::span<const double>(&r7, 1), std::span<const double>(&r8, 1), r9);
}

/// x +/- 3 |r12 alpha3 x_best - x|, plus branch iff r13 <= 0.5.
inline Vector update_rule_3(std::span<const double> x, std::span<const double> x_best, double alpha3,
                            std::span<const double> r12, double r13) {
    detail::check_sizes(x, x_best);
    const double sign = r13 <= 0.5 ? 1.0 : -1.0;
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = x[j] + sign * 3.0 * std::abs(detail::at(r12, j) * alpha3 * x_best[j] - x[j]);
    return out;
}

inline Vector update_rule_3(std::span<const double> x, std::span<const double> x_best, double alpha3, double r12,
                            double r13) {
    return update_rule_3(x, x_best, alpha3, std::span<const double>(&r12, 1), r13);
}

/// x + gamma |r14 alpha3 x_best - x|. No branch: the step never points down.
inline Vector update_rule_4(std::span<const double> x, std::span<const double> x_best, double alpha3, double gamma,
                            std::span<const double> r14) {
    detail::check_sizes(x, x_best);
    if (gamma < 0.0) throw std::invalid_argument("eto: rule 4 needs gamma >= 0");
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = x[j] + gamma * std::abs(detail::at(r14, j) * alpha3 * x_best[j] - x[j]);
    return out;
}

inline Vector update_rule_4(std::span<const double> x, std::span<const double> x_best, double alpha3, double gamma,
                            double r14) {
    return update_rule_4(x, x_best, alpha3, gamma, std::span<const double>(&r14, 1));
}

// ---------------------------------------------------------------------------
// Draw bookkeeping

struct NamedDraw {
    std::string_view name;
    bool multiplicative;  // per-coordinate under per_dimension_draws
};

inline constexpr std::array<NamedDraw, 1> kIterationDraws{{{"r1", false}}};
inline constexpr std::array<NamedDraw, 2> kTriggerDraws{{{"r2", true}, {"r3", true}}};
inline constexpr std::array<NamedDraw, 2> kRule1Draws{{{"r4", false}, {"r5", false}}};
inline constexpr std::array<NamedDraw, 4> kRule2Draws{{{"r6", false}, {"r7", true}, {"r8", true}, {"r9", false}}};
inline constexpr std::array<NamedDraw, 4> kRule3Draws{
    {{"r10", false}, {"r11", false}, {"r12", true}, {"r13", false}}};
inline constexpr std::array<NamedDraw, 3> kRule4Draws{{{"r10", false}, {"r11", false}, {"r14", true}}};

inline std::span<const NamedDraw> rule_draws(int rule) {
    switch (rule) {
        case 1: return kRule1Draws;
        case 2: return kRule2Draws;
        case 3: return kRule3Draws;
        case 4: return kRule4Draws;
        default: throw std::invalid_argument("eto: rule must be 1..4");
    }
}

inline std::size_t count_draws(std::span<const NamedDraw> draws, std::size_t dim, bool per_dimension) {
    std::size_t n = 0;
    for (const auto& d : draws) n += (per_dimension && d.multiplicative) ? dim : 1;
    return n;
}

/// Uniform draws consumed by one agent in one iteration on a rule path.
inline std::size_t draws_per_agent(int rule, std::size_t dim, bool per_dimension, bool trigger_fired) {
    return count_draws(rule_draws(rule), dim, per_dimension) +
           (trigger_fired ? count_draws(kTriggerDraws, dim, per_dimension) : 0);
}

// ---------------------------------------------------------------------------
// Instrumented optimizer

enum class ScheduleTimebase {
    frozen,         // materialized once at t = 1
    per_iteration,  // recurrence re-evaluated with the current t
};

enum class ScheduleIndexing {
    shared,     // every agent compares t against entries 2..len
    per_agent,  // agent i (1-based) compares t against epsilon_i
};

struct EtoOptions {
    EtoParams params{};
    bool per_dimension_draws = false;
    /// Clamp updates into the contracted bounds on triggered iterations.
    bool enforce_contraction = false;
    ScheduleTimebase timebase = ScheduleTimebase::frozen;
    ScheduleIndexing indexing = ScheduleIndexing::shared;
    std::size_t schedule_length = 8;
    /// Replace the r1 draw (still consumed) by a fixed value.
    std::optional<double> fixed_r1;
};

struct TraceEntry {
    std::size_t t = 0;
    double d1 = 0.0;
    double d2 = 0.0;
    double mu = 0.0;
    // Mean over agents of the coefficient used this iteration; NaN when the
    // rule path does not compute it.
    double alpha1 = kNaN;
    double alpha2 = kNaN;
    double alpha3 = kNaN;
    double gamma = 0.0;
    int phase = 1;
    int rule = 0;
    bool trigger_fired = false;
    /// Mean half-width of the contracted box, NaN when not triggered.
    double contraction_half_width = kNaN;
};

using ControlTrace = std::vector<TraceEntry>;

inline void write_trace_csv(std::ostream& os, const ControlTrace& trace) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "t,d1,d2,mu,alpha1,alpha2,alpha3,gamma,phase,rule,trigger_fired\n";
    for (const auto& e : trace)
        os << e.t << ',' << num(e.d1) << ',' << num(e.d2) << ',' << num(e.mu) << ',' << num(e.alpha1) << ','
           << num(e.alpha2) << ',' << num(e.alpha3) << ',' << num(e.gamma) << ',' << e.phase << ',' << e.rule
           << ',' << (e.trigger_fired ? 1 : 0) << '\n';
}

class EtoOptimizer final : public Optimizer {
public:
    explicit EtoOptimizer(EtoOptions options = {}) : options_(options) {}

    std::string name() const override { return "ETO"; }

    const EtoOptions& options() const noexcept { return options_; }
    const ControlTrace& trace() const noexcept { return trace_; }
    const TriggerSchedule& schedule() const noexcept { return schedule_; }

    void start(const Population& pop, const SearchSpace& space, std::size_t budget, Rng&) override {
        options_.params.budget = budget;
        options_.params.validate();
        space_ = space;
        n_agents_ = pop.n_agents();
        phase_boundary_ = phase_boundary(budget);
        schedule_ = trigger_schedule(options_.params, schedule_length());
        trace_.clear();
        trace_.reserve(budget);
    }

    void begin_iteration(std::size_t t, const Population&, Rng& rng) override {
        const std::size_t T = options_.params.budget;
        if (options_.timebase == ScheduleTimebase::per_iteration && t > 1)
            schedule_ = trigger_schedule(options_.params, schedule_length(), t);
        TraceEntry e;
        e.t = t;
        const auto d = oscillation_pair(t, T);
        e.d1 = d.d1;
        e.d2 = d.d2;
        double r1 = rng.uniform();
        if (options_.fixed_r1) r1 = *options_.fixed_r1;
        e.mu = mode_coefficient(t, T, r1);
        e.gamma = coeff_gamma(t, T);
        e.phase = t <= phase_boundary_ ? 1 : 2;
        const bool explore = e.mu > options_.params.switch_threshold;
        e.rule = e.phase == 1 ? (explore ? 1 : 2) : (explore ? 3 : 4);
        current_ = e;
        sum_alpha_ = 0.0;
        sum_alpha3_ = 0.0;
        sum_half_width_ = 0.0;
        triggered_agents_ = 0;
    }

    Vector propose(std::size_t agent, std::size_t t, const Population& pop, Rng& rng) override {
        const std::size_t T = options_.params.budget;
        const std::size_t dim = pop.dim();
        auto x = pop.row(agent);
        auto xb = pop.best_position();

        std::optional<std::pair<Vector, Vector>> box;
        if (agent_triggered(agent, t)) {
            const Vector r2 = draw_block(rng, dim);
            const Vector r3 = draw_block(rng, dim);
            box = contracted_bounds(xb, x, static_cast<double>(t), static_cast<double>(T), r2, r3);
            double w = 0.0;
            for (std::size_t j = 0; j < dim; ++j) w += box->second[j] - box->first[j];
            sum_half_width_ += w / (2.0 * static_cast<double>(dim));
            ++triggered_agents_;
            current_.trigger_fired = true;
        }

        Vector out;
        switch (current_.rule) {
            case 1: {
                const double a1 = coeff_alpha1(t, T, rng.uniform());
                const double r5 = rng.uniform();
                sum_alpha_ += a1;
                out = update_rule_1(x, xb, a1, r5);
                break;
            }
            case 2: {
                const double a2 = coeff_alpha2(t, T, rng.uniform());
                const Vector r7 = draw_block(rng, dim);
                const Vector r8 = draw_block(rng, dim);
                const double r9 = rng.uniform();
                sum_alpha_ += a2;
                out = update_rule_2(x, xb, a2, r7, r8, r9);
                break;
            }
            case 3: {
                const double r10 = rng.uniform();
                const double r11 = rng.uniform();
                const double a3 = coeff_alpha3(t, T, r10, r11);
                const Vector r12 = draw_block(rng, dim);
                const double r13 = rng.uniform();
                sum_alpha3_ += a3;
                out = update_rule_3(x, xb, a3, r12, r13);
                break;
            }
            default: {
                const double r10 = rng.uniform();
                const double r11 = rng.uniform();
                const double a3 = coeff_alpha3(t, T, r10, r11);
                const Vector r14 = draw_block(rng, dim);
                sum_alpha3_ += a3;
                out = update_rule_4(x, xb, a3, current_.gamma, r14);
                break;
            }
        }
        if (box && options_.enforce_contraction)
            for (std::size_t j = 0; j < dim; ++j) out[j] = std::clamp(out[j], box->first[j], box->second[j]);
        return out;
    }

    void end_iteration(std::size_t, const Population&) override {
        const double n = static_cast<double>(n_agents_);
        if (current_.rule == 1) current_.alpha1 = sum_alpha_ / n;
        if (current_.rule == 2) current_.alpha2 = sum_alpha_ / n;
        if (current_.rule >= 3) current_.alpha3 = sum_alpha3_ / n;
        if (triggered_agents_ > 0) current_.contraction_half_width = sum_half_width_ / triggered_agents_;
        trace_.push_back(current_);
    }

private:
    std::size_t schedule_length() const {
        return options_.indexing == ScheduleIndexing::per_agent ? std::max<std::size_t>(n_agents_, 1)
                                                                : std::max<std::size_t>(options_.schedule_length, 1);
    }

    bool agent_triggered(std::size_t agent, std::size_t t) const {
        if (options_.indexing == ScheduleIndexing::shared) return schedule_.fires_at(t);
        return agent < schedule_.epsilon.size() && schedule_.epsilon[agent] == static_cast<std::int64_t>(t);
    }

    Vector draw_block(Rng& rng, std::size_t dim) const {
        Vector r(options_.per_dimension_draws ? dim : 1);
        for (double& v : r) v = rng.uniform();
        return r;
    }

    EtoOptions options_;
    SearchSpace space_;
    std::size_t n_agents_ = 0;
    std::size_t phase_boundary_ = 1;
    TriggerSchedule schedule_;
    ControlTrace trace_;
    TraceEntry current_;
    double sum_alpha_ = 0.0;
    double sum_alpha3_ = 0.0;
    double sum_half_width_ = 0.0;
    std::size_t triggered_agents_ = 0;
};

/// One instrumented iteration on an already evaluated population. The
/// optimizer must have been started on `pop`.
inline TraceEntry eto_step(EtoOptimizer& opt, const Objective& objective, Population& pop, std::size_t t,
                           const SearchSpace& space, const LoopOptions& loop, Rng& rng) {
    iterate(opt, objective, pop, t, space, loop, rng);
    return opt.trace().back();
}

}  // namespace etof::eto
