#include "etof/diagnostics.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace etof;
using namespace etof::diag;

namespace {

ProbeConfig probe(int rule, std::size_t n = 200'000, std::uint64_t seed = 1) {
    ProbeConfig c;
    c.rule = rule;
    c.n_samples = n;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Constancy, Series) {
    const auto tan_c = constancy_check(tan_ratio_series(500), 1e-12);
    EXPECT_TRUE(tan_c.constant);
    EXPECT_NEAR(tan_c.first, -1.5574, 1e-4);
    const auto exp_c = constancy_check(exp_ratio_series(500), 1e-12);
    EXPECT_TRUE(exp_c.constant);
    EXPECT_NEAR(exp_c.first, 0.3679, 1e-4);
    const auto g = constancy_check(gamma_series(500), 0.0);
    EXPECT_TRUE(g.constant);
    EXPECT_EQ(g.spread, 0.0);

    const double tol = 1e-6;
    const std::vector<double> s{0.0, 2 * tol};
    EXPECT_FALSE(constancy_check(s, tol).constant);
    EXPECT_THROW(constancy_check(std::vector<double>{}, tol), std::invalid_argument);
}

TEST(Envelopes, ControlTrace) {
    const auto rows = trace_controls(500, 4000, 3);
    ASSERT_EQ(rows.size(), 500u);
    EXPECT_NEAR(rows[0].mu.max, 1.2639, 1e-2);
    for (const auto& r : rows) {
        EXPECT_EQ(r.d2, -r.d1);
        EXPECT_EQ(r.gamma, rows[0].gamma);
    }
    // alpha1 mean changes sign at t = ceil(0.85 T) = 425.
    std::size_t cross = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i - 1].alpha1.mean < 0.0 && rows[i].alpha1.mean >= 0.0) cross = rows[i].t;
    EXPECT_NEAR(static_cast<double>(cross), 425.0, 1.0);
    std::ostringstream os;
    write_envelope_csv(os, rows);
    EXPECT_EQ(os.str().substr(0, 5), "t,d1,");
}

TEST(SwitchCurve, ClosedFormAndMonteCarlo) {
    const auto curve = switch_probability_curve(500);
    ASSERT_EQ(curve.size(), 500u);
    EXPECT_NEAR(curve[0].probability, 0.2088, 1e-3);
    EXPECT_EQ(curve.back().probability, 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].probability, curve[i - 1].probability);
    for (std::size_t t : {1u, 125u, 250u, 375u, 500u}) {
        const double p = curve[t - 1].probability;
        const double f = switch_frequency(t, 500, 1'000'000, 17 + t);
        const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / 1e6);
        EXPECT_LE(std::abs(f - p), 3 * se + 1e-12) << "t=" << t;
    }
}

TEST(ScheduleAudit, InertAtDefaultBudget) {
    const auto rep = audit_schedule({});
    const auto* e1 = rep.find("EPSILON_1");
    ASSERT_TRUE(e1);
    EXPECT_EQ(e1->measured, 323.0);
    const auto* inert = rep.find("INERT_TRIGGER");
    ASSERT_TRUE(inert);
    EXPECT_EQ(inert->severity, Severity::defect);
    EXPECT_EQ(inert->measured, 2296.0);
    EXPECT_EQ(*inert->expected, 500.0);
}

TEST(ScheduleAudit, ReachableScheduleHasNoDefect) {
    // a = 1.5: epsilon_2 = floor(2 - 2 (500 - 484.5)) + 323 = 294 <= 500.
    eto::EtoParams p;
    p.a = 1.5;
    const auto rep = audit_schedule(p);
    EXPECT_FALSE(rep.find("INERT_TRIGGER"));
    ASSERT_TRUE(rep.find("TRIGGER_REACHABLE"));
    EXPECT_EQ(rep.find("TRIGGER_REACHABLE")->measured, 294.0);
}

TEST(KernelAudit, GammaBothValuesAndDiscrepancy) {
    const auto rep = audit_kernel({});
    const auto* g = rep.find("GAMMA_INCONSISTENT");
    ASSERT_TRUE(g);
    EXPECT_EQ(g->severity, Severity::defect);
    EXPECT_NEAR(g->measured, 0.2107, 1e-3);
    EXPECT_NEAR(*g->expected, 4.7465, 1e-3);
    for (const char* code : {"INERT_TRIGGER", "UNENFORCED_CONTRACTION", "CONSTANT_RATIO", "CONSTANT_EXP_RATIO",
                             "GAMMA_CONSTANT", "SWITCH_CONFINED", "STOCHASTIC_SATURATION"})
        EXPECT_TRUE(rep.find(code)) << code;
    std::ostringstream md;
    write_markdown(md, rep);
    EXPECT_NE(md.str().find("0.2107"), std::string::npos);
    EXPECT_NE(md.str().find("4.7465"), std::string::npos);
}

TEST(DrawBudget, PathsAndUnion) {
    EXPECT_EQ(path_draw_names(2), (std::vector<std::string>{"r1", "r6", "r7", "r8", "r9"}));
    EXPECT_EQ(path_draw_names(4), (std::vector<std::string>{"r1", "r10", "r11", "r14"}));
    EXPECT_GE(distinct_named_draws(), 14u);
    const auto rep = stochastic_budget_report(500);
    EXPECT_EQ(rep.find("DRAWS_RULE2")->measured, 5.0);
    EXPECT_EQ(rep.find("DRAWS_RULE4")->measured, 4.0);
}

TEST(Probe, MassConservationAndBinWidth) {
    for (int rule = 1; rule <= 4; ++rule) {
        const auto r = probe_update_distribution(probe(rule));
        double s = r.pdf.out_of_bounds_low + r.pdf.out_of_bounds_high;
        for (double m : r.pdf.mass) {
            EXPECT_GE(m, 0.0);
            s += m;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
        ASSERT_EQ(r.pdf.mass.size(), 100u);
        for (std::size_t b = 0; b < r.pdf.mass.size(); ++b)
            EXPECT_NEAR(r.pdf.bin_edges[b + 1] - r.pdf.bin_edges[b], 0.15, 1e-12);
        EXPECT_EQ(r.iteration, 250u);
    }
}

TEST(Probe, DeterministicAndStable) {
    const auto a = probe_update_distribution(probe(3, 100'000, 9));
    const auto b = probe_update_distribution(probe(3, 100'000, 9));
    EXPECT_EQ(a.pdf.mass, b.pdf.mass);
    const auto c = probe_update_distribution(probe(3, 200'000, 9));
    const double se_oob = binomial_se(a.bias.oob_fraction, 100'000);
    const double se_pos = binomial_se(a.bias.positive_mass, 100'000);
    EXPECT_LT(std::abs(c.bias.oob_fraction - a.bias.oob_fraction), 3 * se_oob);
    EXPECT_LT(std::abs(c.bias.positive_mass - a.bias.positive_mass), 3 * se_pos);
}

TEST(Probe, RuleThreeViolatesBoundsMoreThanRuleOne) {
    const auto r1 = probe_update_distribution(probe(1));
    const auto r3 = probe_update_distribution(probe(3));
    EXPECT_GT(r3.bias.oob_fraction, r1.bias.oob_fraction);
}

TEST(Probe, RuleFourDrift) {
    const auto printed = probe_update_distribution(probe(4));
    auto cfg = probe(4);
    cfg.gamma = GammaReading::stated_constant;
    const auto stated = probe_update_distribution(cfg);
    // The step is never negative, so the mean moves right of the input mean 2.5.
    EXPECT_GT(printed.bias.mean, 2.5);
    EXPECT_GT(stated.bias.positive_mass, 0.9);
    EXPECT_GT(stated.bias.positive_mass, printed.bias.positive_mass);
    const auto rep = probe_findings({probe_update_distribution(probe(1)), probe_update_distribution(probe(2)),
                                     probe_update_distribution(probe(3)), printed},
                                    &stated);
    EXPECT_TRUE(rep.find("RULE4_POSITIVE_DRIFT"));
    EXPECT_EQ(rep.find("RULE4_POSITIVE_DRIFT_STATED_GAMMA")->severity, Severity::defect);
    EXPECT_EQ(rep.find("RULE3_BOUNDARY_VIOLATIONS")->severity, Severity::defect);
}

TEST(Probe, RuleOneSymmetricAroundCentredBest) {
    auto cfg = probe(1, 400'000, 5);
    cfg.space = {1, -5.0, 5.0};
    cfg.fixed_best = 0.0;
    const auto r = probe_update_distribution(cfg);
    // |y| <= 3 e^-2 * 0.85 * 5 < 2.03 bounds the standard deviation.
    EXPECT_LE(std::abs(r.bias.mean), 3 * 2.03 / std::sqrt(400'000.0));
}

TEST(Probe, RejectsBadConfig) {
    EXPECT_THROW(probe_update_distribution(probe(5)), std::invalid_argument);
    EXPECT_THROW(probe_update_distribution(probe(1, 100)), std::invalid_argument);
    auto cfg = probe(1);
    cfg.resolution_fraction = 0.0;
    EXPECT_THROW(probe_update_distribution(cfg), std::invalid_argument);
}

TEST(Probe, HistogramCsv) {
    const auto r = probe_update_distribution(probe(2, 10'000));
    std::ostringstream os;
    write_histogram_csv(os, r.pdf);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "bin_lo,bin_hi,mass");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 100);
}
