#include "etof/benchmarks.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace etof;
using namespace etof::bench;

namespace {

Vector random_vector(Rng& rng, std::size_t d, double lo = -50.0, double hi = 50.0) {
    Vector v(d);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

double norm2(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(Bases, MinimumAtOriginIsZero) {
    for (auto b : kAllBases)
        for (std::size_t d : {1u, 2u, 10u, 30u}) EXPECT_NEAR(evaluate_base(b, Vector(d, 0.0)), 0.0, 1e-12) << to_string(b);
}

TEST(Bases, NonNegativeAndFinite) {
    Rng rng(1);
    for (auto b : kAllBases)
        for (int k = 0; k < 200; ++k) {
            const double f = evaluate_base(b, random_vector(rng, 10));
            EXPECT_TRUE(std::isfinite(f));
            EXPECT_GE(f, -1e-12) << to_string(b);
        }
}

TEST(Bases, HandValues) {
    EXPECT_EQ(evaluate_base(BaseFunction::bent_cigar, Vector{0.0, 1.0}), 1e6);
    EXPECT_EQ(evaluate_base(BaseFunction::sphere, Vector{1.0, 2.0}), 5.0);
    EXPECT_NEAR(evaluate_base(BaseFunction::rastrigin, Vector{1.0}), 1.0, 1e-12);
    EXPECT_NEAR(evaluate_base(BaseFunction::elliptic, Vector{1.0, 1.0}), 1.0 + 1e6, 1e-6);
    EXPECT_EQ(evaluate_base(BaseFunction::schwefel_1_2, Vector{1.0, 1.0}), 5.0);
    // Re-centred Rosenbrock: z = (-1, -1) is the classic origin, 100 (0 - 0)^2 + 1.
    EXPECT_NEAR(evaluate_base(BaseFunction::rosenbrock, Vector{-1.0, -1.0}), 1.0, 1e-12);
}

TEST(Bases, SeparableSumsPerCoordinate) {
    Rng rng(2);
    for (auto b : {BaseFunction::sphere, BaseFunction::rastrigin}) {
        const auto x = random_vector(rng, 7);
        double sum = 0.0;
        for (double v : x) sum += evaluate_base(b, Vector{v});
        EXPECT_NEAR(evaluate_base(b, x), sum, 1e-9 * std::max(1.0, sum));
    }
    // Elliptic weights depend on position, so check against the weighted sum.
    const auto x = random_vector(rng, 5);
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) sum += std::pow(1e6, i / 4.0) * x[i] * x[i];
    EXPECT_NEAR(evaluate_base(BaseFunction::elliptic, x), sum, 1e-9 * sum);
}

TEST(Objective, ShiftOptimumAndConsistency) {
    Rng rng(3);
    for (auto b : kAllBases) {
        ObjectiveSpec s{"f", b, 6};
        s.shift = random_vector(rng, 6);
        EXPECT_NEAR(evaluate_objective(s, *s.shift), 0.0, 1e-12) << to_string(b);
        ObjectiveSpec plain{"g", b, 6};
        const auto x = random_vector(rng, 6);
        Vector z(6);
        for (int i = 0; i < 6; ++i) z[i] = x[i] - (*s.shift)[i];
        EXPECT_EQ(evaluate_objective(s, x), evaluate_objective(plain, z));
    }
}

TEST(Objective, RotationFixesShiftedOptimum) {
    Rng rng(4);
    for (auto b : kAllBases) {
        ObjectiveSpec s{"f", b, 5};
        s.shift = random_vector(rng, 5);
        s.rotation = random_orthogonal(5, 17);
        EXPECT_NEAR(evaluate_objective(s, *s.shift), 0.0, 1e-12);
    }
}

TEST(Objective, SphereInvariantUnderRotation) {
    Rng rng(5);
    ObjectiveSpec plain{"p", BaseFunction::sphere, 10};
    plain.shift = random_vector(rng, 10);
    ObjectiveSpec rot = plain;
    rot.rotation = random_orthogonal(10, 99);
    for (int k = 0; k < 100; ++k) {
        const auto x = random_vector(rng, 10);
        const double a = evaluate_objective(plain, x);
        EXPECT_NEAR(evaluate_objective(rot, x), a, 1e-10 * a);
    }
}

TEST(Objective, BiasAddsAndDimensionChecked) {
    ObjectiveSpec s{"f", BaseFunction::sphere, 2};
    s.bias = 100.0;
    EXPECT_EQ(evaluate_objective(s, Vector{0.0, 0.0}), 100.0);
    EXPECT_THROW(evaluate_objective(s, Vector{0.0}), std::invalid_argument);
}

TEST(RandomOrthogonal, Properties) {
    const auto q1 = random_orthogonal(1, 3);
    EXPECT_EQ(std::abs(q1(0, 0)), 1.0);
    for (std::size_t d : {2u, 10u, 30u, 50u}) {
        const auto q = random_orthogonal(d, d);
        EXPECT_LT(q.orthogonality_error(), 1e-10);
    }
    const auto q = random_orthogonal(10, 7);
    Rng rng(6);
    for (int k = 0; k < 100; ++k) {
        const auto x = random_vector(rng, 10);
        Vector y(10, 0.0);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = 0; j < 10; ++j) y[i] += q(i, j) * x[j];
        EXPECT_NEAR(norm2(y), norm2(x), 1e-8);
    }
    EXPECT_EQ(random_orthogonal(10, 7).data, q.data);
    EXPECT_NE(random_orthogonal(10, 8).data, q.data);
}

TEST(Suites, Kinds) {
    const SearchSpace sp{1, -100.0, 100.0};
    for (const auto& f : build_suite(SuiteKind::basic, 10, 10, sp, 1).functions) {
        EXPECT_FALSE(f.shift);
        EXPECT_FALSE(f.rotation);
    }
    const auto a = build_suite(SuiteKind::shifted, 10, 10, sp, 1);
    const auto b = build_suite(SuiteKind::shifted, 10, 10, sp, 1);
    for (std::size_t i = 0; i < 10; ++i) {
        ASSERT_TRUE(a.functions[i].shift);
        EXPECT_EQ(*a.functions[i].shift, *b.functions[i].shift);
        for (double v : *a.functions[i].shift) {
            EXPECT_GE(v, -80.0);
            EXPECT_LE(v, 80.0);
        }
    }
    for (const auto& f : build_suite(SuiteKind::shift_rotated, 29, 10, sp, 3).functions) {
        ASSERT_TRUE(f.rotation);
        EXPECT_LT(f.rotation->orthogonality_error(), 1e-10);
    }
    EXPECT_THROW(build_suite(SuiteKind::basic, 31, 10, sp, 1), std::invalid_argument);
}

TEST(Suites, CountsAndNames) {
    const auto s = build_suite("cec17", SuiteKind::shifted, 29, {10, 30}, {1, -100.0, 100.0}, 5);
    EXPECT_EQ(s.functions.size(), 58u);
    EXPECT_EQ(s.functions_for(10).size(), 29u);
    std::set<std::string> names;
    for (const auto* f : s.functions_for(30)) names.insert(f->name);
    EXPECT_EQ(names.size(), 29u);
    EXPECT_TRUE(names.count("sphere#1"));
}

TEST(Manifest, RoundTripExact) {
    const auto s = build_suite("sr", SuiteKind::shift_rotated, 12, {5, 10}, {1, -100.0, 100.0}, 42);
    const auto j = suite_to_manifest(s);
    const auto back = suite_from_manifest(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.functions.size(), s.functions.size());
    Rng rng(7);
    for (std::size_t i = 0; i < s.functions.size(); ++i) {
        const auto& f = s.functions[i];
        const auto& g = back.functions[i];
        EXPECT_EQ(f.name, g.name);
        EXPECT_EQ(*f.shift, *g.shift);
        EXPECT_EQ(f.rotation->data, g.rotation->data);
        const auto x = random_vector(rng, f.dim);
        EXPECT_EQ(evaluate_objective(f, x), evaluate_objective(g, x));
    }
    EXPECT_EQ(suite_to_manifest(back).dump(), j.dump());
}
