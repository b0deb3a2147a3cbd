#pragma once

// Classic analytic test functions with optional shift, rotation and bias,
// grouped into basic / shifted / shift-rotated suites.
//
// Every base function has its global minimum 0 at the origin of its own
// coordinates (Rosenbrock and Levy are re-centred). A transformed objective
// evaluates f_base(Q (x - s)) + bias.

#include "etof/core.hpp"
#include "etof/rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace etof::bench {

enum class BaseFunction {
    sphere,
    elliptic,
    bent_cigar,
    rastrigin,
    rosenbrock,
    ackley,
    griewank,
    schwefel_1_2,
    zakharov,
    levy,
};

inline constexpr std::array<BaseFunction, 10> kAllBases{
    BaseFunction::sphere,     BaseFunction::elliptic, BaseFunction::bent_cigar,   BaseFunction::rastrigin,
    BaseFunction::rosenbrock, BaseFunction::ackley,   BaseFunction::griewank,     BaseFunction::schwefel_1_2,
    BaseFunction::zakharov,   BaseFunction::levy,
};

/// Each base appears at most this many times in a suite (with distinct
/// bias, shift and rotation draws).
inline constexpr std::size_t kVariantsPerBase = 3;

inline std::string_view to_string(BaseFunction f) {
    switch (f) {
        case BaseFunction::sphere: return "sphere";
        case BaseFunction::elliptic: return "elliptic";
        case BaseFunction::bent_cigar: return "bent_cigar";
        case BaseFunction::rastrigin: return "rastrigin";
        case BaseFunction::rosenbrock: return "rosenbrock";
        case BaseFunction::ackley: return "ackley";
        case BaseFunction::griewank: return "griewank";
        case BaseFunction::schwefel_1_2: return "schwefel_1_2";
        case BaseFunction::zakharov: return "zakharov";
        case BaseFunction::levy: return "levy";
    }
    return "?";
}

inline BaseFunction parse_base_function(std::string_view s) {
    for (auto f : kAllBases)
        if (to_string(f) == s) return f;
    throw std::invalid_argument("unknown base function: " + std::string(s));
}

/// Square matrix, row-major.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> data;

    double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }

    /// max |(Q^T Q - I)_ij|
    double orthogonality_error() const {
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += (*this)(k, i) * (*this)(k, j);
                err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
            }
        return err;
    }
};

inline double evaluate_base(BaseFunction f, std::span<const double> z) {
    constexpr double pi = std::numbers::pi;
    const std::size_t d = z.size();
    double s = 0.0;
    switch (f) {
        case BaseFunction::sphere:
            for (double v : z) s += v * v;
            return s;
        case BaseFunction::elliptic:
            for (std::size_t i = 0; i < d; ++i) {
                const double e = d > 1 ? 6.0 * static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
                s += std::pow(10.0, e) * z[i] * z[i];
            }
            return s;
        case BaseFunction::bent_cigar:
            for (std::size_t i = 1; i < d; ++i) s += z[i] * z[i];
            return z[0] * z[0] + 1e6 * s;
        case BaseFunction::rastrigin:
            for (double v : z) s += v * v - 10.0 * std::cos(2.0 * pi * v) + 10.0;
            return s;
        case BaseFunction::rosenbrock:
            for (std::size_t i = 0; i + 1 < d; ++i) {
                const double a = z[i] + 1.0;
                const double b = z[i + 1] + 1.0;
                s += 100.0 * (a * a - b) * (a * a - b) + (a - 1.0) * (a - 1.0);
            }
            return s;
        case BaseFunction::ackley: {
            double sq = 0.0;
            double cs = 0.0;
            for (double v : z) {
                sq += v * v;
                cs += std::cos(2.0 * pi * v);
            }
            const double n = static_cast<double>(d);
            return -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + 20.0 + std::numbers::e;
        }
        case BaseFunction::griewank: {
            double prod = 1.0;
            for (std::size_t i = 0; i < d; ++i) {
                s += z[i] * z[i] / 4000.0;
                prod *= std::cos(z[i] / std::sqrt(static_cast<double>(i + 1)));
            }
            return s - prod + 1.0;
        }
        case BaseFunction::schwefel_1_2: {
            double partial = 0.0;
            for (double v : z) {
                partial += v;
                s += partial * partial;
            }
            return s;
        }
        case BaseFunction::zakharov: {
            double lin = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                s += z[i] * z[i];
                lin += 0.5 * static_cast<double>(i + 1) * z[i];
            }
            return s + lin * lin + lin * lin * lin * lin;
        }
        case BaseFunction::levy: {
            auto w = [&](std::size_t i) { return 1.0 + z[i] / 4.0; };
            const double s0 = std::sin(pi * w(0));
            s = s0 * s0;
            for (std::size_t i = 0; i + 1 < d; ++i) {
                const double wi = w(i);
                const double si = std::sin(pi * wi + 1.0);
                s += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * si * si);
            }
            const double wd = w(d - 1);
            const double sd = std::sin(2.0 * pi * wd);
            return s + (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
        }
    }
    return s;
}

struct ObjectiveSpec {
    std::string name;
    BaseFunction base = BaseFunction::sphere;
    std::size_t dim = 1;
    std::optional<Vector> shift;
    std::optional<Matrix> rotation;
    /// Seed the rotation was generated from; lets manifests stay small.
    std::optional<std::uint64_t> rotation_seed;
    double bias = 0.0;
};

inline double evaluate_objective(const ObjectiveSpec& spec, std::span<const double> x) {
    if (x.size() != spec.dim)
        throw std::invalid_argument("objective " + spec.name + ": expected " + std::to_string(spec.dim) +
                                    " coordinates, got " + std::to_string(x.size()));
    Vector z(x.begin(), x.end());
    if (spec.shift)
        for (std::size_t i = 0; i < z.size(); ++i) z[i] -= (*spec.shift)[i];
    if (spec.rotation) {
        const Matrix& q = *spec.rotation;
        Vector r(z.size(), 0.0);
        for (std::size_t i = 0; i < q.n; ++i)
            for (std::size_t j = 0; j < q.n; ++j) r[i] += q(i, j) * z[j];
        z = std::move(r);
    }
    return evaluate_base(spec.base, z) + spec.bias;
}

inline Objective make_objective(ObjectiveSpec spec) {
    return [s = std::move(spec)](std::span<const double> x) { return evaluate_objective(s, x); };
}

/// Q from the QR factorization of a standard-normal matrix, with columns
/// sign-flipped so that R has a positive diagonal. The Gaussian entries are
/// drawn in row-major order.
inline Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("random_orthogonal: dim must be >= 1");
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    Matrix out{dim, std::vector<double>(dim * dim)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = q(i, j);
    return out;
}

enum class SuiteKind { basic, shifted, shift_rotated };

inline std::string_view to_string(SuiteKind k) {
    switch (k) {
        case SuiteKind::basic: return "basic";
        case SuiteKind::shifted: return "shifted";
        case SuiteKind::shift_rotated: return "shift_rotated";
    }
    return "?";
}

inline SuiteKind parse_suite_kind(std::string_view s) {
    if (s == "basic") return SuiteKind::basic;
    if (s == "shifted") return SuiteKind::shifted;
    if (s == "shift_rotated") return SuiteKind::shift_rotated;
    throw std::invalid_argument("unknown suite kind: " + std::string(s));
}

struct SuiteSpec {
    std::string name;
    SuiteKind kind = SuiteKind::basic;
    std::size_t n_functions = 10;
    std::vector<std::size_t> dims;
    SearchSpace space{1, -100.0, 100.0};
    std::uint64_t seed = 0;
    /// All functions for all dims, grouped by dim in `dims` order.
    std::vector<ObjectiveSpec> functions;

    std::vector<const ObjectiveSpec*> functions_for(std::size_t dim) const {
        std::vector<const ObjectiveSpec*> out;
        for (const auto& f : functions)
            if (f.dim == dim) out.push_back(&f);
        return out;
    }
};

inline constexpr std::string_view kSuiteNote =
    "Classic analytic stand-ins for competition suites. A 10-function suite gives N = 250 Friedman "
    "blocks at 25 runs and a 29-function suite gives N = 725.";

/// Functions for one (kind, dim). Function j uses base j % 10 and variant
/// j / 10; variant v carries bias 100 v. Shifts are uniform in the central
/// 80% of the domain.
inline std::vector<ObjectiveSpec> build_functions(SuiteKind kind, std::size_t n_functions, std::size_t dim,
                                                  const SearchSpace& space, std::uint64_t seed) {
    space.validate();
    if (dim < 1) throw std::invalid_argument("build_suite: dim must be >= 1");
    if (n_functions > kAllBases.size() * kVariantsPerBase)
        throw std::invalid_argument("build_suite: at most " + std::to_string(kAllBases.size() * kVariantsPerBase) +
                                    " functions available");
    std::vector<ObjectiveSpec> out;
    const double margin = 0.1 * space.width();
    for (std::size_t j = 0; j < n_functions; ++j) {
        ObjectiveSpec s;
        s.base = kAllBases[j % kAllBases.size()];
        const std::size_t variant = j / kAllBases.size();
        s.name = std::string(to_string(s.base)) + (variant ? "#" + std::to_string(variant) : "");
        s.dim = dim;
        s.bias = 100.0 * static_cast<double>(variant);
        const std::uint64_t fseed = mix64(seed ^ mix64((std::uint64_t{dim} << 32) | j));
        if (kind != SuiteKind::basic) {
            Rng rng(fseed);
            Vector shift(dim);
            for (double& v : shift) v = rng.uniform(space.lower + margin, space.upper - margin);
            s.shift = std::move(shift);
        }
        if (kind == SuiteKind::shift_rotated) {
            s.rotation_seed = mix64(fseed);
            s.rotation = random_orthogonal(dim, *s.rotation_seed);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline SuiteSpec build_suite(std::string name, SuiteKind kind, std::size_t n_functions, std::vector<std::size_t> dims,
                             const SearchSpace& space, std::uint64_t seed) {
    SuiteSpec suite;
    suite.name = std::move(name);
    suite.kind = kind;
    suite.n_functions = n_functions;
    suite.dims = std::move(dims);
    suite.space = space;
    suite.seed = seed;
    for (std::size_t d : suite.dims) {
        auto fs = build_functions(kind, n_functions, d, space, seed);
        suite.functions.insert(suite.functions.end(), fs.begin(), fs.end());
    }
    return suite;
}

inline SuiteSpec build_suite(SuiteKind kind, std::size_t n_functions, std::size_t dim, const SearchSpace& space,
                             std::uint64_t seed) {
    return build_suite(std::string(to_string(kind)), kind, n_functions, {dim}, space, seed);
}

// ---------------------------------------------------------------------------
// Manifest (JSON)

inline nlohmann::json suite_to_manifest(const SuiteSpec& suite) {
    nlohmann::json j;
    j["name"] = suite.name;
    j["kind"] = to_string(suite.kind);
    j["n_functions"] = suite.n_functions;
    j["dims"] = suite.dims;
    j["lower"] = suite.space.lower;
    j["upper"] = suite.space.upper;
    j["seed"] = suite.seed;
    j["note"] = kSuiteNote;
    auto& fs = j["functions"] = nlohmann::json::array();
    for (const auto& f : suite.functions) {
        nlohmann::json e;
        e["name"] = f.name;
        e["base"] = to_string(f.base);
        e["dim"] = f.dim;
        e["bias"] = f.bias;
        e["shift"] = f.shift ? nlohmann::json(*f.shift) : nlohmann::json(nullptr);
        e["rotation_seed"] = f.rotation_seed ? nlohmann::json(*f.rotation_seed) : nlohmann::json(nullptr);
        fs.push_back(std::move(e));
    }
    return j;
}

/// Rebuilds a suite from its manifest; rotations are regenerated from their
/// seeds and re-checked for orthogonality.
inline SuiteSpec suite_from_manifest(const nlohmann::json& j) {
    SuiteSpec suite;
    suite.name = j.at("name").get<std::string>();
    suite.kind = parse_suite_kind(j.at("kind").get<std::string>());
    suite.n_functions = j.at("n_functions").get<std::size_t>();
    suite.dims = j.at("dims").get<std::vector<std::size_t>>();
    suite.seed = j.at("seed").get<std::uint64_t>();
    suite.space.lower = j.at("lower").get<double>();
    suite.space.upper = j.at("upper").get<double>();
    suite.space.dim = suite.dims.empty() ? 1 : suite.dims.front();
    suite.space.validate();
    for (const auto& e : j.at("functions")) {
        ObjectiveSpec f;
        f.name = e.at("name").get<std::string>();
        f.base = parse_base_function(e.at("base").get<std::string>());
        f.dim = e.at("dim").get<std::size_t>();
        f.bias = e.at("bias").get<double>();
        if (!e.at("shift").is_null()) {
            f.shift = e.at("shift").get<Vector>();
            if (f.shift->size() != f.dim) throw std::invalid_argument("manifest: shift length mismatch for " + f.name);
        }
        if (!e.at("rotation_seed").is_null()) {
            f.rotation_seed = e.at("rotation_seed").get<std::uint64_t>();
            f.rotation = random_orthogonal(f.dim, *f.rotation_seed);
            if (f.rotation->orthogonality_error() > 1e-10)
                throw std::invalid_argument("manifest: rotation for " + f.name + " is not orthogonal");
        }
        suite.functions.push_back(std::move(f));
    }
    return suite;
}

}  // namespace etof::bench
