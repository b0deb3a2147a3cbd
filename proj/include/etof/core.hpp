#pragma once

// Search space, population and the optimizer plug-in contract shared by
// every algorithm in the toolkit, plus the evaluation loop that drives them.
//
// Conventions:
// - minimization everywhere; callers negate to maximize
// - the best-so-far record only moves on a strictly smaller fitness, so
//   ties keep the incumbent and curves are nonincreasing
// - a non-finite objective value is stored as +inf and the run continues

#include "etof/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace etof {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Vector = std::vector<double>;
using Objective = std::function<double(std::span<const double>)>;

/// Box domain with the same scalar bounds on every coordinate.
struct SearchSpace {
    std::size_t dim = 1;
    double lower = 0.0;
    double upper = 1.0;

    double width() const noexcept { return upper - lower; }

    void validate() const {
        if (dim < 1) throw std::invalid_argument("search space: dim must be >= 1");
        if (!std::isfinite(lower) || !std::isfinite(upper))
            throw std::invalid_argument("search space: bounds must be finite");
        if (lower > upper) throw std::invalid_argument("search space: lower > upper");
    }

    bool contains(std::span<const double> x) const noexcept {
        return std::all_of(x.begin(), x.end(), [&](double v) { return v >= lower && v <= upper; });
    }
};

/// Agent positions (row-major, n_agents x dim) with fitness and best-so-far.
class Population {
public:
    Population() = default;
    Population(std::size_t n_agents, std::size_t dim)
        : n_agents_(n_agents), dim_(dim), positions_(n_agents * dim, 0.0), fitness_(n_agents, kInf),
          best_position_(dim, 0.0) {}

    std::size_t n_agents() const noexcept { return n_agents_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<double> row(std::size_t i) noexcept { return {positions_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {positions_.data() + i * dim_, dim_};
    }

    std::span<double> fitness() noexcept { return fitness_; }
    std::span<const double> fitness() const noexcept { return fitness_; }

    std::span<const double> best_position() const noexcept { return best_position_; }
    double best_fitness() const noexcept { return best_fitness_; }
    bool evaluated() const noexcept { return evaluated_; }

    /// Adopt agent i as the incumbent iff its fitness is strictly smaller.
    bool offer_best(std::size_t i) {
        if (fitness_[i] < best_fitness_) {
            best_fitness_ = fitness_[i];
            auto r = row(i);
            std::copy(r.begin(), r.end(), best_position_.begin());
            return true;
        }
        return false;
    }

    void mark_evaluated() noexcept { evaluated_ = true; }

private:
    std::size_t n_agents_ = 0;
    std::size_t dim_ = 0;
    Vector positions_;
    Vector fitness_;
    Vector best_position_;
    double best_fitness_ = kInf;
    bool evaluated_ = false;
};

/// Best-so-far history of a single run.
struct RunRecord {
    Vector curve;
    double final_fitness = kInf;
    std::uint64_t seed = 0;
    std::uint64_t evaluations = 0;
};

enum class BoundaryMode { none, clamp, reflect, resample };

struct BoundaryPolicy {
    BoundaryMode mode = BoundaryMode::clamp;
};

inline std::string_view to_string(BoundaryMode m) {
    switch (m) {
        case BoundaryMode::none: return "none";
        case BoundaryMode::clamp: return "clamp";
        case BoundaryMode::reflect: return "reflect";
        case BoundaryMode::resample: return "resample";
    }
    return "?";
}

inline BoundaryMode parse_boundary_mode(std::string_view s) {
    if (s == "none") return BoundaryMode::none;
    if (s == "clamp") return BoundaryMode::clamp;
    if (s == "reflect") return BoundaryMode::reflect;
    if (s == "resample") return BoundaryMode::resample;
    throw std::invalid_argument("unknown boundary policy: " + std::string(s));
}

/// Uniform initialization, one independent draw per coordinate in row order.
inline Population init_population(const SearchSpace& space, std::size_t n_agents, Rng& rng) {
    space.validate();
    if (n_agents < 1) throw std::invalid_argument("init_population: n_agents must be >= 1");
    Population pop(n_agents, space.dim);
    for (std::size_t i = 0; i < n_agents; ++i)
        for (double& v : pop.row(i)) v = rng.uniform() * space.width() + space.lower;
    return pop;
}

inline double safe_evaluate(const Objective& objective, std::span<const double> x) {
    const double f = objective(x);
    return std::isfinite(f) ? f : kInf;
}

/// Evaluate every agent, then offer each (in index order) as the new best.
inline void evaluate(const Objective& objective, Population& pop) {
    for (std::size_t i = 0; i < pop.n_agents(); ++i) pop.fitness()[i] = safe_evaluate(objective, pop.row(i));
    for (std::size_t i = 0; i < pop.n_agents(); ++i) pop.offer_best(i);
    pop.mark_evaluated();
}

/// In-place boundary repair. Only `resample` consumes random draws, one per
/// violated coordinate.
inline void apply_boundary(std::span<double> x, const SearchSpace& space, BoundaryPolicy policy, Rng& rng) {
    const double lo = space.lower;
    const double hi = space.upper;
    switch (policy.mode) {
        case BoundaryMode::none: return;
        case BoundaryMode::clamp:
            for (double& v : x) v = std::clamp(v, lo, hi);
            return;
        case BoundaryMode::reflect:
            for (double& v : x) {
                if (v > hi) v = hi - (v - hi);
                else if (v < lo) v = lo + (lo - v);
                v = std::clamp(v, lo, hi);
            }
            return;
        case BoundaryMode::resample:
            for (double& v : x)
                if (!(v >= lo && v <= hi)) v = rng.uniform(lo, hi);
            return;
    }
}

inline Vector apply_boundary(Vector x, const SearchSpace& space, BoundaryPolicy policy, Rng& rng) {
    apply_boundary(std::span<double>(x), space, policy, rng);
    return x;
}

/// When the incumbent is refreshed: after the whole population moved
/// (synchronous) or after every single agent (asynchronous).
enum class BestUpdate { synchronous, asynchronous };

/// Optimizer plug-in. One instance serves one run at a time; start() resets
/// all internal state. Per iteration the loop calls begin_iteration(), then
/// propose() once per agent in index order, then end_iteration() after the
/// new positions have been evaluated.
class Optimizer {
public:
    virtual ~Optimizer() = default;

    virtual std::string name() const = 0;

    virtual void start(const Population& /*pop*/, const SearchSpace& /*space*/, std::size_t /*budget*/,
                       Rng& /*rng*/) {}

    virtual void begin_iteration(std::size_t /*t*/, const Population& /*pop*/, Rng& /*rng*/) {}

    /// New position for `agent` at iteration t (1-based).
    virtual Vector propose(std::size_t agent, std::size_t t, const Population& pop, Rng& rng) = 0;

    virtual void end_iteration(std::size_t /*t*/, const Population& /*pop*/) {}
};

using OptimizerFactory = std::function<std::unique_ptr<Optimizer>()>;

struct LoopOptions {
    BoundaryPolicy boundary{};
    BestUpdate best_update = BestUpdate::synchronous;
};

/// Raised when a plug-in hands back an unusable position.
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_proposal(const Optimizer& opt, const Vector& x, std::size_t dim, std::size_t agent,
                           std::size_t t) {
    if (x.size() != dim)
        throw RunError(opt.name() + ": agent " + std::to_string(agent) + " at t=" + std::to_string(t) +
                       " has " + std::to_string(x.size()) + " coordinates, expected " + std::to_string(dim));
    for (double v : x)
        if (!std::isfinite(v))
            throw RunError(opt.name() + ": agent " + std::to_string(agent) + " at t=" + std::to_string(t) +
                           " left a non-finite coordinate after boundary handling");
}

}  // namespace detail

/// One iteration of the evaluation loop. Returns the number of objective calls.
inline std::uint64_t iterate(Optimizer& opt, const Objective& objective, Population& pop, std::size_t t,
                             const SearchSpace& space, const LoopOptions& options, Rng& rng) {
    const std::size_t n = pop.n_agents();
    opt.begin_iteration(t, pop, rng);
    if (options.best_update == BestUpdate::synchronous) {
        std::vector<Vector> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = opt.propose(i, t, pop, rng);
            if (next[i].size() == space.dim) apply_boundary(std::span<double>(next[i]), space, options.boundary, rng);
            detail::check_proposal(opt, next[i], space.dim, i, t);
        }
        for (std::size_t i = 0; i < n; ++i) std::copy(next[i].begin(), next[i].end(), pop.row(i).begin());
        evaluate(objective, pop);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            Vector x = opt.propose(i, t, pop, rng);
            if (x.size() == space.dim) apply_boundary(std::span<double>(x), space, options.boundary, rng);
            detail::check_proposal(opt, x, space.dim, i, t);
            std::copy(x.begin(), x.end(), pop.row(i).begin());
            pop.fitness()[i] = safe_evaluate(objective, pop.row(i));
            pop.offer_best(i);
        }
    }
    opt.end_iteration(t, pop);
    return n;
}

/// Full run: initialize, evaluate, then `budget` iterations. The curve holds
/// the best-so-far fitness after each iteration.
inline RunRecord run_optimizer(Optimizer& opt, const Objective& objective, const SearchSpace& space,
                               std::size_t n_agents, std::size_t budget, std::uint64_t seed,
                               const LoopOptions& options = {}) {
    if (budget < 1) throw std::invalid_argument("run_optimizer: budget must be >= 1");
    Rng rng(seed);
    Population pop = init_population(space, n_agents, rng);
    evaluate(objective, pop);
    RunRecord rec;
    rec.seed = seed;
    rec.evaluations = n_agents;
    rec.curve.reserve(budget);
    opt.start(pop, space, budget, rng);
    for (std::size_t t = 1; t <= budget; ++t) {
        rec.evaluations += iterate(opt, objective, pop, t, space, options, rng);
        rec.curve.push_back(pop.best_fitness());
    }
    rec.final_fitness = rec.curve.back();
    return rec;
}

}  // namespace etof
