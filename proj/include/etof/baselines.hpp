#pragma once

// Reference baselines used to give the statistics pipeline genuinely
// different rank profiles. They are generic textbook methods, not
// reproductions of any particular published variant.

#include "etof/core.hpp"

namespace etof {

/// Every agent jumps to a fresh uniform point each iteration.
class RandomSearch final : public Optimizer {
public:
    std::string name() const override { return "RandomSearch"; }

    void start(const Population&, const SearchSpace& space, std::size_t, Rng&) override { space_ = space; }

    Vector propose(std::size_t, std::size_t, const Population&, Rng& rng) override {
        Vector x(space_.dim);
        for (double& v : x) v = rng.uniform(space_.lower, space_.upper);
        return x;
    }

private:
    SearchSpace space_;
};

struct ParticleSwarmParams {
    double inertia_start = 0.9;
    double inertia_end = 0.4;
    double cognitive = 2.0;
    double social = 2.0;
    /// Velocity limit as a fraction of the domain width.
    double max_velocity_fraction = 0.2;
};

/// Global-best particle swarm with linearly decreasing inertia weight.
/// Draw order per agent: one cognitive and one social draw per coordinate,
/// interleaved by coordinate.
class ParticleSwarm final : public Optimizer {
public:
    explicit ParticleSwarm(ParticleSwarmParams params = {}) : params_(params) {}

    std::string name() const override { return "PSO"; }

    void start(const Population& pop, const SearchSpace& space, std::size_t budget, Rng&) override {
        space_ = space;
        budget_ = budget;
        velocity_.assign(pop.n_agents() * pop.dim(), 0.0);
        personal_.assign(pop.n_agents() * pop.dim(), 0.0);
        personal_fitness_.assign(pop.n_agents(), kInf);
        for (std::size_t i = 0; i < pop.n_agents(); ++i) {
            auto r = pop.row(i);
            std::copy(r.begin(), r.end(), personal_.begin() + static_cast<std::ptrdiff_t>(i * pop.dim()));
        }
        absorb(pop);
    }

    Vector propose(std::size_t agent, std::size_t t, const Population& pop, Rng& rng) override {
        const std::size_t d = pop.dim();
        const double progress = budget_ > 1 ? static_cast<double>(t - 1) / static_cast<double>(budget_ - 1) : 1.0;
        const double w = params_.inertia_start + (params_.inertia_end - params_.inertia_start) * progress;
        const double vmax = params_.max_velocity_fraction * space_.width();
        auto x = pop.row(agent);
        auto g = pop.best_position();
        Vector next(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double r_c = rng.uniform();
            const double r_s = rng.uniform();
            double& v = velocity_[agent * d + j];
            v = w * v + params_.cognitive * r_c * (personal_[agent * d + j] - x[j]) +
                params_.social * r_s * (g[j] - x[j]);
            v = std::clamp(v, -vmax, vmax);
            next[j] = x[j] + v;
        }
        return next;
    }

    void end_iteration(std::size_t, const Population& pop) override { absorb(pop); }

private:
    void absorb(const Population& pop) {
        const std::size_t d = pop.dim();
        for (std::size_t i = 0; i < pop.n_agents(); ++i) {
            if (pop.fitness()[i] < personal_fitness_[i]) {
                personal_fitness_[i] = pop.fitness()[i];
                auto r = pop.row(i);
                std::copy(r.begin(), r.end(), personal_.begin() + static_cast<std::ptrdiff_t>(i * d));
            }
        }
    }

    ParticleSwarmParams params_;
    SearchSpace space_;
    std::size_t budget_ = 1;
    Vector velocity_;
    Vector personal_;
    Vector personal_fitness_;
};

}  // namespace etof
