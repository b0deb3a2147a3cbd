#pragma once

#include <cstdint>
#include <random>

namespace etof {

/// splitmix64 finalizer. A bijection on 64-bit words, so distinct inputs
/// always map to distinct outputs.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Per-run seed. The indices are packed into disjoint bit fields
/// (16 | 16 | 32 bits) before mixing, so for a fixed master seed two
/// different (algorithm, function, run) triples never share a seed as long
/// as the indices fit their fields.
constexpr std::uint64_t derive_run_seed(std::uint64_t master, std::uint32_t algorithm,
                                        std::uint32_t function, std::uint32_t run) noexcept {
    const std::uint64_t packed = (std::uint64_t{algorithm & 0xffffU} << 48) |
                                 (std::uint64_t{function & 0xffffU} << 32) | std::uint64_t{run};
    return mix64(mix64(master) ^ packed);
}

/// Seeded random source shared by every stochastic routine.
///
/// uniform() maps the top 53 bits of one engine output onto [0, 1), which is
/// exact and independent of the standard library's distribution code. Every
/// call to uniform() is counted; the ETO kernel's draw-budget contract is
/// tested against this counter.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() noexcept {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() { return normal_(engine_); }

    std::uint64_t next_u64() noexcept { return engine_(); }

    std::uint64_t draws() const noexcept { return draws_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uint64_t draws_ = 0;
};

}  // namespace etof
