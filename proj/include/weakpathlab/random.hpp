#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "weakpathlab/core_paths.hpp"

namespace wpl {

/// Identifies one reproducible random stream.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// SplitMix64 finalizer; the keyed hash behind every stream.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(const SeedSpec& s) noexcept {
    return mix64(mix64(s.master_seed) ^ mix64(s.stream_id ^ 0x5851f42d4c957f2dULL));
}

/// Child stream `index` of `parent`. Chains give (outer, inner, purpose) keys.
constexpr SeedSpec substream(const SeedSpec& parent, std::uint64_t index) noexcept {
    return SeedSpec{stream_key(parent), index};
}

/// xoshiro256++ seeded from stream_key(seed). Models UniformRandomBitGenerator.
class StreamEngine {
public:
    using result_type = std::uint64_t;

    explicit StreamEngine(const SeedSpec& seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform_open() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

/// Standard normal draw (128-layer ziggurat); a pure function of the engine state.
double standard_normal(StreamEngine& engine) noexcept;

void fill_standard_normal(StreamEngine& engine, std::span<double> out) noexcept;

/// Brownian increments W(tau_{k+1}) - W(tau_k) for every interval, drawn in order.
void sample_increments(const TimeGrid& grid, const SeedSpec& seed, std::span<double> out);

/// Increments for slots first..N-1, drawn from the last slot backwards.
///
/// Streams for continuations started at different nodes share every slot
/// they both cover, which gives common random numbers across start times.
void sample_increments_backward(const TimeGrid& grid, const SeedSpec& seed, std::size_t first,
                                std::span<double> out);

/// A sampled Wiener path: Linear mode, W(0) = 0.
class BrownianPath {
public:
    explicit BrownianPath(DiscretePath path);

    const DiscretePath& path() const noexcept { return path_; }
    const TimeGrid& grid() const noexcept { return path_.grid(); }
    const GridPtr& grid_ptr() const noexcept { return path_.grid_ptr(); }
    double value(std::size_t k) const { return path_.value(k); }
    Eigen::VectorXd increments() const;

private:
    DiscretePath path_;
};

BrownianPath brownian_from_increments(GridPtr grid, std::span<const double> increments);
BrownianPath sample_brownian(GridPtr grid, const SeedSpec& seed);

/// Fills the nodes of `fine` that are missing from w's grid by Brownian-bridge
/// bisection, breadth first over all coarse intervals. Coarse values are kept.
BrownianPath refine_brownian(const BrownianPath& w, GridPtr fine, const SeedSpec& seed);

}  // namespace wpl
