#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace rdlocal {

namespace detail {

// SplitMix64 finalizer. Full-avalanche 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Counter-based generator keyed by (seed, stream). Output is a pure
/// function of (seed, stream, call index), so draws keyed by different
/// streams are reproducible independent of evaluation order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : base_(detail::mix64(detail::mix64(seed) ^ (stream * 0xd1342543de82ef95ULL))),
          counter_(0) {}

    std::uint64_t next_u64() noexcept {
        return detail::mix64(base_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    /// Uniform double in [0, 1), 53 bits of randomness.
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform01();
    }

    /// Unbiased uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound) noexcept {
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % bound;
        } while (x - r > std::numeric_limits<std::uint64_t>::max() - (bound - 1));
        return r;
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

    /// Standard normal deviate (Box-Muller, one value per call).
    double normal() noexcept {
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Derive a child stream id; used to give nested loops (reps, cells,
    /// draws) their own independent key space.
    static std::uint64_t derive_stream(std::uint64_t stream, std::uint64_t salt) noexcept {
        return detail::mix64(stream ^ (salt * 0x2545f4914f6cdd1dULL));
    }

private:
    std::uint64_t base_;
    std::uint64_t counter_;
};

} // namespace rdlocal
