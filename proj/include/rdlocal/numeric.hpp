#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace rdlocal {

/// Neumaier compensated accumulator. Keeps window/block sum identities tight
/// so decomposition checks hold to ~1e-15 instead of n*eps.
class KahanSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty range");
    return compensated_sum(xs) / static_cast<double>(xs.size());
}

/// Binomial coefficient as a double (exact for the sizes enumerated here).
inline double choose(std::size_t n, std::size_t k) noexcept {
    if (k > n) return 0.0;
    if (k > n - k) k = n - k;
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

/// Shortest round-trip decimal representation; keeps emitted tables
/// byte-stable across reruns.
inline std::string dtos(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

} // namespace rdlocal
