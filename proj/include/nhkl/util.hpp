#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhkl {

/// Compensated accumulator; keeps the running error term so that long
/// slowly-decaying sums stay accurate to near machine precision.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y ~ intercept + slope*x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Least squares in log-log coordinates; inputs must be positive.
LinearFit log_log_fit(std::span<const double> x, std::span<const double> y);

/// Deterministic uniform stream.  The mapping from engine output to [0,1)
/// is fixed here (top 53 bits) so results do not depend on the standard
/// library's distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// Shortest decimal that parses back to exactly v; used for all emitted
/// numbers, so identical inputs produce byte-identical files.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace nhkl
