#include "nhkl/seqlab.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "nhkl/util.hpp"

namespace nhkl::seq {

namespace {

constexpr long double kLn2l = 0.69314718055994530942L;

// NaN or -inf marks a nonpositive increment or value, i.e. a sequence
// that is not strictly increasing and positive.  Genuine magnitude
// underflow never occurs in log space.
long double checked_log_diff(const SequenceSpec& spec, long j) {
    long double d = spec.log_diff(j);
    if (std::isnan(d) || std::isinf(d))
        throw std::invalid_argument(
            "sequence '" + spec.label +
            "' is not strictly increasing at j = " + std::to_string(j));
    return d;
}

long double checked_log_value(const SequenceSpec& spec, long j) {
    long double v = spec.log_value(j);
    if (std::isnan(v) || std::isinf(v))
        throw std::invalid_argument("sequence '" + spec.label +
                                    "' is not positive at j = " +
                                    std::to_string(j));
    return v;
}

long double ln_lambda(const SequenceSpec& spec, long j) {
    return checked_log_diff(spec, j) -
           static_cast<long double>(spec.q) * checked_log_value(spec, j);
}

constexpr long kPowersOfTen[] = {
    10L,
    100L,
    1000L,
    10000L,
    100000L,
    1000000L,
    10000000L,
    100000000L,
    1000000000L,
    10000000000L,
    100000000000L,
    1000000000000L,
    10000000000000L,
    100000000000000L,
    1000000000000000L,
    10000000000000000L,
    100000000000000000L,
    1000000000000000000L,
};

bool is_power_of_ten(long j) {
    for (long p : kPowersOfTen)
        if (p == j) return true;
    return false;
}

long next_power_of_ten(long j) {
    for (long p : kPowersOfTen)
        if (p > j) return p;
    return std::numeric_limits<long>::max();
}

}  // namespace

SequenceSpec from_generator(std::function<long double(long)> gen, double q,
                            std::string label) {
    require(static_cast<bool>(gen), "generator must be callable");
    require(q > 1.0, "exponent must exceed 1");
    SequenceSpec spec;
    spec.q = q;
    spec.label = std::move(label);
    spec.log_value = [gen](long j) { return std::log(gen(j)); };
    spec.log_diff = [gen](long j) { return std::log(gen(j) - gen(j - 1)); };
    return spec;
}

std::vector<SequenceSpec> builtin_suite(double q) {
    require(q > 1.0, "exponent must exceed 1");
    std::vector<SequenceSpec> suite;
    auto add = [&](const char* label, std::function<long double(long)> lv,
                   std::function<long double(long)> ld) {
        SequenceSpec s;
        s.q = q;
        s.label = label;
        s.log_value = std::move(lv);
        s.log_diff = std::move(ld);
        suite.push_back(std::move(s));
    };
    add(
        "linear", [](long j) { return std::log(static_cast<long double>(j)); },
        [](long) { return 0.0L; });
    add(
        "quadratic",
        [](long j) { return 2.0L * std::log(static_cast<long double>(j)); },
        [](long j) {
            return std::log(static_cast<long double>(2 * j - 1));
        });
    const long double lnr = std::log(1.0005L);
    add(
        "geometric", [lnr](long j) { return j * lnr; },
        [lnr](long j) {
            return (j - 1) * lnr + std::log(std::expm1(lnr));
        });
    add(
        "saturating",
        [](long j) { return std::log(2.0L - std::exp(-j * kLn2l)); },
        [](long j) { return -j * kLn2l; });
    add(
        "logarithmic",
        [](long j) {
            return std::log(std::log1p(static_cast<long double>(j)));
        },
        [](long j) { return std::log(std::log1p(1.0L / j)); });
    return suite;
}

const TracePoint* SequenceTrace::at(long j) const {
    for (const auto& p : points)
        if (p.j == j) return &p;
    return nullptr;
}

SequenceTrace running_min_jlambda(const SequenceSpec& spec, long J) {
    require(J >= 2, "window must reach at least j = 2");
    require(spec.q > 1.0, "exponent must exceed 1");
    SequenceTrace trace;
    trace.label = spec.label;
    trace.q = spec.q;
    trace.J = J;
    double run_min = std::numeric_limits<double>::infinity();
    long next_sample = 1;
    for (long j = 1; j <= J; ++j) {
        long double lnl = ln_lambda(spec, j);
        double jl = static_cast<double>(
            std::exp(std::log(static_cast<long double>(j)) + lnl));
        run_min = std::min(run_min, jl);
        if (j >= next_sample || j == J || is_power_of_ten(j)) {
            trace.points.push_back({j, static_cast<double>(std::exp(lnl)),
                                    jl, run_min});
            if (j >= next_sample)
                next_sample =
                    j < 128 ? j + 1 : std::max(j + 1, j + j / 20);
        }
    }
    trace.final_running_min = run_min;
    return trace;
}

SequenceTrace sharpness_probe(double eps, long J, double q) {
    require(eps >= 0.0, "weight exponent must be nonnegative");
    require(J >= 2, "window must reach at least j = 2");
    require(q > 1.0, "exponent must exceed 1");
    SequenceSpec log_family;
    for (auto& s : builtin_suite(q))
        if (s.label == "logarithmic") log_family = std::move(s);
    char buf[64];
    std::snprintf(buf, sizeof buf, "logarithmic^(1+%g)", eps);
    SequenceTrace trace;
    trace.label = buf;
    trace.q = q;
    trace.J = J;
    double run_min = std::numeric_limits<double>::infinity();
    long j = 1;
    while (true) {
        long double lnl = ln_lambda(log_family, j);
        double v = static_cast<double>(std::exp(
            (1.0L + static_cast<long double>(eps)) *
                std::log(static_cast<long double>(j)) +
            lnl));
        run_min = std::min(run_min, v);
        trace.points.push_back(
            {j, static_cast<double>(std::exp(lnl)), v, run_min});
        if (j >= J) break;
        // Saturating stride: the geometric step must not wrap past J when J
        // sits near the top of the index range.
        long stride = j < 128 ? 1 : std::max<long>(1, j / 20);
        long next = j > std::numeric_limits<long>::max() - stride
                        ? std::numeric_limits<long>::max()
                        : j + stride;
        next = std::min(next, next_power_of_ten(j));
        j = std::min(next, J);
    }
    trace.final_running_min = run_min;
    return trace;
}

ContradictionReport contradiction_probe(const SequenceSpec& spec, double eps,
                                        long N, long J) {
    require(N >= 2, "window must start at j >= 2");
    require(J > N, "window must contain more than one index");
    require(eps > 0.0, "assumed lower bound must be positive");
    double qt = std::min(spec.q, 2.0);
    long double ln_eps = std::log(static_cast<long double>(eps));
    auto inv_x = [&](long j) {
        // 1 / (eps * M_j^(qt-1))
        return static_cast<double>(std::exp(
            -ln_eps -
            (static_cast<long double>(qt) - 1.0L) *
                checked_log_value(spec, j)));
    };

    ContradictionReport rep;
    rep.scale_ok =
        static_cast<double>(checked_log_value(spec, N - 1)) >= 0.0;
    rep.premise_holds = true;
    rep.recursion_verified = true;
    rep.min_margin = std::numeric_limits<double>::infinity();
    rep.lhs = inv_x(N - 1);

    KahanSum harmonic;
    double prev_inv = rep.lhs;
    for (long j = N; j <= J; ++j) {
        long double ln_jl =
            std::log(static_cast<long double>(j)) + ln_lambda(spec, j);
        if (rep.premise_holds &&
            static_cast<double>(ln_jl) <
                std::log(eps) - 1e-12) {
            rep.premise_holds = false;
            rep.first_premise_failure = j;
        }
        double cur_inv = inv_x(j);
        double margin = prev_inv - cur_inv - (qt - 1.0) / j;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9 * std::abs(prev_inv))
            rep.recursion_verified = false;
        harmonic.add(1.0 / j);
        prev_inv = cur_inv;
    }
    rep.harmonic = harmonic.value();
    rep.rhs = prev_inv + (qt - 1.0) * rep.harmonic;
    rep.bound_holds = rep.lhs >= rep.rhs * (1.0 - 1e-12);
    return rep;
}

void write_csv(std::ostream& os, const SequenceTrace& trace) {
    os << "j,lambda,j_lambda,running_min\n";
    for (const auto& p : trace.points)
        os << p.j << ',' << format_double(p.lambda) << ','
           << format_double(p.j_lambda) << ','
           << format_double(p.running_min) << '\n';
}

}  // namespace nhkl::seq
