#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace nhkl::seq {

/// A positive increasing sequence M_j together with the exponent q of the
/// growth functional Lambda_j = (M_j - M_{j-1}) / M_j^q.
///
/// Both the value and the increment are supplied in log space: for slowly
/// growing sequences the increment underflows the value scale long before
/// it underflows the representable range (saturating families reach
/// increments of 2^-j), and the functional itself is a ratio of such
/// quantities.  Closed-form log increments keep every family evaluable at
/// any index a 64-bit integer can hold.
struct SequenceSpec {
    std::function<long double(long)> log_value;  // ln M_j, j >= 1
    std::function<long double(long)> log_diff;   // ln(M_j - M_{j-1}), j >= 1
    double q = 2.0;
    std::string label;
};

/// Wraps a plain generator j -> M_j; increments come from extended
/// precision subtraction, so cancellation limits accuracy once increments
/// drop below ~1e-18 of the value.  Prefer closed-form log increments.
SequenceSpec from_generator(std::function<long double(long)> gen, double q,
                            std::string label);

/// Linear, quadratic, geometric, bounded-saturating and logarithmic
/// growth families, each with exact log-space increments.
std::vector<SequenceSpec> builtin_suite(double q = 2.0);

struct TracePoint {
    long j = 0;
    double lambda = 0.0;       // Lambda_j
    double j_lambda = 0.0;     // weighted value at j (see producing op)
    double running_min = 0.0;  // min of the weighted value up to j
};

struct SequenceTrace {
    std::string label;
    double q = 0.0;
    long J = 0;
    std::vector<TracePoint> points;  // decimated; includes decades and J
    double final_running_min = 0.0;

    /// Sampled point with exactly this index, or nullptr.
    const TracePoint* at(long j) const;
};

/// Evaluates j * Lambda_j for every j in [1, J] and traces the running
/// minimum.  The trace is decimated (all j <= 128, geometric stride
/// afterwards, every power of ten, and J itself) but the minimum is exact.
SequenceTrace running_min_jlambda(const SequenceSpec& spec, long J);

/// Weighted probe j^(1+eps) * Lambda_j for the logarithmic family
/// M_j = ln(j+1) on a geometric sample grid up to J.  Closed forms make
/// any 64-bit index reachable; the running minimum is over samples only,
/// which is exact wherever the probe is monotone between samples.
/// eps = 0 reduces to the unweighted functional.
SequenceTrace sharpness_probe(double eps, long J, double q = 2.0);

/// Outcome of driving the reciprocal recursion that underlies the
/// no-uniform-lower-bound argument: if j * Lambda_j >= eps on all of
/// [N, J], then x_j = eps * M_j^(qt-1) with qt = min(q, 2) satisfies
/// 1/x_{j-1} >= 1/x_j + (qt-1)/j, and summing forces
/// 1/x_{N-1} >= 1/x_J + (qt-1) * (1/N + ... + 1/J).
struct ContradictionReport {
    bool premise_holds = false;     // j * Lambda_j >= eps throughout [N, J]
    long first_premise_failure = 0;  // smallest violating j, 0 if none
    bool scale_ok = false;          // M_{N-1} >= 1 (needed when q > 2)
    bool recursion_verified = false;
    bool bound_holds = false;       // telescoped inequality
    double lhs = 0.0;               // 1/x_{N-1}
    double rhs = 0.0;               // 1/x_J + (qt-1) * harmonic
    double harmonic = 0.0;          // sum of 1/j over [N, J]
    double min_margin = 0.0;        // worst stepwise recursion slack
};

ContradictionReport contradiction_probe(const SequenceSpec& spec, double eps,
                                        long N, long J);

/// Writes "j,lambda,j_lambda,running_min" rows, full double precision.
void write_csv(std::ostream& os, const SequenceTrace& trace);

}  // namespace nhkl::seq
