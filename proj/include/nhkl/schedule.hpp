#pragma once

#include <string>
#include <vector>

#include "nhkl/geometry.hpp"

namespace nhkl::sched {

enum class Mode { global, capped };

/// Auxiliary series sum over m >= 0 of 1/((1+m)(1+lambda m)^s).
/// Decreasing bijection (0, inf) -> (1, inf).  Direct summation of the
/// head plus an integral tail with endpoint corrections; the result is
/// accurate to well below any meaningful tol.
double g_s(double lambda, double s, double tol = 1e-10);

/// g_s(lambda) - 1, computed without cancellation (the m = 0 term is
/// exactly 1); needed when the cap barely exceeds the initial supremum.
double g_s_excess(double lambda, double s, double tol = 1e-10);

/// Inverse of g_s at ratio = B/M0 via bisection in log(lambda), terminating
/// when |g_s(lambda) - ratio| < tol.  Ratios so large that the solution
/// drops below the representable range (about ratio > 690) flush to zero,
/// which downstream formulas treat as the exact B -> infinity limit; in
/// double precision any lambda below 1e-17 is indistinguishable from it.
double lambda_b(double ratio, double s, double tol = 1e-10);

/// Same inversion stated in terms of the cap and the initial supremum.
double lambda_b(double cap, double m0, double s, double tol);

struct PipelineInput {
    Mode mode = Mode::global;
    int n = 2;
    double q = 2.0;
    double beta = 2.0;
    double M0 = 1.0;
    double gamma1_area = 0.1;
    double c_hat = 1.0;        // calibrated growth-bound constant
    double B = 0.0;            // capped mode only, > M0
    double alpha_override = 0.0;  // 0 = midpoint default
    double s_override = 0.0;      // 0 = midpoint default (capped)
};

struct ScheduleConstants {
    Mode mode = Mode::global;
    int n = 2;
    double q = 0.0, beta = 0.0, M0 = 0.0, gamma1_area = 0.0, c_hat = 0.0;
    double B = 0.0;         // capped only
    double s = 0.0;         // capped only
    double lambda_B = 0.0;  // capped only
    double alpha = 0.0;
    double alpha_tilde = 0.0;
    double Y = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C3 = 0.0;
    double t_star = 0.0;
    double C_star = 0.0;
    double induction_infimum = 0.0;  // inf_j of the divergent factor

    geo::DecayProfile profile() const;
    double milestone(long k) const;
    std::string to_json() const;
};

/// Runs the full constant pipeline for the requested mode.
ScheduleConstants build_constants(const PipelineInput& in);

struct MilestoneSequence {
    Mode mode = Mode::global;
    double M0 = 0.0;
    double lambda_B = 0.0;  // capped only
    double s = 0.0;         // capped only
    double cap = 0.0;       // capped only: the supremum B
    std::vector<double> values;  // index 0..k_max
};

MilestoneSequence milestones(const ScheduleConstants& c, long k_max);

struct EndBehaviorPoint {
    double B = 0.0;
    double lambda_B = 0.0;
    double c_star = 0.0;
};

struct EndBehaviorReport {
    std::vector<EndBehaviorPoint> points;  // ordered by increasing B
    double divergence_ratio = 0.0;  // first c_star over last
    double plateau_ratio = 0.0;     // |last/second-to-last - 1|
    std::string to_json() const;
};

/// Sweeps the cap through the supplied values (increasing) with every
/// other input fixed; quantifies the divergence toward B -> M0+ and the
/// plateau toward B -> infinity.
EndBehaviorReport verify_schedule_end_behavior(const PipelineInput& base,
                                               const std::vector<double>&
                                                   caps);

}  // namespace nhkl::sched
