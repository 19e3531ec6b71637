#pragma once

#include <array>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhkl/geometry.hpp"

namespace nhkl::solver {

enum class Scheme { implicit_euler, crank_nicolson };

struct SolverConfig {
    double q = 2.0;                  // boundary flux power, must be > 1
    Scheme scheme = Scheme::implicit_euler;
    double dt_init = 1e-3;           // initial and maximum step size
    double dt_min = 1e-10;           // below this a rejection cascade stops
    double blowup_threshold = 1e8;   // U_max; blowup needs M >= this too
    double newton_tol = 1e-10;       // relative residual target per step
    int newton_max_iter = 30;
};

/// Nodal temperature field.  Boxes use a vertex-centred (n1+1) x (n2+1)
/// grid with node (i,j) at (i*a/n1, j*b/n2) and index j*(n1+1)+i.  The
/// disk uses one centre node (index 0) followed by n1 rings of n2 nodes,
/// ring i at radius i/n1, node (i,j) at angle 2*pi*j/n2 with index
/// 1 + (i-1)*n2 + j.  3D boxes are not discretised here; every study in
/// this laboratory runs in the plane.
struct GridField {
    geo::Domain domain = geo::Domain::box(1.0, 1.0);
    int n1 = 0;
    int n2 = 0;
    std::vector<double> values;
    double time = 0.0;

    std::size_t size() const { return values.size(); }
    double max_value() const;
};

/// Samples u0 at the node positions.  Requires n1, n2 >= 2 and finite
/// samples; throws std::invalid_argument for 3D boxes.
GridField make_field(const geo::Domain& domain, int n1, int n2,
                     const std::function<double(double, double)>& u0);

/// Cartesian coordinates of node `id` (disk nodes are mapped from polar).
std::array<double, 2> node_position(const GridField& field, std::size_t id);

/// One radiating boundary cell at a fixed time.  `chi` is the snapped
/// coverage weight: 1 for a cell inside the radiating region, 1/2 for a
/// cell the interface crosses (the node sits within half a cell of it),
/// 0 otherwise (not listed).  `coefficient` is the factor multiplying u^q
/// in the node's semi-discrete equation; quad_weight * coefficient equals
/// the cell's share of the boundary line integral.  A box corner node can
/// carry one entry per adjacent edge.
struct BoundaryNodeInfo {
    int id = 0;
    double chi = 0.0;
    double coefficient = 0.0;
    double quad_weight = 0.0;
};

struct TraceSample {
    double t = 0.0;
    double m_running = 0.0;  // running maximum of max u up to t
    double area = 0.0;       // radiating measure at t
    double mass = 0.0;       // quadrature of u over the domain
    double dt = 0.0;         // step that produced this sample (0 at t = 0)
};

enum class Verdict { completed, blowup };

struct RunReport {
    Verdict verdict = Verdict::completed;
    double t_star = 0.0;     // last resolved time (= horizon when completed)
    double m0 = 0.0;
    double q = 2.0;
    int dimension = 2;
    double area0 = 0.0;
    std::string resolution;  // e.g. "box2d 64x64" or "disk 48x96"
    std::string schedule;
    std::vector<TraceSample> trace;
    GridField final_field;

    /// Running maximum at time t (step function through the trace).
    double m_at(double t) const;
    std::string to_json() const;
    /// CSV with header t,M,A,mass.
    void write_trace_csv(std::ostream& out) const;
};

/// Signals a Newton failure inside step(); callers halve dt and retry.
class StepRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Advances a field through the theta scheme (implicit Euler or
/// Crank-Nicolson) with the nonlinear radiation closure solved by Newton.
/// The implicit side always evaluates the radiating set at the new time.
/// Owns the sparse operator and reuses factorisations across steps with
/// the same dt, so repeated stepping is much cheaper than isolated calls.
class Stepper {
public:
    Stepper(GridField initial, const geo::BoundarySchedule& schedule,
            const SolverConfig& config);
    /// Radiation switched off everywhere (schedules cannot have zero
    /// measure, so pure diffusion gets its own entry point).
    Stepper(GridField initial, const SolverConfig& config);
    ~Stepper();
    Stepper(Stepper&&) noexcept;
    Stepper& operator=(Stepper&&) noexcept;

    const GridField& field() const;

    /// Attempts one step of size dt; on success the field advances and the
    /// call returns true.  On Newton failure or loss of positivity the
    /// state is unchanged and the call returns false.
    bool try_step(double dt);

    /// Radiating cells at time t, one entry per cell with chi > 0.
    std::vector<BoundaryNodeInfo> active_boundary(double t) const;

    /// Quadrature of the current field over the domain.
    double quadrature_mass() const;

    /// Discrete line integral of u^q over the radiating region at the
    /// current time.  Together with quadrature_mass this satisfies the
    /// per-step identity  mass(t+dt) - mass(t) =
    /// dt * [theta * flux(t+dt) + (1-theta) * flux(t)]  exactly (up to
    /// roundoff), mirroring d/dt int u = int_{Gamma_1} u^q.
    double boundary_flux_integral() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Single step convenience wrapper; throws StepRejected on failure.
GridField step(const GridField& field, const geo::BoundarySchedule& schedule,
               const SolverConfig& config, double dt);
GridField step(const GridField& field, const SolverConfig& config, double dt);

/// Integrates from the field's current time to `horizon` with adaptive dt:
/// halve on rejection, grow by 1.2 after five consecutive accepts, never
/// above dt_init, final step clipped to land on the horizon.  Declares
/// blowup only when the running maximum has reached blowup_threshold AND
/// the step size has collapsed below dt_min; a collapse without the
/// threshold is reported as std::runtime_error (stiffness, not blowup).
/// Requires u0 >= 0 and not identically zero.
RunReport run(const GridField& u0, const geo::BoundarySchedule& schedule,
              const SolverConfig& config, double horizon);
RunReport run(const GridField& u0, const SolverConfig& config, double horizon);

struct RefinementRecord {
    int n1 = 0;
    int n2 = 0;
    double dt_init = 0.0;
    double t_star = 0.0;
};

struct LifespanEstimate {
    double t_star = 0.0;
    double uncertainty = 0.0;
    bool low_confidence = false;  // non-monotone refinement differences
    std::vector<RefinementRecord> history;
};

/// Repeats a blowup run over the given grid resolutions (at least three,
/// coarse to fine; dt_init is halved per level) and extrapolates the
/// blowup time in the style of Richardson: with successive differences
/// d1, d2 of one sign, the order p = log2(d1/d2) is clamped to [0.5, 3]
/// and T = T_fine + d2/(2^p - 1).  Non-monotone differences are never
/// silently extrapolated: the estimate falls back to the finest value
/// with the full spread as uncertainty and low_confidence set.  Every run
/// must end in blowup before the horizon; otherwise std::runtime_error.
LifespanEstimate estimate_lifespan(
    const geo::Domain& domain, const std::function<double(double, double)>& u0,
    const geo::BoundarySchedule& schedule, const SolverConfig& config,
    const std::vector<std::pair<int, int>>& resolutions, double horizon);

struct GrowthViolation {
    double T = 0.0;
    double t = 0.0;
    double lhs = 0.0;  // (M(T+t) - M(T)) / M(T+t)^q
    double rhs = 0.0;  // c_hat * A(T)^alpha * t^{(1-(n-1)alpha)/2}
};

/// Tests the short-time growth bound
///   (M(T+t) - M(T)) / M(T+t)^q  <=  c_hat * A(T)^alpha * t^{(1-(n-1)a)/2}
/// over sampled pairs (T, t) from the report's trace with t < min(1,
/// remaining time).  Entries beyond 5% slack (plus an absolute floor of
/// 1e-14) are returned; an empty list is a pass.  Requires a trace with at
/// least two samples and 0 <= alpha < 1/(n-1).
std::vector<GrowthViolation> growth_rate_check(
    const RunReport& report, const geo::BoundarySchedule& schedule,
    double alpha, double c_hat);

/// Same check, reading A(T) from the report's own trace instead of a
/// schedule (covers radiation-off runs, where A = 0 forces M constant).
std::vector<GrowthViolation> growth_rate_check(const RunReport& report,
                                               double alpha, double c_hat);

}  // namespace nhkl::solver
