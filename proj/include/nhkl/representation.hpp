#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nhkl/geometry.hpp"
#include "nhkl/kernel.hpp"

namespace nhkl::rep {

/// Initial datum, evaluated wherever the quadratures need it.  The volume
/// term expands u0 in the Neumann cosine basis, so the data should be smooth
/// on the closed box for the advertised accuracy.
using Initial = std::function<double(double, double)>;

struct RepOptions {
    int arc_nodes = 65;    // trace unknowns along the initial arc
    int time_levels = 40;  // uniform levels on [0, horizon]
    int sigma_panels = 16; // Gauss panels in the sqrt(time-lag) variable
    int max_picard = 80;
    int u0_modes = 32;     // cosine expansion order per axis
};

/// One piece of a time-constant radiating footprint: flux weight applied on
/// the boundary interval [start, end] in arc length.  Weights mirror the
/// solver's snapped interface cells (1 inside, 1/2 on the two end cells), so
/// a footprint-driven fixed point solves exactly the problem the finite
/// difference grid discretises instead of the sharp-ended arc.
struct WeightedArc {
    double start = 0.0;
    double end = 0.0;
    double weight = 1.0;
};

namespace detail {
struct SolutionState;
}

/// Converged boundary trace of the radiating heat problem plus everything
/// needed to evaluate the solution anywhere in the closed box afterwards.
/// Obtained from representation_solve; move-only.
class RepresentationSolution {
public:
    ~RepresentationSolution();
    RepresentationSolution(RepresentationSolution&&) noexcept;
    RepresentationSolution& operator=(RepresentationSolution&&) noexcept;

    double horizon() const;
    double q() const;
    bool radiating() const;  // false for the pure-diffusion overload

    /// Arc-length coordinates of the trace nodes (empty when not radiating)
    /// and the time levels (always starts at 0).
    const std::vector<double>& arc_coordinates() const;
    const std::vector<double>& times() const;
    double boundary_value(int node, int level) const;

    int iterations() const;
    /// Sup-norm update sizes, one entry per sweep; strictly decreasing for
    /// every solve that returned instead of throwing.
    const std::vector<double>& residual_history() const;

    /// Heat semigroup applied to u0 alone (no boundary term).
    double volume_part(double x, double y, double t) const;

    /// Solution value at any point of the closed box, t in [0, horizon].
    double evaluate(double x, double y, double t) const;

private:
    explicit RepresentationSolution(std::unique_ptr<detail::SolutionState> impl);
    std::unique_ptr<detail::SolutionState> impl_;

    friend RepresentationSolution representation_solve(
        const kernel::BoxKernel&, const Initial&, const geo::BoundarySchedule&,
        double, double, double, const RepOptions&);
    friend RepresentationSolution representation_solve(
        const kernel::BoxKernel&, const Initial&,
        const std::vector<WeightedArc>&, double, double, double,
        const RepOptions&);
    friend RepresentationSolution representation_solve(const kernel::BoxKernel&,
                                                       const Initial&, double,
                                                       const RepOptions&);
};

/// Solves u(x,t) = (N(t) u0)(x) + int_0^t int_{arc(tau)} N(x,y,t-tau)
/// u(y,tau)^q dS dtau by Picard iteration on the boundary trace, then exposes
/// interior values through one more evaluation of the right-hand side.
///
/// The trace lives on arc_nodes uniform arc-length nodes covering the initial
/// arc (schedules only shrink, so later arcs stay inside the node range) and
/// time_levels+1 uniform levels.  The memory integral substitutes
/// tau = t - sigma^2, which removes the 1/sqrt singularity of the kernel's
/// line integral; each sigma node integrates over the arc with Gauss panels
/// refined to the kernel width and windowed where the kernel is above
/// exp(-54) of its peak.  One pass assembles the resulting linear map from
/// trace powers to boundary values, so a Picard sweep is a matrix-vector
/// product.
///
/// Sweeps must shrink the sup-norm update monotonically; the first increase
/// (or running out of max_picard sweeps) throws std::runtime_error naming the
/// horizon, since the fixed point only contracts for short enough horizons.
/// Convergence is declared at update <= tol * max(1, max|trace|).
///
/// 2D boxes only: the kernel has no disk form.  Requires q > 1, u0 > 0 on
/// the closed box, 0 < horizon, tol > 0.
RepresentationSolution representation_solve(const kernel::BoxKernel& eval,
                                            const Initial& u0,
                                            const geo::BoundarySchedule& schedule,
                                            double horizon, double q,
                                            double fixed_point_tol = 1e-10,
                                            const RepOptions& opts = {});

/// Same fixed point driven by a time-constant weighted footprint instead of
/// a schedule.  Pieces must be contiguous, inside the boundary walk, with
/// weights in (0, 1]; the trace covers their union.
RepresentationSolution representation_solve(
    const kernel::BoxKernel& eval, const Initial& u0,
    const std::vector<WeightedArc>& footprint, double horizon, double q,
    double fixed_point_tol = 1e-10, const RepOptions& opts = {});

/// Pure diffusion: no radiating boundary portion (schedules cannot have zero
/// measure, so switched-off radiation gets its own entry point).  The result
/// evaluates the heat semigroup of u0; boundary-trace accessors are empty.
RepresentationSolution representation_solve(const kernel::BoxKernel& eval,
                                            const Initial& u0, double horizon,
                                            const RepOptions& opts = {});

}  // namespace nhkl::rep
