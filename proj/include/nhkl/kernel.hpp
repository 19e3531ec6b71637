#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nhkl/geometry.hpp"

namespace nhkl::kernel {

using Point = std::array<double, 3>;

/// Free-space heat kernel (4 pi t)^(-n/2) exp(-r2 / 4t) given r2 = |x-y|^2.
double gaussian_radial2(double r2, int n, double t);

enum class Method { images, eigen, automatic };

struct Accuracy {
    double tol = 1e-14;    // absolute truncation target per 1D factor
    int max_images = 1024; // reflection levels
    int max_modes = 200000;
};

/// Zero-flux heat kernel on [0, L].  `images` sums reflected Gaussians and
/// converges fast for small t; `eigen` sums the cosine series and converges
/// fast for large t; `automatic` switches at t = L^2 / 4.  Truncation level
/// is chosen so the first omitted term is below acc.tol.
double interval_kernel(double x, double y, double t, double L,
                       Method method = Method::automatic,
                       const Accuracy& acc = {});

/// Zero-flux heat kernel on a box domain, the product of per-axis interval
/// kernels.  Each axis makes its own images/eigen choice under
/// Method::automatic.
class BoxKernel {
public:
    explicit BoxKernel(const geo::Domain& domain,
                       Method method = Method::automatic,
                       const Accuracy& acc = {});

    double value(const Point& x, const Point& y, double t) const;
    double operator()(const Point& x, const Point& y, double t) const {
        return value(x, y, t);
    }

    const geo::Domain& domain() const { return domain_; }
    int dimension() const { return domain_.dimension(); }
    Method method() const { return method_; }
    const Accuracy& accuracy() const { return acc_; }

    /// integral over the domain of value(x, y, t) * g(y) dy, with Gauss
    /// panels sized to width_factor * sqrt(t) on every axis so the
    /// diffusion profile is resolved.
    double volume_integral(const Point& x, double t,
                           const std::function<double(const Point&)>& g,
                           double width_factor = 0.75) const;

private:
    geo::Domain domain_;
    Method method_ = Method::automatic;
    Accuracy acc_;
};

struct BtiOptions {
    int time_panels = 16;       // Gauss panels in the sqrt(time) variable
    double space_width = 1.0;   // boundary panel width / sqrt(sigma)
    double window_log_tol = 41.0;  // exponent cut for localisation windows
};

struct BtiValue {
    double value = 0.0;
    bool beyond_validity = false;  // set when t > 1
};

/// integral for s in (0, t] of the kernel's boundary integral over the arc,
/// evaluated with the substitution s = t - sigma^2 removing the sqrt
/// singularity at s -> 0.  2D boxes only.
BtiValue boundary_time_integral(const BoxKernel& kernel,
                                const geo::BoundaryArc& arc, const Point& x,
                                double t, const BtiOptions& opts = {});

/// Same for a rectangular patch on the z = 0 face of a 3D box.
BtiValue boundary_time_integral(const BoxKernel& kernel,
                                const geo::BoundaryPatch& patch,
                                const Point& x, double t,
                                const BtiOptions& opts = {});

/// Exponent of the time factor in the boundary-time bound:
/// (1 - (n-1) * alpha) / 2.  Requires 0 <= alpha < 1/(n-1).
double bti_time_exponent(int n, double alpha);

struct DominationPlan {
    int space_divisions = 8;  // per-axis divisions of the sample lattice
    int time_divisions = 8;   // log-spaced times in [t_min, t_max]
    double t_min = 1e-3;
    double t_max = 1.0;
};

struct DominationResult {
    double c_hat = 0.0;
    long samples = 0;
    double argmax_t = 0.0;
    Point argmax_x{};
    Point argmax_y{};
    std::string to_json() const;
};

/// Calibrates the smallest constant observed such that the kernel is
/// dominated by c_hat * t^(-n/2) * exp(-|x-y|^2 / 5t) on the sample set.
DominationResult calibrate_gaussian_domination(const BoxKernel& kernel,
                                               const DominationPlan& plan =
                                                   {});

struct BtiPlan {
    std::vector<double> arc_measures;  // region sizes to calibrate over
    std::vector<double> times;         // in (0, 1]
    std::vector<double> arc_centers;   // arc-length centres; empty = default
    int random_samples = 0;            // extra randomised triples
    std::uint64_t seed = 1;
    BtiOptions bti;
};

struct BtiCalibration {
    double alpha = 0.0;
    double c_hat = 0.0;
    long samples = 0;
    double argmax_measure = 0.0;
    double argmax_t = 0.0;
    Point argmax_x{};
    double argmax_value = 0.0;
    std::string to_json() const;
};

/// Maximises bti / (measure^alpha * t^exponent) over a family of regions,
/// observation points (on the region, near it, and away from it) and
/// times.  The returned c_hat makes the bound tight on the sample set.
BtiCalibration calibrate_bti_constant(const BoxKernel& kernel, double alpha,
                                      const BtiPlan& plan);

}  // namespace nhkl::kernel
