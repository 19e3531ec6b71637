#include "nhkl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "nhkl/quadrature.hpp"
#include "nhkl/util.hpp"

namespace nhkl::kernel {

namespace {

constexpr double kPi = std::numbers::pi;

double gauss1(double d, double t) {
    return std::exp(-d * d / (4.0 * t)) / std::sqrt(4.0 * kPi * t);
}

double interval_images(double x, double y, double t, double L,
                       const Accuracy& acc) {
    KahanSum sum;
    sum.add(gauss1(x - y, t));
    sum.add(gauss1(x + y, t));
    for (int k = 1; k <= acc.max_images; ++k) {
        double shift = 2.0 * k * L;
        sum.add(gauss1(x - y - shift, t));
        sum.add(gauss1(x - y + shift, t));
        sum.add(gauss1(x + y - shift, t));
        sum.add(gauss1(x + y + shift, t));
        // All level k+1 image distances are at least 2kL; the remaining
        // tail is dominated by a geometric series, absorbed in factor 8.
        if (8.0 * gauss1(2.0 * k * L, t) < acc.tol) break;
    }
    return sum.value();
}

double interval_eigen(double x, double y, double t, double L,
                      const Accuracy& acc) {
    KahanSum sum;
    sum.add(1.0 / L);
    for (int m = 1; m <= acc.max_modes; ++m) {
        double w = m * kPi / L;
        double damp = std::exp(-w * w * t);
        double envelope = 2.0 / L * damp;
        sum.add(envelope * std::cos(w * x) * std::cos(w * y));
        if (envelope < acc.tol) break;
    }
    return sum.value();
}

double clamp_coordinate(double v, double L, const char* what) {
    require(v >= -1e-12 && v <= L + 1e-12, std::string(what) +
            " outside [0, L]");
    return std::clamp(v, 0.0, L);
}

/// integral over [lo, hi] of the interval kernel with first argument xc,
/// restricted to the window where the integrand is above the exponent cut
/// (reflected peaks always fall inside the window when it clips at a wall).
double kernel_line_integral(double xc, double lo, double hi, double t,
                            double L, Method method, const Accuracy& acc,
                            double width, double log_tol) {
    double radius = std::sqrt(4.0 * t * log_tol);
    double wlo = std::max(lo, xc - radius);
    double whi = std::min(hi, xc + radius);
    if (!(whi > wlo)) return 0.0;
    double panel = std::max(width * std::sqrt(t), 1e-300);
    int panels = std::clamp(
        static_cast<int>(std::ceil((whi - wlo) / panel)), 1, 64);
    return quad::composite_gl8(
        [&](double u) { return interval_kernel(xc, u, t, L, method, acc); },
        wlo, whi, panels);
}

struct ArcPiece {
    int along_axis = 0;  // axis the piece runs along
    double lo = 0.0, hi = 0.0;
    double perp = 0.0;   // fixed coordinate on the perpendicular axis
};

/// Splits a boundary arc of a 2D box at corners into straight pieces.
std::vector<ArcPiece> split_arc(const geo::Domain& dom,
                                const geo::BoundaryArc& arc) {
    double a = dom.extent(0), b = dom.extent(1);
    double corners[3] = {a, a + b, 2.0 * a + b};
    std::vector<double> cuts = {arc.start};
    for (double c : corners)
        if (c > arc.start && c < arc.end) cuts.push_back(c);
    cuts.push_back(arc.end);
    std::vector<ArcPiece> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double s0 = cuts[i], s1 = cuts[i + 1];
        if (!(s1 > s0)) continue;
        double mid = 0.5 * (s0 + s1);
        ArcPiece p;
        if (mid <= a) {
            p = {0, s0, s1, 0.0};
        } else if (mid <= a + b) {
            p = {1, s0 - a, s1 - a, a};
        } else if (mid <= 2.0 * a + b) {
            p = {0, a - (s1 - a - b), a - (s0 - a - b), b};
        } else {
            p = {1, b - (s1 - 2.0 * a - b), b - (s0 - 2.0 * a - b), 0.0};
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace

double gaussian_radial2(double r2, int n, double t) {
    require(t > 0.0, "heat kernel needs t > 0");
    return std::exp(-r2 / (4.0 * t)) *
           std::pow(4.0 * kPi * t, -0.5 * n);
}

double interval_kernel(double x, double y, double t, double L, Method method,
                       const Accuracy& acc) {
    require(L > 0.0, "interval length must be positive");
    if (!(t > 0.0)) throw std::domain_error("interval kernel needs t > 0");
    x = clamp_coordinate(x, L, "x");
    y = clamp_coordinate(y, L, "y");
    Method m = method;
    if (m == Method::automatic)
        m = t <= 0.25 * L * L ? Method::images : Method::eigen;
    return m == Method::images ? interval_images(x, y, t, L, acc)
                               : interval_eigen(x, y, t, L, acc);
}

BoxKernel::BoxKernel(const geo::Domain& domain, Method method,
                     const Accuracy& acc)
    : domain_(domain), method_(method), acc_(acc) {
    require(domain.kind() != geo::DomainKind::disk2d,
            "closed-form kernels cover box domains only");
}

double BoxKernel::value(const Point& x, const Point& y, double t) const {
    double prod = 1.0;
    for (int ax = 0; ax < dimension(); ++ax)
        prod *= interval_kernel(x[ax], y[ax], t, domain_.extent(ax), method_,
                                acc_);
    return prod;
}

double BoxKernel::volume_integral(
    const Point& x, double t, const std::function<double(const Point&)>& g,
    double width_factor) const {
    require(t > 0.0, "volume integral needs t > 0");
    int n = dimension();
    // Per-axis panelisation; nodes and per-axis kernel factors are
    // precomputed so the n-dimensional product loop touches no kernels.
    std::array<std::vector<double>, 3> nodes, wk;  // weight * kernel factor
    for (int ax = 0; ax < n; ++ax) {
        double L = domain_.extent(ax);
        double panel = std::min(width_factor * std::sqrt(t), 0.5 * L);
        int panels = std::clamp(static_cast<int>(std::ceil(L / panel)), 2,
                                400);
        double h = L / panels;
        for (int p = 0; p < panels; ++p) {
            double mid = (p + 0.5) * h;
            for (std::size_t i = 0; i < 8; ++i) {
                double u = mid + 0.5 * h * quad::kGL8Nodes[i];
                nodes[ax].push_back(u);
                wk[ax].push_back(0.5 * h * quad::kGL8Weights[i] *
                                 interval_kernel(x[ax], u, t,
                                                 domain_.extent(ax), method_,
                                                 acc_));
            }
        }
    }
    KahanSum sum;
    Point y{0.0, 0.0, 0.0};
    if (n == 2) {
        for (std::size_t i = 0; i < nodes[0].size(); ++i) {
            y[0] = nodes[0][i];
            for (std::size_t j = 0; j < nodes[1].size(); ++j) {
                y[1] = nodes[1][j];
                sum.add(wk[0][i] * wk[1][j] * g(y));
            }
        }
    } else {
        for (std::size_t i = 0; i < nodes[0].size(); ++i) {
            y[0] = nodes[0][i];
            for (std::size_t j = 0; j < nodes[1].size(); ++j) {
                y[1] = nodes[1][j];
                for (std::size_t k = 0; k < nodes[2].size(); ++k) {
                    y[2] = nodes[2][k];
                    sum.add(wk[0][i] * wk[1][j] * wk[2][k] * g(y));
                }
            }
        }
    }
    return sum.value();
}

double bti_time_exponent(int n, double alpha) {
    require(n == 2 || n == 3, "dimension must be 2 or 3");
    require(alpha >= 0.0 && alpha < 1.0 / (n - 1),
            "alpha must lie in [0, 1/(n-1))");
    return 0.5 * (1.0 - (n - 1) * alpha);
}

BtiValue boundary_time_integral(const BoxKernel& kernel,
                                const geo::BoundaryArc& arc, const Point& x,
                                double t, const BtiOptions& opts) {
    require(kernel.dimension() == 2, "arc form needs a 2D box");
    require(t > 0.0, "boundary-time integral needs t > 0");
    require(arc.measure() > 0.0, "arc must have positive measure");
    const auto& dom = kernel.domain();
    auto pieces = split_arc(dom, arc);
    const Accuracy& acc = kernel.accuracy();
    Method method = kernel.method();

    auto space_integral = [&](double sigma) {
        double total = 0.0;
        for (const auto& p : pieces) {
            int perp_axis = 1 - p.along_axis;
            double perp_factor =
                interval_kernel(x[perp_axis], p.perp, sigma,
                                dom.extent(perp_axis), method, acc);
            if (perp_factor < 1e-300) continue;
            total += perp_factor *
                     kernel_line_integral(x[p.along_axis], p.lo, p.hi, sigma,
                                          dom.extent(p.along_axis), method,
                                          acc, opts.space_width,
                                          opts.window_log_tol);
        }
        return total;
    };

    // sigma = s^2 turns the 1/sqrt(sigma) edge growth into a bounded
    // integrand 2 s * F(s^2).
    double value = quad::composite_gl8(
        [&](double s) { return 2.0 * s * space_integral(s * s); }, 0.0,
        std::sqrt(t), opts.time_panels);
    return {value, t > 1.0};
}

BtiValue boundary_time_integral(const BoxKernel& kernel,
                                const geo::BoundaryPatch& patch,
                                const Point& x, double t,
                                const BtiOptions& opts) {
    require(kernel.dimension() == 3, "patch form needs a 3D box");
    require(t > 0.0, "boundary-time integral needs t > 0");
    require(patch.measure() > 0.0, "patch must have positive measure");
    require(patch.face_id == 0, "only the z = 0 face carries patches");
    const auto& dom = kernel.domain();
    const Accuracy& acc = kernel.accuracy();
    Method method = kernel.method();

    auto space_integral = [&](double sigma) {
        double fz = interval_kernel(x[2], 0.0, sigma, dom.extent(2), method,
                                    acc);
        if (fz < 1e-300) return 0.0;
        double fx = kernel_line_integral(x[0], patch.u0, patch.u1, sigma,
                                         dom.extent(0), method, acc,
                                         opts.space_width,
                                         opts.window_log_tol);
        double fy = kernel_line_integral(x[1], patch.v0, patch.v1, sigma,
                                         dom.extent(1), method, acc,
                                         opts.space_width,
                                         opts.window_log_tol);
        return fz * fx * fy;
    };

    double value = quad::composite_gl8(
        [&](double s) { return 2.0 * s * space_integral(s * s); }, 0.0,
        std::sqrt(t), opts.time_panels);
    return {value, t > 1.0};
}

std::string DominationResult::to_json() const {
    nlohmann::json j;
    j["c_hat"] = c_hat;
    j["samples"] = samples;
    j["argmax"] = {{"t", argmax_t},
                   {"x", {argmax_x[0], argmax_x[1], argmax_x[2]}},
                   {"y", {argmax_y[0], argmax_y[1], argmax_y[2]}}};
    return j.dump(2);
}

DominationResult calibrate_gaussian_domination(const BoxKernel& kernel,
                                               const DominationPlan& plan) {
    require(plan.space_divisions >= 1 && plan.time_divisions >= 2,
            "domination plan too coarse");
    require(plan.t_min > 0.0 && plan.t_min < plan.t_max,
            "domination plan needs 0 < t_min < t_max");
    int n = kernel.dimension();
    const auto& dom = kernel.domain();

    std::vector<Point> pts;
    int d = plan.space_divisions;
    if (n == 2) {
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j <= d; ++j)
                pts.push_back({dom.extent(0) * i / d, dom.extent(1) * j / d,
                               0.0});
    } else {
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j <= d; ++j)
                for (int k = 0; k <= d; ++k)
                    pts.push_back({dom.extent(0) * i / d,
                                   dom.extent(1) * j / d,
                                   dom.extent(2) * k / d});
    }

    DominationResult res;
    for (int it = 0; it < plan.time_divisions; ++it) {
        double f = plan.time_divisions == 1
                       ? 0.0
                       : static_cast<double>(it) / (plan.time_divisions - 1);
        double t = plan.t_min * std::pow(plan.t_max / plan.t_min, f);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = i; j < pts.size(); ++j) {
                double r2 = 0.0;
                for (int ax = 0; ax < n; ++ax) {
                    double dd = pts[i][ax] - pts[j][ax];
                    r2 += dd * dd;
                }
                double denom =
                    std::pow(t, -0.5 * n) * std::exp(-r2 / (5.0 * t));
                ++res.samples;
                if (denom < 1e-300) continue;
                double ratio = kernel.value(pts[i], pts[j], t) / denom;
                if (ratio > res.c_hat) {
                    res.c_hat = ratio;
                    res.argmax_t = t;
                    res.argmax_x = pts[i];
                    res.argmax_y = pts[j];
                }
            }
        }
    }
    return res;
}

std::string BtiCalibration::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["c_hat"] = c_hat;
    j["samples"] = samples;
    j["argmax"] = {{"measure", argmax_measure},
                   {"t", argmax_t},
                   {"x", {argmax_x[0], argmax_x[1], argmax_x[2]}},
                   {"value", argmax_value}};
    return j.dump(2);
}

namespace {

geo::BoundaryArc arc_at_center(double measure, double center, double per) {
    double c = std::clamp(center, 0.5 * measure, per - 0.5 * measure);
    return {0, c - 0.5 * measure, c + 0.5 * measure};
}

}  // namespace

BtiCalibration calibrate_bti_constant(const BoxKernel& kernel, double alpha,
                                      const BtiPlan& plan) {
    int n = kernel.dimension();
    double expo = bti_time_exponent(n, alpha);
    require(!plan.arc_measures.empty() && !plan.times.empty(),
            "calibration plan needs region sizes and times");
    const auto& dom = kernel.domain();
    double per = n == 2 ? dom.boundary_measure() : 0.0;
    for (double m : plan.arc_measures)
        require(m > 0.0 && m < dom.boundary_measure(),
                "region size outside the boundary measure range");
    for (double t : plan.times)
        require(t > 0.0 && t <= 1.0, "calibration times must lie in (0, 1]");

    BtiCalibration cal;
    cal.alpha = alpha;

    auto observe = [&](double measure, double t, const Point& x,
                       double value) {
        ++cal.samples;
        double ratio = value / (std::pow(measure, alpha) * std::pow(t, expo));
        if (ratio > cal.c_hat) {
            cal.c_hat = ratio;
            cal.argmax_measure = measure;
            cal.argmax_t = t;
            cal.argmax_x = x;
            cal.argmax_value = value;
        }
    };

    Rng rng(plan.seed);

    if (n == 2) {
        std::vector<double> centers = plan.arc_centers;
        if (centers.empty())
            centers = {0.5 * dom.extent(0), dom.extent(0)};  // mid-edge, corner
        double diam = std::min(dom.extent(0), dom.extent(1));
        for (double m : plan.arc_measures) {
            for (double c : centers) {
                auto arc = arc_at_center(m, c, per);
                std::vector<Point> xs;
                double mid = 0.5 * (arc.start + arc.end);
                for (double s : {mid, mid - 0.3 * m, mid + 0.3 * m,
                                 arc.start + 0.02 * m, arc.end - 0.02 * m}) {
                    auto bp = dom.boundary_point(s);
                    xs.push_back({bp.xy[0], bp.xy[1], 0.0});
                }
                auto anchor = dom.boundary_point(mid);
                for (double off : {0.02, 0.1, 0.3}) {
                    xs.push_back({anchor.xy[0] -
                                      off * diam * anchor.outward_normal[0],
                                  anchor.xy[1] -
                                      off * diam * anchor.outward_normal[1],
                                  0.0});
                }
                xs.push_back({0.5 * dom.extent(0), 0.5 * dom.extent(1), 0.0});
                xs.push_back({dom.extent(0), dom.extent(1), 0.0});
                for (double t : plan.times)
                    for (const auto& x : xs)
                        observe(m, t, x,
                                boundary_time_integral(kernel, arc, x, t,
                                                       plan.bti)
                                    .value);
            }
        }
        auto [m_lo, m_hi] = std::minmax_element(plan.arc_measures.begin(),
                                                plan.arc_measures.end());
        auto [t_lo, t_hi] =
            std::minmax_element(plan.times.begin(), plan.times.end());
        for (int k = 0; k < plan.random_samples; ++k) {
            double m = rng.uniform(*m_lo, *m_hi);
            double c = rng.uniform(0.0, per);
            double t = rng.uniform(*t_lo, *t_hi);
            auto arc = arc_at_center(m, c, per);
            Point x{};
            if (rng.uniform() < 0.5) {
                auto bp = dom.boundary_point(
                    rng.uniform(arc.start, arc.end));
                x = {bp.xy[0], bp.xy[1], 0.0};
            } else {
                x = {rng.uniform(0.0, dom.extent(0)),
                     rng.uniform(0.0, dom.extent(1)), 0.0};
            }
            observe(m, t, x,
                    boundary_time_integral(kernel, arc, x, t, plan.bti)
                        .value);
        }
    } else {
        double a = dom.extent(0), b = dom.extent(1);
        for (double m : plan.arc_measures) {
            double side = std::sqrt(m);
            require(side < std::min(a, b), "patch does not fit on the face");
            std::vector<geo::BoundaryPatch> patches;
            patches.push_back({0, 0.5 * (a - side), 0.5 * (a + side),
                               0.5 * (b - side), 0.5 * (b + side)});
            double off = std::min(0.02 * std::min(a, b),
                                  0.5 * (std::min(a, b) - side));
            patches.push_back({0, off, off + side, off, off + side});
            for (const auto& patch : patches) {
                double cu = 0.5 * (patch.u0 + patch.u1);
                double cv = 0.5 * (patch.v0 + patch.v1);
                std::vector<Point> xs = {
                    {cu, cv, 0.0},
                    {patch.u0 + 0.02 * side, cv, 0.0},
                    {cu, patch.v1 - 0.02 * side, 0.0},
                    {cu, cv, 0.05 * dom.extent(2)},
                    {cu, cv, 0.3 * dom.extent(2)},
                    {0.5 * a, 0.5 * b, 0.5 * dom.extent(2)},
                    {a, b, dom.extent(2)}};
                for (double t : plan.times)
                    for (const auto& x : xs)
                        observe(m, t, x,
                                boundary_time_integral(kernel, patch, x, t,
                                                       plan.bti)
                                    .value);
            }
        }
        auto [m_lo, m_hi] = std::minmax_element(plan.arc_measures.begin(),
                                                plan.arc_measures.end());
        auto [t_lo, t_hi] =
            std::minmax_element(plan.times.begin(), plan.times.end());
        for (int k = 0; k < plan.random_samples; ++k) {
            double m = rng.uniform(*m_lo, *m_hi);
            double side = std::sqrt(m);
            double u0 = rng.uniform(0.0, a - side);
            double v0 = rng.uniform(0.0, b - side);
            geo::BoundaryPatch patch{0, u0, u0 + side, v0, v0 + side};
            double t = rng.uniform(*t_lo, *t_hi);
            Point x{};
            if (rng.uniform() < 0.5) {
                x = {rng.uniform(patch.u0, patch.u1),
                     rng.uniform(patch.v0, patch.v1), 0.0};
            } else {
                x = {rng.uniform(0.0, a), rng.uniform(0.0, b),
                     rng.uniform(0.0, dom.extent(2))};
            }
            observe(m, t, x,
                    boundary_time_integral(kernel, patch, x, t, plan.bti)
                        .value);
        }
    }
    return cal;
}

}  // namespace nhkl::kernel
