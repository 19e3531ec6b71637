#include "nhkl/representation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nhkl/quadrature.hpp"
#include "nhkl/util.hpp"

namespace nhkl::rep {
namespace {

constexpr double kPi = 3.14159265358979323846;

// The arc quadrature integrates only where the Gaussian factor exceeds about
// exp(-55) of its peak: half-width 1.3 * 2 sigma * sqrt(41).  Panels are tied
// to the kernel width (1.5 sigma), so the panel count stays below 23 no
// matter how small sigma gets.
constexpr double kWindowExp = 41.0;
constexpr double kWindowSlack = 1.3;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ------------------------------------------------------------- volume term

// u0 expanded in the Neumann cosine basis; the heat semigroup acts
// diagonally on the coefficients, so the volume term costs one double sum
// per evaluation and is exact in t for the truncated expansion.
struct CosineExpansion {
    double a = 1.0;
    double b = 1.0;
    int modes = 0;
    std::vector<double> coef;  // (modes+1)^2, row-major in (m, l)

    double eval(double x, double y, double t) const {
        int m1 = modes + 1;
        std::vector<double> fx(m1), fy(m1);
        for (int m = 0; m < m1; ++m) {
            double km = m * kPi / a;
            fx[m] = std::cos(km * x) * std::exp(-km * km * t);
            double kl = m * kPi / b;
            fy[m] = std::cos(kl * y) * std::exp(-kl * kl * t);
        }
        double s = 0.0;
        for (int m = 0; m < m1; ++m) {
            double row = 0.0;
            for (int l = 0; l < m1; ++l) row += coef[m * m1 + l] * fy[l];
            s += fx[m] * row;
        }
        return s;
    }
};

CosineExpansion expand_initial(const Initial& u0, double a, double b,
                               int modes) {
    require(modes >= 1 && modes <= 256, "u0_modes must be in [1, 256]");
    require(static_cast<bool>(u0), "initial data callable is empty");
    CosineExpansion e;
    e.a = a;
    e.b = b;
    e.modes = modes;
    int m1 = modes + 1;

    // Composite Gauss lattice fine enough for the highest cosine mode.
    int panels = std::max(12, modes);
    int g = 8 * panels;
    std::vector<double> xs(g), wxs(g), ys(g), wys(g);
    auto fill = [&](std::vector<double>& n, std::vector<double>& w,
                    double len) {
        double h = len / panels;
        for (int p = 0; p < panels; ++p)
            for (std::size_t i = 0; i < 8; ++i) {
                n[p * 8 + i] = h * (p + 0.5 + 0.5 * quad::kGL8Nodes[i]);
                w[p * 8 + i] = 0.5 * h * quad::kGL8Weights[i];
            }
    };
    fill(xs, wxs, a);
    fill(ys, wys, b);

    std::vector<double> samples(static_cast<std::size_t>(g) * g);
    double umin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            double val = u0(xs[i], ys[j]);
            require(std::isfinite(val), "u0 must be finite");
            umin = std::min(umin, val);
            samples[static_cast<std::size_t>(i) * g + j] = val;
        }
    require(umin > 0.0, "u0 must be positive on the closed box");

    // Separable transform: y-modes first, then x-modes.
    std::vector<double> part(static_cast<std::size_t>(g) * m1, 0.0);
    for (int i = 0; i < g; ++i)
        for (int l = 0; l < m1; ++l) {
            double acc = 0.0;
            for (int j = 0; j < g; ++j)
                acc += wys[j] * samples[static_cast<std::size_t>(i) * g + j] *
                       std::cos(l * kPi * ys[j] / b);
            part[static_cast<std::size_t>(i) * m1 + l] = acc;
        }
    e.coef.assign(static_cast<std::size_t>(m1) * m1, 0.0);
    for (int m = 0; m < m1; ++m)
        for (int l = 0; l < m1; ++l) {
            double acc = 0.0;
            for (int i = 0; i < g; ++i)
                acc += wxs[i] * part[static_cast<std::size_t>(i) * m1 + l] *
                       std::cos(m * kPi * xs[i] / a);
            double norm =
                (m == 0 ? 1.0 : 2.0) * (l == 0 ? 1.0 : 2.0) / (a * b);
            e.coef[static_cast<std::size_t>(m) * m1 + l] = norm * acc;
        }
    return e;
}

// ------------------------------------------------------------ trace lattice

struct TraceGrid {
    std::vector<double> s;  // ns arc-length coordinates, uniform
    std::vector<double> t;  // nt + 1 uniform levels, t[0] = 0
    int ns = 0;
    int nt = 0;
    double ds = 0.0;
    double dt = 0.0;

    int cols() const { return (nt + 1) * ns; }
    int col(int level, int node) const { return level * ns + node; }

    void locate_s(double sq, int& i, double& th) const {
        double u = (sq - s[0]) / ds;
        i = std::clamp(static_cast<int>(std::floor(u)), 0, ns - 2);
        th = std::clamp(u - i, 0.0, 1.0);
    }
    void locate_t(double tq, int& k, double& th) const {
        double u = tq / dt;
        k = std::clamp(static_cast<int>(std::floor(u)), 0, nt - 1);
        th = std::clamp(u - k, 0.0, 1.0);
    }
};

double dist2(const std::array<double, 2>& p, double px, double py) {
    double dx = p[0] - px, dy = p[1] - py;
    return dx * dx + dy * dy;
}

// Memory integral for one observation point and time: substitute
// tau = t - sigma^2, integrate each footprint piece under a window around
// the kernel peak, and hand every quadrature weight to add(column, w) on
// the trace-power lattice.  arcs_at(tau) yields the radiating pieces; sx
// carries the observation point's own arc coordinate when it lies on the
// radiating edge, which pins the peak without a search.  Interior points
// locate the peak by coarse scan plus ternary refinement of the Euclidean
// distance (exact for the straight single-edge arcs built here).
template <class ArcsAt, class ColSink>
void memory_row(const kernel::BoxKernel& ker, ArcsAt&& arcs_at,
                const TraceGrid& g, const kernel::Point& x, double sx,
                bool have_sx, double tk, int sigma_panels, ColSink&& add) {
    const geo::Domain& dom = ker.domain();
    double smax = std::sqrt(tk);
    if (!(smax > 0.0)) return;
    double hs = smax / sigma_panels;
    for (int p = 0; p < sigma_panels; ++p)
        for (std::size_t gi = 0; gi < 8; ++gi) {
            double sigma = hs * (p + 0.5 + 0.5 * quad::kGL8Nodes[gi]);
            double tau = std::clamp(tk - sigma * sigma, 0.0, g.t.back());
            const std::vector<WeightedArc>& pieces = arcs_at(tau);
            if (pieces.empty()) continue;
            double u_lo = pieces.front().start;
            double u_hi = pieces.back().end;
            double ulen = u_hi - u_lo;
            if (!(ulen > 0.0)) continue;

            double s_star, gate_slack;
            if (have_sx) {
                s_star = sx;
                gate_slack = 0.0;
            } else {
                int bi = 0;
                double best = std::numeric_limits<double>::infinity();
                for (int m = 0; m <= 32; ++m) {
                    double d2 =
                        dist2(dom.boundary_point(u_lo + ulen * m / 32.0).xy,
                              x[0], x[1]);
                    if (d2 < best) {
                        best = d2;
                        bi = m;
                    }
                }
                double lo_r = u_lo + ulen * std::max(0, bi - 1) / 32.0;
                double hi_r = u_lo + ulen * std::min(32, bi + 1) / 32.0;
                while (hi_r - lo_r > 1e-12) {
                    double m1 = lo_r + (hi_r - lo_r) / 3.0;
                    double m2 = hi_r - (hi_r - lo_r) / 3.0;
                    if (dist2(dom.boundary_point(m1).xy, x[0], x[1]) <
                        dist2(dom.boundary_point(m2).xy, x[0], x[1]))
                        hi_r = m2;
                    else
                        lo_r = m1;
                }
                s_star = 0.5 * (lo_r + hi_r);
                gate_slack = ulen / 512.0;
            }

            int k0;
            double tht;
            g.locate_t(tau, k0, tht);
            double outer = quad::kGL8Weights[gi] * 0.5 * hs * 2.0 * sigma;
            double rho = kWindowSlack * 2.0 * sigma * std::sqrt(kWindowExp);

            for (const WeightedArc& piece : pieces) {
                if (!(piece.weight > 0.0) || !(piece.end > piece.start))
                    continue;
                double s_near = std::clamp(s_star, piece.start, piece.end);
                double d_near = std::sqrt(
                    dist2(dom.boundary_point(s_near).xy, x[0], x[1]));
                double d_eff = std::max(0.0, d_near - gate_slack);
                if (d_eff * d_eff > 4.0 * sigma * sigma * kWindowExp)
                    continue;

                double lo = std::max(piece.start, s_near - rho);
                double hi = std::min(piece.end, s_near + rho);
                if (!(hi > lo)) continue;

                double win = hi - lo;
                int np = std::max(
                    1, static_cast<int>(std::ceil(win / (1.5 * sigma))));
                double hp = win / np;
                for (int pq = 0; pq < np; ++pq)
                    for (std::size_t gj = 0; gj < 8; ++gj) {
                        double sq =
                            lo + hp * (pq + 0.5 + 0.5 * quad::kGL8Nodes[gj]);
                        auto y = dom.boundary_point(sq).xy;
                        double n =
                            ker.value(x, {y[0], y[1], 0.0}, sigma * sigma);
                        double wq = outer * quad::kGL8Weights[gj] * 0.5 *
                                    hp * n * piece.weight;
                        int is;
                        double ths;
                        g.locate_s(sq, is, ths);
                        add(g.col(k0, is), wq * (1.0 - ths) * (1.0 - tht));
                        add(g.col(k0, is + 1), wq * ths * (1.0 - tht));
                        add(g.col(k0 + 1, is), wq * (1.0 - ths) * tht);
                        add(g.col(k0 + 1, is + 1), wq * ths * tht);
                    }
            }
        }
}

}  // namespace

// -------------------------------------------------------------------- state

namespace detail {

struct SolutionState {
    kernel::BoxKernel ker;
    std::optional<geo::BoundarySchedule> sched;
    std::vector<WeightedArc> footprint;  // used when sched is empty
    double horizon = 0.0;
    double q = 0.0;
    RepOptions opts;
    CosineExpansion vol;
    TraceGrid grid;
    Vec v;  // boundary trace, column layout level * ns + node
    Vec w;  // v^q, kept for interior evaluations
    int iterations = 0;
    std::vector<double> residuals;

    explicit SolutionState(const kernel::BoxKernel& k) : ker(k) {}

    bool has_radiation() const { return sched.has_value() || !footprint.empty(); }
};

}  // namespace detail

using detail::SolutionState;

RepresentationSolution::RepresentationSolution(
    std::unique_ptr<detail::SolutionState> impl)
    : impl_(std::move(impl)) {}
RepresentationSolution::~RepresentationSolution() = default;
RepresentationSolution::RepresentationSolution(
    RepresentationSolution&&) noexcept = default;
RepresentationSolution& RepresentationSolution::operator=(
    RepresentationSolution&&) noexcept = default;

double RepresentationSolution::horizon() const { return impl_->horizon; }
double RepresentationSolution::q() const { return impl_->q; }
bool RepresentationSolution::radiating() const {
    return impl_->has_radiation();
}
const std::vector<double>& RepresentationSolution::arc_coordinates() const {
    return impl_->grid.s;
}
const std::vector<double>& RepresentationSolution::times() const {
    return impl_->grid.t;
}
double RepresentationSolution::boundary_value(int node, int level) const {
    require(impl_->has_radiation(),
            "no boundary trace: this solution is pure diffusion");
    const TraceGrid& g = impl_->grid;
    require(node >= 0 && node < g.ns && level >= 0 && level <= g.nt,
            "trace index out of range");
    return impl_->v[g.col(level, node)];
}
int RepresentationSolution::iterations() const { return impl_->iterations; }
const std::vector<double>& RepresentationSolution::residual_history() const {
    return impl_->residuals;
}

double RepresentationSolution::volume_part(double x, double y,
                                           double t) const {
    require(t >= 0.0 && t <= impl_->horizon * (1.0 + 1e-12),
            "evaluation time outside [0, horizon]");
    return impl_->vol.eval(x, y, t);
}

double RepresentationSolution::evaluate(double x, double y, double t) const {
    const detail::SolutionState& s = *impl_;
    require(t >= 0.0 && t <= s.horizon * (1.0 + 1e-12),
            "evaluation time outside [0, horizon]");
    const geo::Domain& dom = s.ker.domain();
    require(x >= 0.0 && x <= dom.extent(0) && y >= 0.0 &&
                y <= dom.extent(1),
            "evaluation point outside the closed box");
    double out = s.vol.eval(x, y, t);
    if (s.has_radiation() && t > 0.0) {
        KahanSum acc;
        auto sink = [&](int c, double wgt) { acc.add(wgt * s.w[c]); };
        if (s.sched) {
            std::vector<WeightedArc> scratch(1);
            auto arcs = [&](double tau) -> const std::vector<WeightedArc>& {
                geo::BoundaryArc a = s.sched->arc_at(tau);
                scratch[0] = {a.start, a.end, 1.0};
                return scratch;
            };
            memory_row(s.ker, arcs, s.grid, {x, y, 0.0}, 0.0, false, t,
                       s.opts.sigma_panels, sink);
        } else {
            auto arcs = [&](double) -> const std::vector<WeightedArc>& {
                return s.footprint;
            };
            memory_row(s.ker, arcs, s.grid, {x, y, 0.0}, 0.0, false, t,
                       s.opts.sigma_panels, sink);
        }
        out += acc.value();
    }
    return out;
}

// -------------------------------------------------------------------- solve

namespace {

void check_solve_args(const geo::Domain& dom, double horizon, double q,
                      double tol, const RepOptions& opts) {
    require(dom.kind() == geo::DomainKind::box2d,
            "representation solve needs a 2D box (no disk kernel)");
    require(horizon > 0.0 && std::isfinite(horizon),
            "horizon must be positive");
    require(q > 1.0, "superlinear radiation needs q > 1");
    require(tol > 0.0, "fixed_point_tol must be positive");
    require(opts.arc_nodes >= 9, "arc_nodes must be at least 9");
    require(opts.time_levels >= 4, "time_levels must be at least 4");
    require(opts.sigma_panels >= 2, "sigma_panels must be at least 2");
    require(opts.max_picard >= 2, "max_picard must be at least 2");
}

// Builds the trace lattice over [s_lo, s_hi], assembles the memory map, and
// runs the Picard iteration with the monotone-contraction guard.
template <class ArcsAt>
void solve_core(detail::SolutionState& s, const Initial& u0,
                double s_lo, double s_hi, double horizon, double q,
                double tol, const RepOptions& opts, ArcsAt&& arcs_at) {
    const geo::Domain& dom = s.ker.domain();
    s.horizon = horizon;
    s.q = q;
    s.opts = opts;
    s.vol = expand_initial(u0, dom.extent(0), dom.extent(1), opts.u0_modes);

    TraceGrid& g = s.grid;
    g.ns = opts.arc_nodes;
    g.nt = opts.time_levels;
    g.ds = (s_hi - s_lo) / (g.ns - 1);
    g.dt = horizon / g.nt;
    g.s.resize(g.ns);
    for (int i = 0; i < g.ns; ++i) g.s[i] = s_lo + i * g.ds;
    g.t.resize(g.nt + 1);
    for (int k = 0; k <= g.nt; ++k) g.t[k] = k * g.dt;

    // One pass assembles the linear map from trace powers to boundary
    // values; every Picard sweep afterwards is a matrix-vector product.
    // Row r of the map feeds trace column ns + r (level k >= 1, node i).
    int rows = g.nt * g.ns;
    Mat a = Mat::Zero(rows, g.cols());
    Vec vol_rows(rows);
    for (int k = 1; k <= g.nt; ++k)
        for (int i = 0; i < g.ns; ++i) {
            int row = (k - 1) * g.ns + i;
            auto p = dom.boundary_point(g.s[i]).xy;
            memory_row(s.ker, arcs_at, g, {p[0], p[1], 0.0}, g.s[i], true,
                       g.t[k], opts.sigma_panels,
                       [&](int c, double wgt) { a(row, c) += wgt; });
            vol_rows[row] = s.vol.eval(p[0], p[1], g.t[k]);
        }

    s.v = Vec(g.cols());
    for (int i = 0; i < g.ns; ++i) {
        auto p = dom.boundary_point(g.s[i]).xy;
        double val = u0(p[0], p[1]);
        require(std::isfinite(val) && val > 0.0,
                "u0 must be positive on the closed box");
        s.v[g.col(0, i)] = val;
    }
    for (int r = 0; r < rows; ++r) s.v[g.ns + r] = vol_rows[r];

    double prev_res = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 1; it <= opts.max_picard; ++it) {
        Vec w = s.v.array().max(0.0).pow(q).matrix();
        Vec bnd = a * w;
        double res = 0.0;
        for (int r = 0; r < rows; ++r) {
            double vn = vol_rows[r] + bnd[r];
            res = std::max(res, std::abs(vn - s.v[g.ns + r]));
            s.v[g.ns + r] = vn;
        }
        s.iterations = it;
        s.residuals.push_back(res);
        if (!std::isfinite(res))
            throw std::runtime_error(
                "boundary trace fixed point diverged (non-finite update) at "
                "sweep " +
                std::to_string(it) + "; horizon " + format_double(horizon) +
                " is too long for this data");
        double scale = std::max(1.0, s.v.cwiseAbs().maxCoeff());
        if (res <= tol * scale) {
            converged = true;
            break;
        }
        if (res >= prev_res)
            throw std::runtime_error(
                "boundary trace fixed point stopped contracting at sweep " +
                std::to_string(it) + " (update " + format_double(res) +
                " after " + format_double(prev_res) + "); horizon " +
                format_double(horizon) + " is too long for this data");
        prev_res = res;
    }
    if (!converged)
        throw std::runtime_error(
            "boundary trace fixed point did not reach tolerance within " +
            std::to_string(opts.max_picard) + " sweeps; horizon " +
            format_double(horizon) + " is too long for this data");

    s.w = s.v.array().max(0.0).pow(q).matrix();
}

}  // namespace

RepresentationSolution representation_solve(
    const kernel::BoxKernel& eval, const Initial& u0,
    const geo::BoundarySchedule& schedule, double horizon, double q,
    double fixed_point_tol, const RepOptions& opts) {
    const geo::Domain& dom = eval.domain();
    check_solve_args(dom, horizon, q, fixed_point_tol, opts);
    require(schedule.domain().kind() == dom.kind() &&
                schedule.domain().extent(0) == dom.extent(0) &&
                schedule.domain().extent(1) == dom.extent(1),
            "schedule was built for a different domain");

    auto impl = std::make_unique<detail::SolutionState>(eval);
    impl->sched = schedule;
    geo::BoundaryArc arc0 = schedule.arc_at(0.0);
    std::vector<WeightedArc> scratch(1);
    auto arcs = [&](double tau) -> const std::vector<WeightedArc>& {
        geo::BoundaryArc a = impl->sched->arc_at(tau);
        scratch[0] = {a.start, a.end, 1.0};
        return scratch;
    };
    solve_core(*impl, u0, arc0.start, arc0.end, horizon, q, fixed_point_tol,
               opts, arcs);
    return RepresentationSolution(std::move(impl));
}

RepresentationSolution representation_solve(
    const kernel::BoxKernel& eval, const Initial& u0,
    const std::vector<WeightedArc>& footprint, double horizon, double q,
    double fixed_point_tol, const RepOptions& opts) {
    const geo::Domain& dom = eval.domain();
    check_solve_args(dom, horizon, q, fixed_point_tol, opts);
    require(!footprint.empty(), "footprint must have at least one piece");
    double perimeter = 2.0 * (dom.extent(0) + dom.extent(1));
    for (std::size_t i = 0; i < footprint.size(); ++i) {
        const WeightedArc& p = footprint[i];
        require(p.end > p.start, "footprint pieces need positive measure");
        require(p.weight > 0.0 && p.weight <= 1.0,
                "footprint weights must lie in (0, 1]");
        require(p.start >= 0.0 && p.end <= perimeter,
                "footprint must stay on the boundary walk");
        if (i > 0)
            require(std::abs(p.start - footprint[i - 1].end) <= 1e-12,
                    "footprint pieces must be contiguous");
    }

    auto impl = std::make_unique<detail::SolutionState>(eval);
    impl->footprint = footprint;
    auto arcs = [&](double) -> const std::vector<WeightedArc>& {
        return impl->footprint;
    };
    solve_core(*impl, u0, footprint.front().start, footprint.back().end,
               horizon, q, fixed_point_tol, opts, arcs);
    return RepresentationSolution(std::move(impl));
}

RepresentationSolution representation_solve(const kernel::BoxKernel& eval,
                                            const Initial& u0, double horizon,
                                            const RepOptions& opts) {
    const geo::Domain& dom = eval.domain();
    require(dom.kind() == geo::DomainKind::box2d,
            "representation solve needs a 2D box (no disk kernel)");
    require(horizon > 0.0 && std::isfinite(horizon),
            "horizon must be positive");
    auto impl = std::make_unique<detail::SolutionState>(eval);
    impl->horizon = horizon;
    impl->opts = opts;
    impl->vol =
        expand_initial(u0, dom.extent(0), dom.extent(1), opts.u0_modes);
    impl->grid.t = {0.0, horizon};
    return RepresentationSolution(std::move(impl));
}

}  // namespace nhkl::rep
