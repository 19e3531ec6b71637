#include "nhkl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "json.hpp"
#include "nhkl/util.hpp"

namespace nhkl::solver {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kChiSnap = 1e-12;
constexpr long kStepBudget = 20'000'000;

/// One boundary cell: a node's share of the boundary curve along one
/// outward direction.  coef_full multiplies u^q in the node's equation
/// when the cell lies entirely inside the radiating region; the product
/// quad_weight(node) * coef_full equals the cell's arc length, which is
/// what makes the discrete mass identity exact.  The disk's seam node
/// owns two arc pieces (the cell straddles s = 0); box corner nodes get
/// one cell per adjacent edge instead, because the two edges radiate
/// into perpendicular directions.
struct FluxCell {
    int id = 0;
    double coef_full = 0.0;
    std::vector<std::pair<double, double>> pieces;
};

struct Discretization {
    geo::Domain domain = geo::Domain::box(1.0, 1.0);
    int n1 = 0;
    int n2 = 0;
    Eigen::Index n = 0;
    SpMat A;   // zero-flux Laplacian; w^T A = 0 by construction
    Vec w;     // lumped quadrature weights
    std::vector<FluxCell> cells;
};

Discretization build_box(const geo::Domain& dom, int nx, int ny) {
    Discretization d;
    d.domain = dom;
    d.n1 = nx;
    d.n2 = ny;
    const double a = dom.extent(0);
    const double b = dom.extent(1);
    const double hx = a / nx;
    const double hy = b / ny;
    const auto n = static_cast<Eigen::Index>(nx + 1) * (ny + 1);
    d.n = n;
    auto id = [nx](int i, int j) {
        return static_cast<Eigen::Index>(j) * (nx + 1) + i;
    };

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(5 * n));
    d.w = Vec(n);
    const double ix2 = 1.0 / (hx * hx);
    const double iy2 = 1.0 / (hy * hy);
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const auto k = id(i, j);
            double diag = 0.0;
            // Reflected ghosts at the walls keep the row sums zero and the
            // weighted column sums zero (trapezoid weights halve exactly
            // where the stencil coefficient doubles).
            if (i == 0) {
                trip.emplace_back(k, id(1, j), 2.0 * ix2);
                diag -= 2.0 * ix2;
            } else if (i == nx) {
                trip.emplace_back(k, id(nx - 1, j), 2.0 * ix2);
                diag -= 2.0 * ix2;
            } else {
                trip.emplace_back(k, id(i - 1, j), ix2);
                trip.emplace_back(k, id(i + 1, j), ix2);
                diag -= 2.0 * ix2;
            }
            if (j == 0) {
                trip.emplace_back(k, id(i, 1), 2.0 * iy2);
                diag -= 2.0 * iy2;
            } else if (j == ny) {
                trip.emplace_back(k, id(i, ny - 1), 2.0 * iy2);
                diag -= 2.0 * iy2;
            } else {
                trip.emplace_back(k, id(i, j - 1), iy2);
                trip.emplace_back(k, id(i, j + 1), iy2);
                diag -= 2.0 * iy2;
            }
            trip.emplace_back(k, k, diag);
            const double fx = (i == 0 || i == nx) ? 0.5 : 1.0;
            const double fy = (j == 0 || j == ny) ? 0.5 : 1.0;
            d.w[k] = hx * hy * fx * fy;
        }
    }
    d.A.resize(n, n);
    d.A.setFromTriplets(trip.begin(), trip.end());

    // Boundary cells in the arc-length coordinate of the boundary walk:
    // bottom [0,a], right [a,a+b], top [a+b,2a+b] (x decreasing), left
    // [2a+b,2a+2b] (y decreasing).  Cells at wall ends are half width.
    auto add = [&d](Eigen::Index k, double coef, double lo, double hi) {
        FluxCell c;
        c.id = static_cast<int>(k);
        c.coef_full = coef;
        c.pieces.emplace_back(lo, hi);
        d.cells.push_back(std::move(c));
    };
    for (int i = 0; i <= nx; ++i) {
        const double s = i * hx;
        add(id(i, 0), 2.0 / hy, std::max(0.0, s - 0.5 * hx),
            std::min(a, s + 0.5 * hx));
        const double st = a + b + (a - s);
        add(id(i, ny), 2.0 / hy, std::max(a + b, st - 0.5 * hx),
            std::min(2.0 * a + b, st + 0.5 * hx));
    }
    for (int j = 0; j <= ny; ++j) {
        const double y = j * hy;
        const double sr = a + y;
        add(id(nx, j), 2.0 / hx, std::max(a, sr - 0.5 * hy),
            std::min(a + b, sr + 0.5 * hy));
        const double sl = 2.0 * a + b + (b - y);
        add(id(0, j), 2.0 / hx, std::max(2.0 * a + b, sl - 0.5 * hy),
            std::min(2.0 * a + 2.0 * b, sl + 0.5 * hy));
    }
    return d;
}

Discretization build_disk(const geo::Domain& dom, int nr, int nt) {
    Discretization d;
    d.domain = dom;
    d.n1 = nr;
    d.n2 = nt;
    const double R = 1.0;
    const double dr = R / nr;
    const double dth = 2.0 * std::numbers::pi / nt;
    const auto n = static_cast<Eigen::Index>(1) + static_cast<Eigen::Index>(nr) * nt;
    d.n = n;
    auto id = [nt](int i, int j) {
        return static_cast<Eigen::Index>(1) +
               static_cast<Eigen::Index>(i - 1) * nt + j;
    };

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(5 * n));
    d.w = Vec(n);

    // Centre node: the usual r = 0 closure, 4 (ring mean - centre) / dr^2,
    // paired with the quarter-cell weight pi dr^2 / 4 so the exchange with
    // ring one telescopes exactly.
    d.w[0] = 0.25 * std::numbers::pi * dr * dr;
    const double cc = 4.0 / (dr * dr * nt);
    for (int j = 0; j < nt; ++j) trip.emplace_back(0, id(1, j), cc);
    trip.emplace_back(0, 0, -4.0 / (dr * dr));

    for (int i = 1; i < nr; ++i) {
        const double ri = i * dr;
        const double am = (ri - 0.5 * dr) / (ri * dr * dr);
        const double ap = (ri + 0.5 * dr) / (ri * dr * dr);
        const double ang = 1.0 / (ri * ri * dth * dth);
        for (int j = 0; j < nt; ++j) {
            const auto k = id(i, j);
            const auto inner = (i == 1) ? Eigen::Index{0} : id(i - 1, j);
            trip.emplace_back(k, inner, am);
            trip.emplace_back(k, id(i + 1, j), ap);
            trip.emplace_back(k, id(i, (j + 1) % nt), ang);
            trip.emplace_back(k, id(i, (j + nt - 1) % nt), ang);
            trip.emplace_back(k, k, -(am + ap + 2.0 * ang));
            d.w[k] = ri * dr * dth;
        }
    }

    // Boundary ring: half-cell closure with weight dth*(dr/2)*(R - dr/2);
    // the radial coefficient 2/dr^2 then pairs exactly with ring nr-1, and
    // kappa below satisfies weight * kappa = R dth, the cell's arc length.
    const double wb = dth * 0.5 * dr * (R - 0.5 * dr);
    const double kappa = 2.0 * R / (dr * (R - 0.5 * dr));
    const double angb = 1.0 / (R * R * dth * dth);
    const double rad = 2.0 / (dr * dr);
    const double half = 0.5 * R * dth;
    const double per = 2.0 * std::numbers::pi * R;
    for (int j = 0; j < nt; ++j) {
        const auto k = id(nr, j);
        trip.emplace_back(k, id(nr - 1, j), rad);
        trip.emplace_back(k, id(nr, (j + 1) % nt), angb);
        trip.emplace_back(k, id(nr, (j + nt - 1) % nt), angb);
        trip.emplace_back(k, k, -(rad + 2.0 * angb));
        d.w[k] = wb;

        FluxCell c;
        c.id = static_cast<int>(k);
        c.coef_full = kappa;
        const double s = R * dth * j;
        if (j == 0) {
            c.pieces.emplace_back(0.0, half);
            c.pieces.emplace_back(per - half, per);
        } else {
            c.pieces.emplace_back(s - half, s + half);
        }
        d.cells.push_back(std::move(c));
    }
    d.A.resize(n, n);
    d.A.setFromTriplets(trip.begin(), trip.end());
    return d;
}

Eigen::Index node_count_checked(const geo::Domain& dom, int n1, int n2) {
    require(n1 >= 2 && n2 >= 2, "grid needs at least two cells per direction");
    switch (dom.kind()) {
        case geo::DomainKind::box2d:
            return static_cast<Eigen::Index>(n1 + 1) * (n2 + 1);
        case geo::DomainKind::disk2d:
            require(n2 >= 4, "disk grid needs at least four angular sectors");
            return 1 + static_cast<Eigen::Index>(n1) * n2;
        case geo::DomainKind::box3d:
            break;
    }
    throw std::invalid_argument(
        "3D boxes are not discretised; every study here runs in the plane");
}

Discretization build_disc(const geo::Domain& dom, int n1, int n2) {
    node_count_checked(dom, n1, n2);
    return dom.kind() == geo::DomainKind::box2d ? build_box(dom, n1, n2)
                                                : build_disk(dom, n1, n2);
}

double snapped_chi(const FluxCell& cell, const geo::BoundaryArc& arc) {
    double total = 0.0;
    double covered = 0.0;
    for (const auto& [lo, hi] : cell.pieces) {
        total += hi - lo;
        covered += (hi - lo) * geo::interval_coverage(lo, hi, arc.start, arc.end);
    }
    const double cov = covered / total;
    if (cov <= kChiSnap) return 0.0;
    if (cov >= 1.0 - kChiSnap) return 1.0;
    return 0.5;
}

/// Radiating node set at one time, aggregated over cells (a corner node
/// adds both of its edge contributions).
struct ActiveSet {
    std::vector<int> ids;      // sorted, unique
    std::vector<double> coef;  // total u^q coefficient per id
};

ActiveSet active_at(const Discretization& d,
                    const geo::BoundarySchedule* sched, double t) {
    ActiveSet s;
    if (sched == nullptr) return s;
    const geo::BoundaryArc arc = sched->arc_at(t);
    std::map<int, double> acc;
    for (const auto& cell : d.cells) {
        const double chi = snapped_chi(cell, arc);
        if (chi > 0.0) acc[cell.id] += chi * cell.coef_full;
    }
    s.ids.reserve(acc.size());
    s.coef.reserve(acc.size());
    for (const auto& [k, c] : acc) {
        s.ids.push_back(k);
        s.coef.push_back(c);
    }
    return s;
}

struct WEntry {
    Mat W;  // B^{-1} U, one column per active node
    Mat G;  // U^T W
    long last_use = 0;
};

struct FactorEntry {
    SpMat B;
    Eigen::SparseLU<SpMat> lu;
    std::map<std::vector<int>, WEntry> ws;
    long last_use = 0;
};

std::string resolution_label(const geo::Domain& dom, int n1, int n2) {
    char buf[64];
    const char* name = dom.kind() == geo::DomainKind::disk2d ? "disk" : "box2d";
    std::snprintf(buf, sizeof(buf), "%s %dx%d", name, n1, n2);
    return buf;
}

}  // namespace

double GridField::max_value() const {
    require(!values.empty(), "field is empty");
    return *std::max_element(values.begin(), values.end());
}

GridField make_field(const geo::Domain& domain, int n1, int n2,
                     const std::function<double(double, double)>& u0) {
    require(static_cast<bool>(u0), "initial data callable is empty");
    const Eigen::Index n = node_count_checked(domain, n1, n2);
    GridField f;
    f.domain = domain;
    f.n1 = n1;
    f.n2 = n2;
    f.values.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        const auto [x, y] = node_position(f, k);
        f.values[k] = u0(x, y);
        if (!std::isfinite(f.values[k]))
            throw std::invalid_argument("initial data is not finite at a node");
    }
    return f;
}

std::array<double, 2> node_position(const GridField& field, std::size_t id) {
    const int n1 = field.n1;
    const int n2 = field.n2;
    if (field.domain.kind() == geo::DomainKind::box2d) {
        const auto i = static_cast<int>(id % static_cast<std::size_t>(n1 + 1));
        const auto j = static_cast<int>(id / static_cast<std::size_t>(n1 + 1));
        require(j <= n2, "node index out of range");
        return {i * field.domain.extent(0) / n1,
                j * field.domain.extent(1) / n2};
    }
    if (id == 0) return {0.0, 0.0};
    const auto ring = static_cast<int>((id - 1) / static_cast<std::size_t>(n2)) + 1;
    const auto j = static_cast<int>((id - 1) % static_cast<std::size_t>(n2));
    require(ring <= n1, "node index out of range");
    const double r = static_cast<double>(ring) / n1;
    const double th = 2.0 * std::numbers::pi * j / n2;
    return {r * std::cos(th), r * std::sin(th)};
}

double RunReport::m_at(double t) const {
    require(!trace.empty(), "report has an empty trace");
    auto it = std::upper_bound(
        trace.begin(), trace.end(), t,
        [](double v, const TraceSample& s) { return v < s.t; });
    if (it == trace.begin()) return it->m_running;
    return std::prev(it)->m_running;
}

std::string RunReport::to_json() const {
    nlohmann::json j;
    j["verdict"] = verdict == Verdict::blowup ? "blowup" : "completed";
    if (verdict == Verdict::blowup)
        j["t_star_estimate"] = t_star;
    else
        j["t_star_estimate"] = nullptr;
    j["final_time"] = trace.empty() ? 0.0 : trace.back().t;
    j["final_m"] = trace.empty() ? 0.0 : trace.back().m_running;
    j["final_mass"] = trace.empty() ? 0.0 : trace.back().mass;
    j["m0"] = m0;
    j["q"] = q;
    j["dimension"] = dimension;
    j["area0"] = area0;
    j["resolution"] = resolution;
    j["schedule"] = schedule;
    j["samples"] = trace.size();
    return j.dump(2);
}

void RunReport::write_trace_csv(std::ostream& out) const {
    out << "t,M,A,mass\n";
    for (const auto& s : trace) {
        out << format_double(s.t) << ',' << format_double(s.m_running) << ','
            << format_double(s.area) << ',' << format_double(s.mass) << '\n';
    }
}

struct Stepper::Impl {
    Discretization disc;
    std::optional<geo::BoundarySchedule> sched;
    SolverConfig cfg;
    GridField field;
    Vec u;
    std::map<double, FactorEntry> cache;
    long tick = 0;

    const geo::BoundarySchedule* sched_ptr() const {
        return sched ? &*sched : nullptr;
    }

    FactorEntry& factor_for(double dth) {
        auto it = cache.find(dth);
        if (it == cache.end()) {
            if (cache.size() >= 6) {
                auto victim = cache.begin();
                for (auto c = cache.begin(); c != cache.end(); ++c)
                    if (c->second.last_use < victim->second.last_use) victim = c;
                cache.erase(victim);
            }
            it = cache.try_emplace(dth).first;
            FactorEntry& fe = it->second;
            SpMat eye(disc.n, disc.n);
            eye.setIdentity();
            fe.B = eye - dth * disc.A;
            fe.B.makeCompressed();
            fe.lu.compute(fe.B);
            if (fe.lu.info() != Eigen::Success) {
                cache.erase(it);
                throw std::runtime_error("sparse factorisation failed");
            }
        }
        it->second.last_use = ++tick;
        return it->second;
    }

    const WEntry& w_for(FactorEntry& fe, const std::vector<int>& ids) {
        auto it = fe.ws.find(ids);
        if (it == fe.ws.end()) {
            if (fe.ws.size() >= 8) {
                auto victim = fe.ws.begin();
                for (auto c = fe.ws.begin(); c != fe.ws.end(); ++c)
                    if (c->second.last_use < victim->second.last_use)
                        victim = c;
                fe.ws.erase(victim);
            }
            const auto m = static_cast<Eigen::Index>(ids.size());
            Mat U = Mat::Zero(disc.n, m);
            for (Eigen::Index k = 0; k < m; ++k) U(ids[k], k) = 1.0;
            WEntry e;
            e.W = fe.lu.solve(U);
            e.G = Mat(m, m);
            for (Eigen::Index r = 0; r < m; ++r) e.G.row(r) = e.W.row(ids[r]);
            it = fe.ws.emplace(ids, std::move(e)).first;
        }
        it->second.last_use = ++tick;
        return it->second;
    }

    double flux_of(const ActiveSet& act, const Vec& v) const {
        KahanSum s;
        for (std::size_t k = 0; k < act.ids.size(); ++k) {
            const int id = act.ids[k];
            s.add(disc.w[id] * act.coef[k] * std::pow(v[id], cfg.q));
        }
        return s.value();
    }

    bool try_step(double dt) {
        require(std::isfinite(dt) && dt > 0.0, "step size must be positive");
        require(dt <= cfg.dt_init * (1.0 + 1e-12),
                "step size must not exceed dt_init");
        const double q = cfg.q;
        const double theta =
            cfg.scheme == Scheme::crank_nicolson ? 0.5 : 1.0;
        const double t_new = field.time + dt;
        const ActiveSet act = active_at(disc, sched_ptr(), t_new);
        const auto m = static_cast<Eigen::Index>(act.ids.size());

        Vec rhs;
        if (theta < 1.0) {
            // Explicit half of Crank-Nicolson, radiating set at the old time.
            const ActiveSet old = active_at(disc, sched_ptr(), field.time);
            Vec expl = disc.A * u;
            for (std::size_t k = 0; k < old.ids.size(); ++k) {
                const int id = old.ids[k];
                expl[id] += old.coef[k] * std::pow(u[id], q);
            }
            rhs = u + dt * (1.0 - theta) * expl;
        } else {
            rhs = u;
        }

        const double dth = dt * theta;
        FactorEntry& fe = factor_for(dth);
        const WEntry* we = m > 0 ? &w_for(fe, act.ids) : nullptr;

        Vec v = u;
        double prev_res = std::numeric_limits<double>::infinity();
        int increases = 0;
        for (int iter = 0; iter < cfg.newton_max_iter; ++iter) {
            for (Eigen::Index k = 0; k < m; ++k)
                if (!(v[act.ids[k]] >= 0.0)) return false;
            Vec F = v - dth * (disc.A * v) - rhs;
            for (Eigen::Index k = 0; k < m; ++k) {
                const int id = act.ids[k];
                F[id] -= dth * act.coef[k] * std::pow(v[id], q);
            }
            const double res = F.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(res)) return false;
            if (res <= cfg.newton_tol * (1.0 + v.lpNorm<Eigen::Infinity>())) {
                if (!(v.minCoeff() > 0.0)) return false;
                u = v;
                Eigen::Map<Vec>(field.values.data(), disc.n) = u;
                field.time = t_new;
                return true;
            }
            if (res >= prev_res) {
                if (++increases >= 3) return false;
            } else {
                increases = 0;
            }
            prev_res = res;

            Vec y = fe.lu.solve(F);
            if (m > 0) {
                Vec uy(m);
                for (Eigen::Index k = 0; k < m; ++k) uy[k] = y[act.ids[k]];
                // Woodbury: J = B - U Sigma U^T, so J^{-1} F =
                // y + W (Sigma^{-1} - G)^{-1} U^T y.  A vanishing value has
                // vanishing derivative (q > 1), which the capped reciprocal
                // reproduces as "no correction from that node".
                Mat K = -we->G;
                for (Eigen::Index k = 0; k < m; ++k) {
                    const double sig =
                        dth * act.coef[k] * q * std::pow(v[act.ids[k]], q - 1.0);
                    K(k, k) += sig > 1e-300 ? 1.0 / sig : 1e300;
                }
                const Vec z = K.partialPivLu().solve(uy);
                v -= y + we->W * z;
            } else {
                v -= y;
            }
        }
        return false;
    }
};

Stepper::Stepper(GridField initial, const geo::BoundarySchedule& schedule,
                 const SolverConfig& config)
    : Stepper(std::move(initial), config) {
    const geo::Domain& sd = schedule.domain();
    const geo::Domain& fd = impl_->disc.domain;
    require(sd.kind() == fd.kind() && sd.extent(0) == fd.extent(0) &&
                sd.extent(1) == fd.extent(1),
            "schedule and field live on different domains");
    impl_->sched = schedule;
}

Stepper::Stepper(GridField initial, const SolverConfig& config)
    : impl_(std::make_unique<Impl>()) {
    require(config.q > 1.0, "flux power q must exceed 1");
    require(config.dt_init > 0.0 && config.dt_min > 0.0 &&
                config.dt_min < config.dt_init,
            "need 0 < dt_min < dt_init");
    require(config.blowup_threshold > 0.0, "blowup threshold must be positive");
    require(config.newton_tol > 0.0 && config.newton_max_iter >= 1,
            "Newton parameters out of range");
    impl_->disc = build_disc(initial.domain, initial.n1, initial.n2);
    require(initial.values.size() == static_cast<std::size_t>(impl_->disc.n),
            "field size does not match its resolution");
    require(initial.time >= 0.0, "field time must be nonnegative");
    for (double v : initial.values)
        require(std::isfinite(v) && v >= 0.0,
                "field values must be finite and nonnegative");
    impl_->cfg = config;
    impl_->field = std::move(initial);
    impl_->u = Eigen::Map<const Vec>(impl_->field.values.data(), impl_->disc.n);
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

const GridField& Stepper::field() const { return impl_->field; }

bool Stepper::try_step(double dt) { return impl_->try_step(dt); }

std::vector<BoundaryNodeInfo> Stepper::active_boundary(double t) const {
    std::vector<BoundaryNodeInfo> out;
    if (!impl_->sched) return out;
    const geo::BoundaryArc arc = impl_->sched->arc_at(t);
    for (const auto& cell : impl_->disc.cells) {
        const double chi = snapped_chi(cell, arc);
        if (chi <= 0.0) continue;
        out.push_back({cell.id, chi, chi * cell.coef_full,
                       impl_->disc.w[cell.id]});
    }
    return out;
}

double Stepper::quadrature_mass() const {
    return impl_->disc.w.dot(impl_->u);
}

double Stepper::boundary_flux_integral() const {
    const ActiveSet act =
        active_at(impl_->disc, impl_->sched_ptr(), impl_->field.time);
    return impl_->flux_of(act, impl_->u);
}

namespace {

GridField step_impl(const GridField& field,
                    const geo::BoundarySchedule* schedule,
                    const SolverConfig& config, double dt) {
    auto st = schedule ? Stepper(field, *schedule, config)
                       : Stepper(field, config);
    if (!st.try_step(dt))
        throw StepRejected("Newton failed to converge; halve dt and retry");
    return st.field();
}

RunReport run_impl(const GridField& u0, const geo::BoundarySchedule* schedule,
                   const SolverConfig& config, double horizon) {
    require(std::isfinite(horizon) && horizon > u0.time,
            "horizon must exceed the field's start time");
    double peak = 0.0;
    for (double v : u0.values) {
        if (v < 0.0)
            throw std::invalid_argument("initial data has negative entries");
        peak = std::max(peak, v);
    }
    require(peak > 0.0, "initial data must not vanish identically");

    auto st = schedule ? Stepper(u0, *schedule, config) : Stepper(u0, config);
    RunReport rep;
    rep.m0 = peak;
    rep.q = config.q;
    rep.dimension = u0.domain.dimension();
    rep.area0 = schedule ? schedule->initial_area() : 0.0;
    rep.resolution = resolution_label(u0.domain, u0.n1, u0.n2);
    rep.schedule = schedule ? schedule->describe() : "none (zero flux)";

    double m_run = peak;
    auto area_of = [schedule](double t) {
        return schedule ? schedule->area_at(t) : 0.0;
    };
    rep.trace.push_back(
        {u0.time, m_run, area_of(u0.time), st.quadrature_mass(), 0.0});

    double dt = config.dt_init;
    int streak = 0;
    const double land = 1e-12 * std::max(1.0, std::abs(horizon));
    long steps = 0;
    while (st.field().time < horizon - land) {
        if (++steps > kStepBudget)
            throw std::runtime_error("step budget exhausted before the horizon");
        const double dt_try = std::min(dt, horizon - st.field().time);
        if (st.try_step(dt_try)) {
            m_run = std::max(m_run, st.field().max_value());
            rep.trace.push_back({st.field().time, m_run,
                                 area_of(st.field().time),
                                 st.quadrature_mass(), dt_try});
            if (++streak >= 5) {
                dt = std::min(dt * 1.2, config.dt_init);
                streak = 0;
            }
        } else {
            streak = 0;
            dt = 0.5 * dt_try;
            if (dt < config.dt_min) {
                if (m_run >= config.blowup_threshold) {
                    rep.verdict = Verdict::blowup;
                    rep.t_star = st.field().time;
                    rep.final_field = st.field();
                    return rep;
                }
                throw std::runtime_error(
                    "time step collapsed below dt_min while the maximum "
                    "stayed under the blowup threshold (stiffness, not "
                    "blowup)");
            }
        }
    }
    rep.verdict = Verdict::completed;
    rep.t_star = st.field().time;
    rep.final_field = st.field();
    return rep;
}

std::vector<GrowthViolation> growth_core(
    const RunReport& report, const std::function<double(double)>& area_of,
    double alpha, double c_hat) {
    require(report.trace.size() >= 2, "growth check needs a dense trace");
    const int n = report.dimension;
    require(n >= 2, "dimension out of range");
    require(alpha >= 0.0 && alpha < 1.0 / (n - 1),
            "alpha must lie in [0, 1/(n-1))");
    require(c_hat > 0.0, "calibration constant must be positive");
    const double expo = 0.5 * (1.0 - (n - 1) * alpha);
    const double t0 = report.trace.front().t;
    const double t_end = report.trace.back().t;
    require(t_end > t0, "trace spans no time");

    std::vector<GrowthViolation> out;
    constexpr int kBases = 40;
    constexpr std::array<double, 9> kFractions = {
        1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 0.3, 1.0};
    for (int b = 0; b < kBases; ++b) {
        const double T = t0 + (t_end - t0) * b / kBases;
        const double remaining = t_end - T;
        if (remaining <= 0.0) continue;
        const double t_cap = std::min(1.0, remaining);
        const double mt = report.m_at(T);
        const double a_t = area_of(T);
        for (double f : kFractions) {
            const double t = f * t_cap;
            const double mtt = report.m_at(T + t);
            const double lhs = (mtt - mt) / std::pow(mtt, report.q);
            const double rhs =
                c_hat * std::pow(a_t, alpha) * std::pow(t, expo);
            if (lhs > 1.05 * rhs + 1e-14) out.push_back({T, t, lhs, rhs});
        }
    }
    return out;
}

}  // namespace

GridField step(const GridField& field, const geo::BoundarySchedule& schedule,
               const SolverConfig& config, double dt) {
    return step_impl(field, &schedule, config, dt);
}

GridField step(const GridField& field, const SolverConfig& config, double dt) {
    return step_impl(field, nullptr, config, dt);
}

RunReport run(const GridField& u0, const geo::BoundarySchedule& schedule,
              const SolverConfig& config, double horizon) {
    return run_impl(u0, &schedule, config, horizon);
}

RunReport run(const GridField& u0, const SolverConfig& config, double horizon) {
    return run_impl(u0, nullptr, config, horizon);
}

LifespanEstimate estimate_lifespan(
    const geo::Domain& domain, const std::function<double(double, double)>& u0,
    const geo::BoundarySchedule& schedule, const SolverConfig& config,
    const std::vector<std::pair<int, int>>& resolutions, double horizon) {
    require(resolutions.size() >= 3,
            "lifespan extrapolation needs at least three resolutions");
    for (std::size_t l = 1; l < resolutions.size(); ++l)
        require(resolutions[l].first > resolutions[l - 1].first &&
                    resolutions[l].second >= resolutions[l - 1].second,
                "resolutions must refine monotonically");

    LifespanEstimate est;
    SolverConfig level_cfg = config;
    double last_dt = config.dt_init;
    for (const auto& [n1, n2] : resolutions) {
        const GridField f = make_field(domain, n1, n2, u0);
        const RunReport rep = run(f, schedule, level_cfg, horizon);
        if (rep.verdict != Verdict::blowup)
            throw std::runtime_error(
                "lifespan estimation needs blowup at every resolution");
        est.history.push_back({n1, n2, level_cfg.dt_init, rep.t_star});
        last_dt = rep.trace.back().dt;
        level_cfg.dt_init *= 0.5;
        level_cfg.dt_min = std::min(level_cfg.dt_min, level_cfg.dt_init * 0.5);
    }

    const std::size_t k = est.history.size();
    const double t1 = est.history[k - 3].t_star;
    const double t2 = est.history[k - 2].t_star;
    const double t3 = est.history[k - 1].t_star;
    double lo = est.history[0].t_star;
    double hi = lo;
    for (const auto& r : est.history) {
        lo = std::min(lo, r.t_star);
        hi = std::max(hi, r.t_star);
    }
    const double d1 = t2 - t1;
    const double d2 = t3 - t2;
    if (d1 == 0.0 || d2 == 0.0 || (d1 > 0.0) != (d2 > 0.0)) {
        est.t_star = t3;
        est.uncertainty = hi - lo;
        est.low_confidence = true;
        return est;
    }
    const double p = std::clamp(std::log2(std::abs(d1 / d2)), 0.5, 3.0);
    est.t_star = t3 + d2 / (std::exp2(p) - 1.0);
    est.uncertainty = std::abs(est.t_star - t3) + last_dt;
    est.low_confidence = false;
    return est;
}

std::vector<GrowthViolation> growth_rate_check(
    const RunReport& report, const geo::BoundarySchedule& schedule,
    double alpha, double c_hat) {
    return growth_core(
        report, [&schedule](double t) { return schedule.area_at(t); }, alpha,
        c_hat);
}

std::vector<GrowthViolation> growth_rate_check(const RunReport& report,
                                               double alpha, double c_hat) {
    return growth_core(
        report,
        [&report](double t) {
            auto it = std::upper_bound(
                report.trace.begin(), report.trace.end(), t,
                [](double v, const TraceSample& s) { return v < s.t; });
            if (it == report.trace.begin()) return it->area;
            return std::prev(it)->area;
        },
        alpha, c_hat);
}

}  // namespace nhkl::solver
