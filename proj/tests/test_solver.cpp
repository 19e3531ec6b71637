#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "nhkl/geometry.hpp"
#include "nhkl/kernel.hpp"
#include "nhkl/solver.hpp"

using namespace nhkl;
using namespace nhkl::solver;
using geo::DecayProfile;
using geo::Domain;

namespace {

constexpr double kPi = std::numbers::pi;

// First zero of J0'; the radial mode J0(k r) then has zero flux at r = 1.
constexpr double kBesselK = 3.8317059702075123;

double bessel_j0(double x) {
    // Power series; x stays below 4 here, so 25 terms reach roundoff.
    double term = 1.0;
    double sum = 1.0;
    const double m4 = -0.25 * x * x;
    for (int m = 1; m <= 25; ++m) {
        term *= m4 / (static_cast<double>(m) * m);
        sum += term;
    }
    return sum;
}

// Discrete eigenvalue of the reflected-ghost second difference for the
// mode cos(pi x / L) sampled with spacing h: 2 (1 - cos(pi h / L)) / h^2.
double discrete_lambda(double h, double L) {
    return 2.0 * (1.0 - std::cos(kPi * h / L)) / (h * h);
}

geo::BoundarySchedule fixed_arc(const Domain& dom, double area) {
    return geo::make_schedule(dom, area, DecayProfile::constant());
}

SolverConfig blowup_config() {
    SolverConfig c;
    c.q = 2.0;
    c.dt_init = 1e-3;
    c.dt_min = 1e-12;
    c.blowup_threshold = 1e5;
    return c;
}

GridField unit_field(const Domain& dom, int n1, int n2) {
    return make_field(dom, n1, n2, [](double, double) { return 1.0; });
}

}  // namespace

TEST_CASE("interface weights snap to 0, 1/2, 1 across the radiating arc") {
    const Domain dom = Domain::box(1.0, 1.0);
    // Area 0.5 centred on the bottom edge: arc [0.25, 0.75].  With eight
    // cells the endpoints fall strictly inside the cells of nodes 2 and 6.
    const auto sched = fixed_arc(dom, 0.5);
    Stepper st(unit_field(dom, 8, 8), sched, SolverConfig{});

    const auto active = st.active_boundary(0.0);
    REQUIRE(active.size() == 5);
    const double hy = 1.0 / 8.0;
    std::vector<double> want_chi = {0.5, 1.0, 1.0, 1.0, 0.5};
    double measure = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        CHECK(active[k].id == static_cast<int>(2 + k));  // bottom row ids
        CHECK(active[k].chi == doctest::Approx(want_chi[k]));
        CHECK(active[k].coefficient ==
              doctest::Approx(want_chi[k] * 2.0 / hy));
        measure += active[k].quad_weight * active[k].coefficient;
    }
    // chi recovers the arc measure exactly here (endpoints at cell midpoints).
    CHECK(measure == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("constant field is an exact steady state without radiation") {
    const Domain dom = Domain::box(1.0, 1.0);
    GridField f = make_field(dom, 12, 12, [](double, double) { return 3.7; });
    const GridField g = step(f, SolverConfig{}, 1e-3);
    CHECK(g.time == doctest::Approx(1e-3));
    for (double v : g.values) CHECK(v == doctest::Approx(3.7).epsilon(1e-13));
}

TEST_CASE("one radiating step raises the mass by dt times the flux integral") {
    const Domain dom = Domain::box(1.0, 1.0);
    const auto sched = fixed_arc(dom, 0.5);
    SolverConfig cfg;
    cfg.q = 2.0;
    cfg.newton_tol = 1e-13;  // the identity is only as exact as the residual
    const double dt = 1e-4;

    Stepper st(unit_field(dom, 16, 16), sched, cfg);
    const double mass0 = st.quadrature_mass();
    REQUIRE(st.try_step(dt));
    const double mass1 = st.quadrature_mass();
    const double flux = st.boundary_flux_integral();

    // Exact discrete identity for implicit Euler: the flux is evaluated at
    // the new time and state.
    CHECK(mass1 - mass0 == doctest::Approx(dt * flux).epsilon(1e-8));
    // And the flux itself approximates |Gamma_1| * c^q for u near 1.
    CHECK(flux == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("mass identity holds cumulatively for both schemes") {
    const Domain dom = Domain::box(1.0, 1.0);
    const auto sched = fixed_arc(dom, 0.3);
    for (Scheme scheme : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
        CAPTURE(static_cast<int>(scheme));
        SolverConfig cfg;
        cfg.q = 2.0;
        cfg.scheme = scheme;
        cfg.newton_tol = 1e-13;
        const double theta = scheme == Scheme::crank_nicolson ? 0.5 : 1.0;
        const double dt = 5e-4;

        Stepper st(unit_field(dom, 24, 24), sched, cfg);
        const double mass0 = st.quadrature_mass();
        double promised = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double flux_old = st.boundary_flux_integral();
            const double before = st.quadrature_mass();
            REQUIRE(st.try_step(dt));
            const double flux_new = st.boundary_flux_integral();
            const double gain =
                dt * (theta * flux_new + (1.0 - theta) * flux_old);
            CHECK(st.quadrature_mass() - before ==
                  doctest::Approx(gain).epsilon(1e-8));
            promised += gain;
        }
        CHECK(st.quadrature_mass() - mass0 ==
              doctest::Approx(promised).epsilon(1e-7));
    }
}

TEST_CASE("pure diffusion follows the discrete eigenmode decay exactly") {
    const Domain dom = Domain::box(1.0, 1.0);
    const int n = 32;
    GridField f = make_field(dom, n, n, [](double x, double y) {
        return 1.5 + 0.5 * std::cos(kPi * x) * std::cos(kPi * y);
    });
    SolverConfig cfg;
    cfg.dt_init = 1e-3;
    const int steps = 10;
    const RunReport rep = run(f, cfg, steps * 1e-3);
    REQUIRE(rep.verdict == Verdict::completed);

    const double lam = 2.0 * discrete_lambda(1.0 / n, 1.0);
    const double decay = std::pow(1.0 + 1e-3 * lam, -steps);
    for (std::size_t id = 0; id < rep.final_field.values.size(); ++id) {
        const auto [x, y] = node_position(rep.final_field, id);
        const double want =
            1.5 + 0.5 * decay * std::cos(kPi * x) * std::cos(kPi * y);
        CHECK(rep.final_field.values[id] == doctest::Approx(want).epsilon(1e-10));
    }

    // Quadrature mass is conserved without radiation.
    double lo = rep.trace.front().mass, hi = lo;
    for (const auto& s : rep.trace) {
        lo = std::min(lo, s.mass);
        hi = std::max(hi, s.mass);
    }
    CHECK(hi - lo <= 1e-10 * hi);
}

TEST_CASE("fine-grid diffusion matches the kernel oracle to 1e-3 at t=0.1") {
    const Domain dom = Domain::box(1.0, 1.0);
    const int n = 128;
    auto u0 = [](double x, double y) {
        return 1.5 + 0.5 * std::cos(kPi * x) * std::cos(kPi * y);
    };
    GridField f = make_field(dom, n, n, u0);
    SolverConfig cfg;
    cfg.dt_init = 2e-4;
    const RunReport rep = run(f, cfg, 0.1);
    REQUIRE(rep.verdict == Verdict::completed);

    // Continuous solution of the mode: sup-norm error over every node.
    const double decay = std::exp(-2.0 * kPi * kPi * 0.1);
    double sup = 0.0;
    for (std::size_t id = 0; id < rep.final_field.values.size(); ++id) {
        const auto [x, y] = node_position(rep.final_field, id);
        const double want =
            1.5 + 0.5 * decay * std::cos(kPi * x) * std::cos(kPi * y);
        sup = std::max(sup, std::abs(rep.final_field.values[id] - want));
    }
    CHECK(sup <= 1e-3);

    // Cross-oracle: smoothing the same data with the zero-flux kernel.
    const kernel::BoxKernel ker(dom);
    auto g = [&u0](const kernel::Point& p) { return u0(p[0], p[1]); };
    for (double px : {0.25, 0.5}) {
        for (double py : {0.375, 0.75}) {
            const double want = ker.volume_integral({px, py, 0.0}, 0.1, g);
            const int i = static_cast<int>(std::lround(px * n));
            const int j = static_cast<int>(std::lround(py * n));
            const double got =
                rep.final_field.values[static_cast<std::size_t>(j) * (n + 1) + i];
            CHECK(got == doctest::Approx(want).epsilon(2e-3));
        }
    }
}

TEST_CASE("Crank-Nicolson beats implicit Euler on smooth decay") {
    const Domain dom = Domain::box(1.0, 1.0);
    const int n = 32;
    auto u0 = [](double x, double y) {
        return 1.5 + 0.5 * std::cos(kPi * x) * std::cos(kPi * y);
    };
    const double horizon = 0.05;
    const double exact_decay = std::exp(-2.0 * kPi * kPi * horizon);

    auto sup_error = [&](Scheme scheme) {
        SolverConfig cfg;
        cfg.scheme = scheme;
        cfg.dt_init = 2.5e-3;
        const RunReport rep = run(make_field(dom, n, n, u0), cfg, horizon);
        double sup = 0.0;
        for (std::size_t id = 0; id < rep.final_field.values.size(); ++id) {
            const auto [x, y] = node_position(rep.final_field, id);
            const double want = 1.5 + 0.5 * exact_decay * std::cos(kPi * x) *
                                          std::cos(kPi * y);
            sup = std::max(sup, std::abs(rep.final_field.values[id] - want));
        }
        return sup;
    };
    const double e_ie = sup_error(Scheme::implicit_euler);
    const double e_cn = sup_error(Scheme::crank_nicolson);
    CHECK(e_cn * 5.0 < e_ie);
}

TEST_CASE("radiation off keeps the maximum under the initial one") {
    const Domain dom = Domain::box(1.0, 1.0);
    GridField f = make_field(dom, 24, 24,
                             [](double x, double y) { return 1.0 + x * y; });
    SolverConfig cfg;
    cfg.dt_init = 2e-3;
    const RunReport rep = run(f, cfg, 0.5);
    REQUIRE(rep.verdict == Verdict::completed);
    CHECK(rep.trace.back().m_running <= 2.0 * (1.0 + 1e-12));
    CHECK(rep.m0 == doctest::Approx(2.0));
    // Diffusion has flattened the profile considerably by t = 0.5.
    const auto& v = rep.final_field.values;
    const double spread = *std::max_element(v.begin(), v.end()) -
                          *std::min_element(v.begin(), v.end());
    CHECK(spread < 0.02);
    CHECK(rep.trace.back().area == 0.0);

    // With A = 0 the growth bound forces M constant; no violations even
    // with a vanishing constant.
    CHECK(growth_rate_check(rep, 0.75, 1e-12).empty());
}

TEST_CASE("fixed arc drives blowup before the mass-based deadline") {
    const Domain dom = Domain::box(1.0, 1.0);
    const SolverConfig cfg = blowup_config();
    const RunReport rep =
        run(unit_field(dom, 24, 24), fixed_arc(dom, 0.1), cfg, 20.0);

    REQUIRE(rep.verdict == Verdict::blowup);
    // For u0 = 1, q = 2 the mass comparison gives T* <= |Omega| / |Gamma_1|.
    CHECK(rep.t_star <= 10.0);
    CHECK(rep.t_star >= 0.5);
    CHECK(rep.trace.back().m_running >= cfg.blowup_threshold);

    // Monotone running maximum, positivity, dt cap.
    for (std::size_t k = 1; k < rep.trace.size(); ++k) {
        CHECK(rep.trace[k].m_running >= rep.trace[k - 1].m_running);
        CHECK(rep.trace[k].dt <= cfg.dt_init * (1.0 + 1e-12));
    }
    for (double v : rep.final_field.values) CHECK(v > 0.0);

    // A larger radiating arc can only blow up sooner.
    const RunReport wide =
        run(unit_field(dom, 24, 24), fixed_arc(dom, 0.2), cfg, 20.0);
    REQUIRE(wide.verdict == Verdict::blowup);
    CHECK(wide.t_star < rep.t_star);

    // Growth-rate check: a generous constant passes, a absurdly small one
    // flags the run (the detector is not vacuous).
    CHECK(growth_rate_check(rep, fixed_arc(dom, 0.1), 0.75, 10.0).empty());
    CHECK(!growth_rate_check(rep, fixed_arc(dom, 0.1), 0.75, 1e-6).empty());

    // Doubling the threshold barely moves the blowup time.
    SolverConfig high = cfg;
    high.blowup_threshold = 2e5;
    const RunReport rep2 =
        run(unit_field(dom, 24, 24), fixed_arc(dom, 0.1), high, 20.0);
    REQUIRE(rep2.verdict == Verdict::blowup);
    CHECK(std::abs(rep2.t_star - rep.t_star) <= 5e-3 * rep.t_star);

    // Serialization carries the verdict and the trace stays parseable.
    const auto j = nlohmann::json::parse(rep.to_json());
    CHECK(j["verdict"] == "blowup");
    CHECK(j["t_star_estimate"].get<double>() == doctest::Approx(rep.t_star));
    std::ostringstream csv;
    rep.write_trace_csv(csv);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,M,A,mass");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == rep.trace.size());
}

TEST_CASE("lifespan extrapolation across three grids stays coherent") {
    const Domain dom = Domain::box(1.0, 1.0);
    SolverConfig cfg = blowup_config();
    cfg.dt_init = 2e-3;
    const auto sched = fixed_arc(dom, 0.2);
    const auto est = estimate_lifespan(
        dom, [](double, double) { return 1.0; }, sched, cfg,
        {{16, 16}, {24, 24}, {32, 32}}, 20.0);

    REQUIRE(est.history.size() == 3);
    double lo = est.history[0].t_star, hi = lo;
    for (const auto& r : est.history) {
        CHECK(r.t_star > 0.0);
        lo = std::min(lo, r.t_star);
        hi = std::max(hi, r.t_star);
    }
    CHECK(est.uncertainty >= 0.0);
    if (est.low_confidence) {
        CHECK(est.t_star == doctest::Approx(est.history.back().t_star));
        CHECK(est.uncertainty == doctest::Approx(hi - lo));
    } else {
        // The extrapolated value lies near the finest level.
        CHECK(std::abs(est.t_star - est.history.back().t_star) <=
              std::max(3.0 * (hi - lo), 1e-6));
    }
    // dt_init was halved per level and recorded.
    CHECK(est.history[1].dt_init == doctest::Approx(cfg.dt_init * 0.5));
    CHECK(est.history[2].dt_init == doctest::Approx(cfg.dt_init * 0.25));
}

TEST_CASE("disk: radial Bessel mode decays at the analytic rate") {
    const Domain dom = Domain::disk();
    const int nr = 32, nt = 64;
    auto u0 = [](double x, double y) {
        return 1.0 + 0.5 * bessel_j0(kBesselK * std::hypot(x, y));
    };
    GridField f = make_field(dom, nr, nt, u0);
    SolverConfig cfg;
    cfg.dt_init = 2e-4;
    const double horizon = 0.05;
    const RunReport rep = run(f, cfg, horizon);
    REQUIRE(rep.verdict == Verdict::completed);

    const double decay = std::exp(-kBesselK * kBesselK * horizon);
    double sup = 0.0;
    for (std::size_t id = 0; id < rep.final_field.values.size(); ++id) {
        const auto [x, y] = node_position(rep.final_field, id);
        const double want =
            1.0 + 0.5 * decay * bessel_j0(kBesselK * std::hypot(x, y));
        sup = std::max(sup, std::abs(rep.final_field.values[id] - want));
    }
    CHECK(sup <= 5e-3);

    // Mass conservation; the lumped weights integrate constants to
    // pi - pi dr^2 / 4 by construction (quarter cell at the centre).
    double lo = rep.trace.front().mass, hi = lo;
    for (const auto& s : rep.trace) {
        lo = std::min(lo, s.mass);
        hi = std::max(hi, s.mass);
    }
    CHECK(hi - lo <= 1e-10 * hi);
    Stepper ones(unit_field(dom, nr, nt), SolverConfig{});
    const double dr = 1.0 / nr;
    CHECK(ones.quadrature_mass() ==
          doctest::Approx(kPi * (1.0 - 0.25 * dr * dr)).epsilon(1e-12));
}

TEST_CASE("disk: radiating cap obeys the exact mass identity") {
    const Domain dom = Domain::disk();
    const auto sched = fixed_arc(dom, 0.5);
    SolverConfig cfg;
    cfg.q = 2.0;
    cfg.newton_tol = 1e-13;
    Stepper st(unit_field(dom, 24, 48), sched, cfg);

    double measure = 0.0;
    for (const auto& b : st.active_boundary(0.0))
        measure += b.quad_weight * b.coefficient;
    // Snapping resolves the cap to within one boundary cell.
    CHECK(std::abs(measure - 0.5) <= 2.0 * kPi / 48.0);

    const double mass0 = st.quadrature_mass();
    REQUIRE(st.try_step(1e-4));
    CHECK(st.quadrature_mass() - mass0 ==
          doctest::Approx(1e-4 * st.boundary_flux_integral()).epsilon(1e-9));
}

TEST_CASE("repeat runs are deterministic") {
    const Domain dom = Domain::box(1.0, 1.0);
    const SolverConfig cfg = blowup_config();
    const auto sched = fixed_arc(dom, 0.2);
    const RunReport a = run(unit_field(dom, 16, 16), sched, cfg, 20.0);
    const RunReport b = run(unit_field(dom, 16, 16), sched, cfg, 20.0);
    REQUIRE(a.trace.size() == b.trace.size());
    CHECK(a.t_star == b.t_star);
    for (std::size_t k = 0; k < a.trace.size(); k += 97) {
        CHECK(a.trace[k].t == b.trace[k].t);
        CHECK(a.trace[k].m_running == b.trace[k].m_running);
        CHECK(a.trace[k].mass == b.trace[k].mass);
    }
}

TEST_CASE("validation and rejection paths") {
    const Domain dom = Domain::box(1.0, 1.0);
    SUBCASE("3D boxes are refused") {
        CHECK_THROWS_AS(make_field(Domain::box(1, 1, 1), 8, 8,
                                   [](double, double) { return 1.0; }),
                        std::invalid_argument);
    }
    SUBCASE("degenerate resolutions are refused") {
        CHECK_THROWS_AS(
            make_field(dom, 1, 8, [](double, double) { return 1.0; }),
            std::invalid_argument);
        CHECK_THROWS_AS(
            make_field(Domain::disk(), 8, 3, [](double, double) { return 1.0; }),
            std::invalid_argument);
    }
    SUBCASE("negative or vanishing initial data is refused by run") {
        GridField neg = make_field(dom, 8, 8, [](double x, double) {
            return x - 0.5;
        });
        CHECK_THROWS_AS(run(neg, SolverConfig{}, 0.1), std::invalid_argument);
        GridField zero =
            make_field(dom, 8, 8, [](double, double) { return 0.0; });
        CHECK_THROWS_AS(run(zero, SolverConfig{}, 0.1), std::invalid_argument);
    }
    SUBCASE("config must be coherent") {
        SolverConfig bad;
        bad.q = 1.0;
        CHECK_THROWS_AS(run(unit_field(dom, 8, 8), bad, 0.1),
                        std::invalid_argument);
        SolverConfig order;
        order.dt_min = 1.0;
        CHECK_THROWS_AS(run(unit_field(dom, 8, 8), order, 0.1),
                        std::invalid_argument);
    }
    SUBCASE("steps beyond dt_init are refused") {
        CHECK_THROWS_AS(step(unit_field(dom, 8, 8), SolverConfig{}, 1.0),
                        std::invalid_argument);
    }
    SUBCASE("an unsolvable implicit step is rejected, not fudged") {
        // dt * c * u ~ 8 for this setup: the implicit closure v = u + dt c v^2
        // has no real root, so Newton must report failure.
        SolverConfig cfg;
        cfg.q = 2.0;
        cfg.dt_init = 0.5;
        CHECK_THROWS_AS(
            step(unit_field(dom, 8, 8), fixed_arc(dom, 0.5), cfg, 0.5),
            StepRejected);
    }
    SUBCASE("growth check rejects out-of-range exponents") {
        SolverConfig cfg;
        cfg.dt_init = 5e-3;
        const RunReport rep = run(unit_field(dom, 8, 8), cfg, 0.05);
        CHECK_THROWS_AS(growth_rate_check(rep, 1.5, 1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(growth_rate_check(rep, -0.1, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("node positions map both geometries correctly") {
    const GridField box = unit_field(Domain::box(2.0, 1.0), 8, 4);
    const auto c0 = node_position(box, 0);
    CHECK(c0[0] == 0.0);
    CHECK(c0[1] == 0.0);
    const auto c1 = node_position(box, 8);
    CHECK(c1[0] == doctest::Approx(2.0));
    CHECK(c1[1] == 0.0);
    const std::size_t far_corner = 4 * (8 + 1) + 8;  // j*(n1+1)+i
    const auto c2 = node_position(box, far_corner);
    CHECK(c2[0] == doctest::Approx(2.0));
    CHECK(c2[1] == doctest::Approx(1.0));

    const GridField disk = unit_field(Domain::disk(), 4, 8);
    const auto d0 = node_position(disk, 0);
    CHECK(d0[0] == 0.0);
    const auto rim = node_position(disk, 1 + 3 * 8);  // ring 4, angle 0
    CHECK(rim[0] == doctest::Approx(1.0));
    CHECK(rim[1] == doctest::Approx(0.0));
}
