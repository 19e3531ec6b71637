#include "nhkl/accept.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhkl/geometry.hpp"
#include "nhkl/kernel.hpp"
#include "nhkl/representation.hpp"
#include "nhkl/scenario.hpp"
#include "nhkl/schedule.hpp"
#include "nhkl/seqlab.hpp"
#include "nhkl/solver.hpp"
#include "nhkl/util.hpp"

namespace nhkl::accept {
namespace {

std::string fmt(const char* f, ...) {
    char buf[2048];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

/// Shared artifacts.  The alpha = 0.75 calibration feeds criteria 4 and 10;
/// the fixed-arc blowup run feeds criteria 6 and 10.  Both are deterministic,
/// so memoizing changes nothing but the runtime.
struct Ctx {
    std::string out_root;
    std::optional<kernel::BoxKernel> ker;
    std::optional<kernel::BtiCalibration> cal75;
    std::optional<scen::ScenarioResult> blowup;

    kernel::BoxKernel& unit_kernel() {
        if (!ker) ker.emplace(geo::Domain::box(1.0, 1.0));
        return *ker;
    }

    const kernel::BtiCalibration& calibration75() {
        if (!cal75) {
            kernel::BtiPlan plan;
            plan.arc_measures = {0.05, 0.1, 0.2, 0.4};
            plan.times = {0.05, 0.25, 0.6, 1.0};
            plan.random_samples = 40;
            plan.seed = 7;
            cal75 = kernel::calibrate_bti_constant(unit_kernel(), 0.75, plan);
        }
        return *cal75;
    }

    const scen::ScenarioResult& blowup_run() {
        if (!blowup) {
            auto s = scen::builtin_scenario("blowup_fixed_gamma");
            blowup = out_root.empty() ? scen::run_scenario(s)
                                      : scen::run_scenario(s, out_root);
        }
        return *blowup;
    }
};

// 1: the kernel integrates to one against the constant density.
CriterionResult c1(Ctx& ctx) {
    CriterionResult r{1, "kernel normalization", false, "", 0.0};
    auto& k = ctx.unit_kernel();
    auto one = [](const kernel::Point&) { return 1.0; };
    Rng rng(11u);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        kernel::Point x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        for (double t : {0.01, 0.1, 0.5, 1.0})
            worst = std::max(worst,
                             std::abs(k.volume_integral(x, t, one) - 1.0));
    }
    r.pass = worst <= 1e-8;
    r.detail = fmt("max |int N(x,y,t) dy - 1| = %.3e over 20 points x "
                   "4 times (tol 1e-8)",
                   worst);
    return r;
}

// 2: symmetry in the spatial arguments and zero normal flux on the walls.
CriterionResult c2(Ctx& ctx) {
    CriterionResult r{2, "kernel symmetry and wall flux", false, "", 0.0};
    auto& k = ctx.unit_kernel();
    Rng rng(12u);
    double asym = 0.0;
    for (int i = 0; i < 40; ++i) {
        kernel::Point x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        kernel::Point y{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        for (double t : {0.02, 0.3})
            asym = std::max(asym,
                            std::abs(k.value(x, y, t) - k.value(y, x, t)));
    }
    // One-sided second-order stencil stepping inward from the wall.
    const geo::Domain& dom = k.domain();
    double per = dom.boundary_measure();
    double flux = 0.0;
    const double h = 1e-4, t = 0.1;
    for (int i = 0; i < 100; ++i) {
        auto bp = dom.boundary_point(per * (i + 0.5) / 100.0);
        kernel::Point x{bp.xy[0], bp.xy[1], 0.0};
        kernel::Point y{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), 0.0};
        kernel::Point x1{x[0] - h * bp.outward_normal[0],
                         x[1] - h * bp.outward_normal[1], 0.0};
        kernel::Point x2{x[0] - 2 * h * bp.outward_normal[0],
                         x[1] - 2 * h * bp.outward_normal[1], 0.0};
        double d = (-3.0 * k.value(x, y, t) + 4.0 * k.value(x1, y, t) -
                    k.value(x2, y, t)) /
                   (2.0 * h);
        flux = std::max(flux, std::abs(d));
    }
    r.pass = asym <= 1e-12 && flux <= 1e-5;
    r.detail = fmt("max |N(x,y,t) - N(y,x,t)| = %.3e over 80 pairs (tol "
                   "1e-12); max one-sided normal derivative = %.3e over 100 "
                   "wall points (tol 1e-5)",
                   asym, flux);
    return r;
}

// 3: a single constant dominates the kernel by the widened Gaussian, and the
// constant is stable when the sample lattice is refined twofold.
CriterionResult c3(Ctx& ctx) {
    CriterionResult r{3, "gaussian domination stability", false, "", 0.0};
    kernel::DominationPlan coarse;
    coarse.space_divisions = 10;
    auto a = kernel::calibrate_gaussian_domination(ctx.unit_kernel(), coarse);
    kernel::DominationPlan fine = coarse;
    fine.space_divisions = 20;
    auto b = kernel::calibrate_gaussian_domination(ctx.unit_kernel(), fine);
    double drift = std::abs(b.c_hat / a.c_hat - 1.0);
    r.pass = std::isfinite(a.c_hat) && a.c_hat > 0.0 && drift <= 0.15;
    r.detail = fmt("c_hat = %.10f on %ld samples, %.10f on %ld; relative "
                   "drift = %.2e (tol 0.15)",
                   a.c_hat, a.samples, b.c_hat, b.samples, drift);
    return r;
}

// 4: the calibrated boundary-time constant dominates held-out draws.
CriterionResult c4(Ctx& ctx) {
    CriterionResult r{4, "boundary-time bound on held-out draws", false, "",
                      0.0};
    const auto& cal = ctx.calibration75();
    auto& k = ctx.unit_kernel();
    double expo = kernel::bti_time_exponent(2, cal.alpha);
    double per = k.domain().boundary_measure();
    Rng rng(99u);
    int violations = 0;
    double worst_ratio = 0.0;
    const int draws = 200;
    for (int i = 0; i < draws; ++i) {
        double m = rng.uniform(0.05, 0.4);
        double c = std::clamp(rng.uniform(0.0, per), 0.5 * m, per - 0.5 * m);
        geo::BoundaryArc arc{0, c - 0.5 * m, c + 0.5 * m};
        double t = rng.uniform(0.05, 1.0);
        kernel::Point x{};
        if (rng.uniform() < 0.5) {
            auto bp = k.domain().boundary_point(
                rng.uniform(arc.start, arc.end));
            x = {bp.xy[0], bp.xy[1], 0.0};
        } else {
            x = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        }
        double v = kernel::boundary_time_integral(k, arc, x, t).value;
        double bound = cal.c_hat * std::pow(m, cal.alpha) * std::pow(t, expo);
        worst_ratio = std::max(worst_ratio, v / bound);
        if (v > bound * (1.0 + 1e-9)) ++violations;
    }
    r.pass = violations == 0;
    r.detail = fmt("c_hat(alpha=0.75) = %.8f from %ld calibration samples; "
                   "%d/%d held-out violations (seed 99, worst ratio to the "
                   "bound %.4f)",
                   cal.c_hat, cal.samples, violations, draws, worst_ratio);
    return r;
}

// Footprint of the solver's snapped radiating cells on the bottom wall,
// expressed as weighted arc-length pieces (1 inside, 1/2 on the end cells).
std::vector<rep::WeightedArc> snapped_footprint(const solver::Stepper& st,
                                                const solver::GridField& f) {
    std::vector<rep::WeightedArc> cells;
    double h = f.domain.extent(0) / f.n1;
    for (const auto& c : st.active_boundary(0.0)) {
        auto [x, y] = solver::node_position(f, c.id);
        if (y != 0.0) continue;
        cells.push_back({std::max(0.0, x - 0.5 * h),
                         std::min(f.domain.extent(0), x + 0.5 * h), c.chi});
    }
    std::vector<rep::WeightedArc> merged;
    for (const auto& p : cells) {
        if (!merged.empty() && merged.back().weight == p.weight &&
            std::abs(merged.back().end - p.start) < 1e-12)
            merged.back().end = p.end;
        else
            merged.push_back(p);
    }
    return merged;
}

// 5: the finite difference solver against the representation fixed point on
// the exact radiating footprint the grid discretises.
CriterionResult c5(Ctx& ctx) {
    CriterionResult r{5, "solver vs representation oracle", false, "", 0.0};
    geo::Domain box = geo::Domain::box(1.0, 1.0);
    auto sched = geo::make_schedule(box, 0.2, geo::DecayProfile::constant());
    auto ones = [](double, double) { return 1.0; };
    const int n = 128;
    const double horizon = 0.05;

    solver::SolverConfig cfg;
    cfg.q = 2.0;
    cfg.scheme = solver::Scheme::crank_nicolson;
    cfg.dt_init = 2e-4;
    cfg.newton_tol = 1e-12;
    auto field = solver::make_field(box, n, n, ones);
    solver::Stepper st(field, sched, cfg);
    auto fp = snapped_footprint(st, field);
    double fp_measure = 0.0;
    for (const auto& p : fp) fp_measure += p.weight * (p.end - p.start);

    auto sol = rep::representation_solve(ctx.unit_kernel(), ones, fp, horizon,
                                         cfg.q);
    auto run = solver::run(field, sched, cfg, horizon);

    // Dense node sweep near the radiating wall, every other node above it.
    double sup = 0.0;
    long evals = 0;
    for (int j = 0; j <= n; ++j) {
        int stride = (j <= 8) ? 1 : 2;
        for (int i = 0; i <= n; i += stride) {
            double x = static_cast<double>(i) / n;
            double y = static_cast<double>(j) / n;
            double fd =
                run.final_field.values[static_cast<std::size_t>(j) * (n + 1) +
                                       i];
            sup = std::max(sup, std::abs(fd - sol.evaluate(x, y, horizon)));
            ++evals;
        }
        if (stride == 2 && j < n) ++j;
    }
    r.pass = sup <= 2e-3;
    r.detail = fmt("sup |fd - representation| = %.3e over %ld nodes at t = "
                   "%.2f (gate 2e-3); grid 128x128, snapped footprint "
                   "measure %.6f for nominal arc 0.2, %d fixed-point sweeps",
                   sup, evals, horizon, fp_measure, sol.iterations());
    return r;
}

// 6: the fixed-arc radiating square blows up well before the mass bound, and
// widening the arc shortens the lifespan.
CriterionResult c6(Ctx& ctx) {
    CriterionResult r{6, "fixed-arc blowup upper bound", false, "", 0.0};
    const auto& base = ctx.blowup_run();
    auto wide = base.scenario;
    wide.name = "blowup_wide_gamma";
    wide.gamma1_area = 0.2;
    auto paired = scen::run_scenario(wide);
    bool blew = base.report.verdict == solver::Verdict::blowup &&
                paired.report.verdict == solver::Verdict::blowup;
    r.pass = blew && base.report.t_star <= 10.0 &&
             paired.report.t_star < base.report.t_star;
    r.detail = fmt("T*(area 0.1) = %.6f (bound 10); paired T*(area 0.2) = "
                   "%.6f, shorter as required; grid 80x80, u0 = 1, q = 2",
                   base.report.t_star, paired.report.t_star);
    return r;
}

// 7: lifespan scaling against the radiating measure.
CriterionResult c7(Ctx& ctx) {
    CriterionResult r{7, "lifespan scaling exponent", false, "", 0.0};
    scen::SweepPlan plan;
    plan.base = scen::builtin_scenario("blowup_fixed_gamma");
    plan.axis = "schedule.gamma1_area";
    plan.values = {0.4, 0.2, 0.1, 0.05};
    plan.parallelism = 1;
    plan.refine = true;
    auto sweep = scen::run_sweep(plan);
    if (!ctx.out_root.empty()) {
        std::filesystem::create_directories(ctx.out_root);
        std::ofstream csv(std::filesystem::path(ctx.out_root) /
                          "lifespan_scan.csv");
        csv << sweep.to_csv();
    }
    std::string pts, logs;
    for (const auto& p : sweep.points) {
        pts += fmt(" %.2f->%.4f(+-%.0e)", p.param, p.t_star, p.uncertainty);
        logs += fmt(" %.3f", p.t_star * p.param / std::log(1.0 / p.param));
    }
    // Slope the logarithmic branch T* ~ ln(1/A)/A itself would produce over
    // these areas, for comparison with the measured exponent.
    std::vector<double> areas = plan.values, model;
    for (double a : areas) model.push_back(std::log(1.0 / a) / a);
    double log_slope = log_log_fit(areas, model).slope;

    bool in_band = sweep.has_fit && sweep.loglog.slope >= -1.3 &&
                   sweep.loglog.slope <= -0.8;
    bool fit_ok = sweep.has_fit && sweep.loglog.r_squared >= 0.95;
    r.pass = !sweep.partial && in_band && fit_ok;
    r.detail = fmt("fitted exponent = %.4f (required band [-1.3, -0.8]), "
                   "R^2 = %.6f (>= 0.95); T* by area:%s; T*A/ln(1/A) =%s "
                   "(nearly constant, so the data follow the logarithmic "
                   "branch of the lifespan sandwich, whose own slope over "
                   "these areas is %.3f; the band encodes the power branch)",
                   sweep.has_fit ? sweep.loglog.slope : 0.0,
                   sweep.has_fit ? sweep.loglog.r_squared : 0.0, pts.c_str(),
                   logs.c_str(), log_slope);
    return r;
}

// 8: the polynomially decaying schedule prevents blowup for 50 milestone
// periods and the running maximum stays under the milestone envelope.
CriterionResult c8(Ctx& ctx) {
    CriterionResult r{8, "decay schedule prevents blowup", false, "", 0.0};
    auto s = scen::builtin_scenario("prevention_beta2");
    auto res = ctx.out_root.empty() ? scen::run_scenario(s)
                                    : scen::run_scenario(s, ctx.out_root);
    if (!res.constants) {
        r.detail = "pipeline constants missing from the run";
        return r;
    }
    const auto& c = *res.constants;
    int bad = 0;
    double horizon = 50.0 * c.t_star;
    for (int k = 0; k <= 50; ++k) {
        double mk = c.milestone(k);
        double mt = res.report.m_at(std::min(k * c.t_star, res.report.t_star));
        if (mt > mk * (1.0 + 1e-9)) ++bad;
    }
    r.pass = res.report.verdict == solver::Verdict::completed && bad == 0;
    r.detail = fmt("verdict %s at horizon 50 t* = %.4f; final running max = "
                   "%.6f; milestone envelope violations for k = 0..50: %d "
                   "(M_50 = %.4f)",
                   res.report.verdict == solver::Verdict::completed
                       ? "completed"
                       : "blowup",
                   horizon, res.report.trace.back().m_running, bad,
                   c.milestone(50));
    return r;
}

// 9: the capped schedule keeps the running maximum under the cap, and the
// final-bound constant diverges toward B -> M0 and plateaus toward B -> inf.
CriterionResult c9(Ctx& ctx) {
    CriterionResult r{9, "capped schedule holds the bound", false, "", 0.0};
    auto s = scen::builtin_scenario("cap_b5");
    auto res = ctx.out_root.empty() ? scen::run_scenario(s)
                                    : scen::run_scenario(s, ctx.out_root);
    double max_m = res.report.trace.back().m_running;
    double cap = s.pipeline.B;

    std::vector<double> caps;
    for (double f : {1.0 + 1e-6, 2.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6})
        caps.push_back(s.pipeline.M0 * f);
    auto end = sched::verify_schedule_end_behavior(s.pipeline, caps);
    bool ends_ok = end.divergence_ratio > 1e3 && end.plateau_ratio <= 0.01;
    r.pass = res.report.verdict == solver::Verdict::completed &&
             max_m <= cap && ends_ok;
    r.detail = fmt("max running M = %.6f <= cap %.1f over horizon 50 t* = "
                   "%.6e; C* divergence ratio toward the cap = %.3e (> 1e3), "
                   "plateau ratio at large caps = %.3e (<= 0.01)",
                   max_m, cap, res.report.t_star, end.divergence_ratio,
                   end.plateau_ratio);
    return r;
}

// 10: short-time growth bound sampled along the blowup trace of criterion 6.
CriterionResult c10(Ctx& ctx) {
    CriterionResult r{10, "short-time growth bound on the blowup run", false,
                      "", 0.0};
    const auto& cal = ctx.calibration75();
    const auto& run = ctx.blowup_run();
    auto sched = scen::build_boundary_schedule(run.scenario);
    auto viol = solver::growth_rate_check(run.report, sched, cal.alpha,
                                          cal.c_hat);
    r.pass = viol.empty();
    std::string worst;
    if (!viol.empty())
        worst = fmt("; worst at T = %.4f, t = %.4f with lhs/rhs = %.3f",
                    viol.front().T, viol.front().t,
                    viol.front().lhs / viol.front().rhs);
    r.detail = fmt("%zu violations beyond 5%% slack over the sampled (T, t) "
                   "pairs of a %zu-sample blowup trace (alpha = 0.75, c_hat "
                   "= %.8f)%s",
                   viol.size(), run.report.trace.size(), cal.c_hat,
                   worst.c_str());
    return r;
}

// 11: every growth family drives the running minimum of j Lambda_j lower
// between J = 1e3 and 1e6, and the weighted logarithmic probe recovers past
// its early value on the same window.
CriterionResult c11(Ctx&) {
    CriterionResult r{11, "sequence dichotomy and sharpness probe", false, "",
                      0.0};
    bool all_lower = true;
    std::string fams;
    for (const auto& spec : seq::builtin_suite(2.0)) {
        auto tr = seq::running_min_jlambda(spec, 1000000);
        const auto* p3 = tr.at(1000);
        if (!p3 || !(tr.final_running_min < p3->running_min)) {
            all_lower = false;
            fams += fams.empty() ? spec.label : ", " + spec.label;
        }
    }

    auto probe = seq::sharpness_probe(0.1, 1000000);
    const auto* q3 = probe.at(1000);
    const auto* q6 = probe.at(1000000);
    double v3 = q3 ? q3->j_lambda : 0.0;
    double v6 = q6 ? q6->j_lambda : 0.0;
    bool recovered = q3 && q6 && v6 > v3;

    // Where the weighted probe actually bottoms out and how far the recovery
    // gets within 64-bit indices.
    auto deep = seq::sharpness_probe(0.1, 1000000000000L);
    long argmin = 0;
    double vmin = std::numeric_limits<double>::infinity();
    for (const auto& p : deep.points)
        if (p.j_lambda < vmin) {
            vmin = p.j_lambda;
            argmin = p.j;
        }
    auto far = seq::sharpness_probe(0.1, 9200000000000000000L);
    double vfar = far.points.back().j_lambda;

    r.pass = all_lower && recovered;
    r.detail = fmt("running-min clause: %s (all five families lower at J = "
                   "1e6 than at 1e3); sharpness clause: j^1.1 Lambda_j at j "
                   "= 1e6 is %.6f, required to exceed %.6f at j = 1e3, but "
                   "the weighted probe bottoms out near j = %.1e (min %.6f) "
                   "and recovers so slowly that even j = 9.2e18 only reaches "
                   "%.6f%s",
                   all_lower ? "pass" : ("FAIL: " + fams).c_str(), v6, v3,
                   static_cast<double>(argmin), vmin, vfar,
                   recovered ? "" : "; the 1e6-vs-1e3 comparison fails");
    return r;
}

// 12: closed-form pipeline exponents and the series inversion round trip.
CriterionResult c12(Ctx&) {
    CriterionResult r{12, "schedule constant closed forms", false, "", 0.0};
    struct Row {
        int n;
        double beta;
        double g_alpha, g_tilde;  // global pipeline
        double s, c_alpha, c_tilde;  // capped pipeline
    };
    const Row rows[] = {
        {2, 2.0, 3.0 / 4, 1.0 / 8, 1.0 / 2, 7.0 / 8, 1.0 / 16},
        {3, 3.0, 5.0 / 12, 1.0 / 12, 1.0 / 4, 11.0 / 24, 1.0 / 24},
        {3, 4.0, 3.0 / 8, 1.0 / 8, 1.0 / 2, 7.0 / 16, 1.0 / 16},
    };
    double dev = 0.0;
    for (const Row& row : rows) {
        sched::PipelineInput in;
        in.n = row.n;
        in.q = 2.0;
        in.beta = row.beta;
        in.M0 = 1.0;
        in.gamma1_area = 0.1;
        in.c_hat = 2.0;
        in.mode = sched::Mode::global;
        auto g = sched::build_constants(in);
        dev = std::max({dev, std::abs(g.alpha - row.g_alpha),
                        std::abs(g.alpha_tilde - row.g_tilde)});
        in.mode = sched::Mode::capped;
        in.B = 5.0;
        auto c = sched::build_constants(in);
        dev = std::max({dev, std::abs(c.s - row.s),
                        std::abs(c.alpha - row.c_alpha),
                        std::abs(c.alpha_tilde - row.c_tilde)});
    }
    double resid = 0.0;
    for (double s : {0.5, 0.25})
        for (double ratio : {1.01, 2.0, 10.0, 100.0})
            resid = std::max(resid, std::abs(sched::g_s(
                                                 sched::lambda_b(ratio, s),
                                                 s) -
                                             ratio));
    r.pass = dev <= 1e-14 && resid < 1e-8;
    r.detail = fmt("max deviation of (alpha, alpha~, s) from hand-derived "
                   "values over n in {2,3}, beta in {n, 2(n-1)}, both "
                   "pipelines: %.2e (tol 1e-14); g_s round-trip residual "
                   "over ratios {1.01, 2, 10, 100}: %.2e (tol 1e-8)",
                   dev, resid);
    return r;
}

std::vector<int> suite_ids(const std::string& suite) {
    if (suite == "kernel") return {1, 2, 3, 4};
    if (suite == "solver") return {5, 6, 10};
    if (suite == "e2e") return {7, 8, 9};
    if (suite == "seqlab") return {11};
    if (suite == "schedule") return {12};
    if (suite == "all") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    throw std::invalid_argument(
        "unknown acceptance suite '" + suite +
        "' (expected kernel, solver, schedule, seqlab, e2e or all)");
}

}  // namespace

int SuiteReport::failures() const {
    int n = 0;
    for (const auto& r : results)
        if (!r.pass) ++n;
    return n;
}

std::string SuiteReport::to_text() const {
    std::string out;
    for (const auto& r : results)
        out += fmt("[%s] %2d %s: %s (%.1fs)\n", r.pass ? "PASS" : "FAIL",
                   r.id, r.name.c_str(), r.detail.c_str(), r.seconds);
    out += fmt("%zu criteria checked, %zu passed, %d failed\n",
               results.size(), results.size() - failures(), failures());
    return out;
}

std::vector<std::string> suite_names() {
    return {"kernel", "solver", "schedule", "seqlab", "e2e", "all"};
}

SuiteReport run_acceptance(const std::string& suite,
                           const std::string& out_root) {
    using Fn = CriterionResult (*)(Ctx&);
    static const Fn table[] = {c1, c2, c3, c4, c5, c6,
                               c7, c8, c9, c10, c11, c12};
    Ctx ctx;
    ctx.out_root = out_root;
    SuiteReport report;
    for (int id : suite_ids(suite)) {
        auto t0 = std::chrono::steady_clock::now();
        CriterionResult r = table[id - 1](ctx);
        r.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        report.results.push_back(std::move(r));
    }
    return report;
}

}  // namespace nhkl::accept
