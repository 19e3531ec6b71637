#include "nhkl/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <thread>

namespace nhkl::scen {

namespace {

namespace fs = std::filesystem;

std::string kind_name(geo::DomainKind k) {
    switch (k) {
        case geo::DomainKind::box2d: return "box2d";
        case geo::DomainKind::disk2d: return "disk2d";
        case geo::DomainKind::box3d: return "box3d";
    }
    return "?";
}

geo::DomainKind parse_kind(const std::string& s) {
    if (s == "box2d") return geo::DomainKind::box2d;
    if (s == "disk2d") return geo::DomainKind::disk2d;
    throw std::invalid_argument("domain.kind '" + s +
                                "' (want box2d or disk2d)");
}

std::string scheme_name(solver::Scheme s) {
    return s == solver::Scheme::implicit_euler ? "implicit_euler"
                                               : "crank_nicolson";
}

solver::Scheme parse_scheme(const std::string& s) {
    if (s == "implicit_euler") return solver::Scheme::implicit_euler;
    if (s == "crank_nicolson") return solver::Scheme::crank_nicolson;
    throw std::invalid_argument("solver.scheme '" + s +
                                "' (want implicit_euler or crank_nicolson)");
}

bool is_pipeline(const std::string& mode) {
    return mode == "global" || mode == "capped";
}

void check_name(const std::string& name) {
    require(!name.empty(), "scenario.name is empty");
    for (char c : name)
        require(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                    c == '-',
                "scenario.name '" + name +
                    "' may only use letters, digits, '_' and '-'");
}

std::function<double(double, double)> initial_data(const Scenario& s) {
    if (s.u0_amp == 0.0) {
        double v = s.u0_value;
        return [v](double, double) { return v; };
    }
    double v = s.u0_value, amp = s.u0_amp;
    double wx = s.u0_mx * std::numbers::pi / s.a;
    double wy = s.u0_my * std::numbers::pi / s.b;
    return [=](double x, double y) {
        return v + amp * std::cos(wx * x) * std::cos(wy * y);
    };
}

}  // namespace

cfg::Config Scenario::to_config() const {
    cfg::Config c;
    c.set("scenario.name", name);
    c.set("domain.kind", kind_name(domain_kind));
    if (domain_kind == geo::DomainKind::box2d) {
        c.set("domain.a", a);
        c.set("domain.b", b);
    }
    c.set("grid.n1", n1);
    c.set("grid.n2", n2);
    c.set("u0.value", u0_value);
    if (u0_amp != 0.0) {
        c.set("u0.amp", u0_amp);
        c.set("u0.mx", u0_mx);
        c.set("u0.my", u0_my);
    }
    c.set("schedule.mode", schedule_mode);
    if (schedule_mode == "cap_shrink") {
        c.set("schedule.rate", shrink_rate);
    } else {
        c.set("schedule.gamma1_area", gamma1_area);
    }
    if (is_pipeline(schedule_mode)) {
        c.set("schedule.n", pipeline.n);
        c.set("schedule.beta", pipeline.beta);
        c.set("schedule.c_hat", pipeline.c_hat);
        if (schedule_mode == "capped") c.set("schedule.B", pipeline.B);
        if (pipeline.alpha_override != 0.0)
            c.set("schedule.alpha", pipeline.alpha_override);
        if (pipeline.s_override != 0.0)
            c.set("schedule.s", pipeline.s_override);
    }
    c.set("solver.q", solver_cfg.q);
    c.set("solver.scheme", scheme_name(solver_cfg.scheme));
    c.set("solver.dt_init", solver_cfg.dt_init);
    c.set("solver.dt_min", solver_cfg.dt_min);
    c.set("solver.blowup_threshold", solver_cfg.blowup_threshold);
    c.set("solver.newton_tol", solver_cfg.newton_tol);
    c.set("solver.newton_max_iter", solver_cfg.newton_max_iter);
    if (horizon_tstar > 0.0)
        c.set("run.horizon_tstar", horizon_tstar);
    else
        c.set("run.horizon", horizon);
    c.set("run.seed", static_cast<long>(seed));
    return c;
}

Scenario Scenario::from_config(const cfg::Config& c) {
    Scenario s;
    s.name = c.get_string("scenario.name");
    check_name(s.name);
    s.domain_kind = parse_kind(c.get_string("domain.kind"));
    const bool box = s.domain_kind == geo::DomainKind::box2d;
    if (box) {
        s.a = c.get_double("domain.a");
        s.b = c.get_double("domain.b");
        require(s.a > 0.0 && s.b > 0.0, "domain extents must be positive");
    }
    s.n1 = static_cast<int>(c.get_int("grid.n1"));
    s.n2 = static_cast<int>(c.get_int("grid.n2"));
    require(s.n1 >= 2 && s.n2 >= 2, "grid.n1 and grid.n2 must be >= 2");

    s.u0_value = c.get_double("u0.value");
    s.u0_amp = c.get_double_or("u0.amp", 0.0);
    if (s.u0_amp != 0.0) {
        require(box, "u0.amp: cosine modes are defined on boxes only");
        s.u0_mx = static_cast<int>(c.get_int("u0.mx"));
        s.u0_my = static_cast<int>(c.get_int("u0.my"));
        require(s.u0_mx >= 0 && s.u0_my >= 0, "u0 mode numbers must be >= 0");
    }
    require(s.u0_value - std::abs(s.u0_amp) > 0.0,
            "u0 must be strictly positive (value - |amp| > 0)");

    s.schedule_mode = c.get_string("schedule.mode");
    require(s.schedule_mode == "fixed" || is_pipeline(s.schedule_mode) ||
                s.schedule_mode == "cap_shrink",
            "schedule.mode '" + s.schedule_mode +
                "' (want fixed, global, capped or cap_shrink)");
    if (s.schedule_mode == "cap_shrink") {
        require(s.domain_kind == geo::DomainKind::disk2d,
                "cap_shrink shrinks a polar cap; it needs the disk");
        s.shrink_rate = c.get_double("schedule.rate");
        require(s.shrink_rate > 0.0, "schedule.rate must be positive");
        s.gamma1_area = std::numbers::pi;  // the full upper semicircle
    } else {
        s.gamma1_area = c.get_double("schedule.gamma1_area");
        require(s.gamma1_area > 0.0, "schedule.gamma1_area must be positive");
    }

    s.solver_cfg.q = c.get_double("solver.q");
    s.solver_cfg.scheme = parse_scheme(c.get_string_or(
        "solver.scheme", scheme_name(s.solver_cfg.scheme)));
    s.solver_cfg.dt_init = c.get_double_or("solver.dt_init",
                                           s.solver_cfg.dt_init);
    s.solver_cfg.dt_min = c.get_double_or("solver.dt_min",
                                          s.solver_cfg.dt_min);
    s.solver_cfg.blowup_threshold =
        c.get_double_or("solver.blowup_threshold",
                        s.solver_cfg.blowup_threshold);
    s.solver_cfg.newton_tol = c.get_double_or("solver.newton_tol",
                                              s.solver_cfg.newton_tol);
    s.solver_cfg.newton_max_iter = static_cast<int>(c.get_int_or(
        "solver.newton_max_iter", s.solver_cfg.newton_max_iter));

    if (is_pipeline(s.schedule_mode)) {
        require(s.u0_amp == 0.0,
                "pipeline schedules take constant u0 (M0 = u0.value)");
        s.pipeline.mode = s.schedule_mode == "global" ? sched::Mode::global
                                                      : sched::Mode::capped;
        s.pipeline.n = static_cast<int>(c.get_int("schedule.n"));
        s.pipeline.q = s.solver_cfg.q;
        s.pipeline.beta = c.get_double("schedule.beta");
        s.pipeline.M0 = s.u0_value;
        s.pipeline.gamma1_area = s.gamma1_area;
        s.pipeline.c_hat = c.get_double("schedule.c_hat");
        if (s.schedule_mode == "capped")
            s.pipeline.B = c.get_double("schedule.B");
        s.pipeline.alpha_override = c.get_double_or("schedule.alpha", 0.0);
        s.pipeline.s_override = c.get_double_or("schedule.s", 0.0);
    }

    bool has_abs = c.has("run.horizon");
    bool has_rel = c.has("run.horizon_tstar");
    require(has_abs != has_rel,
            "set exactly one of run.horizon and run.horizon_tstar");
    if (has_rel) {
        require(is_pipeline(s.schedule_mode),
                "run.horizon_tstar needs a pipeline schedule (t* comes from "
                "its constants)");
        s.horizon_tstar = c.get_double("run.horizon_tstar");
        require(s.horizon_tstar > 0.0, "run.horizon_tstar must be positive");
        s.horizon = 0.0;
    } else {
        s.horizon = c.get_double("run.horizon");
        require(s.horizon > 0.0, "run.horizon must be positive");
    }
    s.seed = static_cast<std::uint64_t>(c.get_int_or("run.seed", 1));

    // Reject stray keys so typos fail loudly instead of being defaulted.
    const cfg::Config echo = s.to_config();
    std::set<std::string> known;
    for (const auto& [key, value] : echo.entries()) known.insert(key);
    for (const auto& [key, value] : c.entries())
        require(known.count(key) != 0,
                "config key '" + key + "' is not a scenario setting");
    return s;
}

std::vector<std::string> builtin_names() {
    return {"blowup_fixed_gamma", "prevention_beta2", "cap_b5",
            "disk_cap_shrink"};
}

Scenario builtin_scenario(const std::string& name) {
    // Calibration constants baked from the shipped kernel calibration
    // (alpha = 0.75 for the global pipeline, 0.875 for the capped one);
    // `nhklab calibrate` reproduces them.
    constexpr double kChatGlobal = 1.8124672962711101;
    constexpr double kChatCapped = 2.4699847030893678;

    Scenario s;
    s.name = name;
    if (name == "blowup_fixed_gamma") {
        s.n1 = s.n2 = 80;
        s.schedule_mode = "fixed";
        s.gamma1_area = 0.1;
        s.solver_cfg.dt_init = 1e-3;
        s.solver_cfg.dt_min = 1e-12;
        s.solver_cfg.blowup_threshold = 1e6;
        s.horizon = 20.0;
        return s;
    }
    if (name == "prevention_beta2") {
        s.n1 = s.n2 = 64;
        s.schedule_mode = "global";
        s.gamma1_area = 0.1;
        s.pipeline.mode = sched::Mode::global;
        s.pipeline.n = 2;
        s.pipeline.beta = 2.0;
        s.pipeline.c_hat = kChatGlobal;
        s.solver_cfg.dt_init = 1e-3;
        s.solver_cfg.dt_min = 1e-12;
        s.solver_cfg.blowup_threshold = 1e6;
        s.horizon = 0.0;
        s.horizon_tstar = 50.0;
        return s;
    }
    if (name == "cap_b5") {
        s.n1 = s.n2 = 64;
        s.schedule_mode = "capped";
        s.gamma1_area = 0.1;
        s.pipeline.mode = sched::Mode::capped;
        s.pipeline.n = 2;
        s.pipeline.beta = 2.0;
        s.pipeline.B = 5.0;
        s.pipeline.c_hat = kChatCapped;
        s.solver_cfg.dt_init = 1e-4;
        s.solver_cfg.dt_min = 1e-12;
        s.solver_cfg.blowup_threshold = 1e6;
        s.horizon = 0.0;
        s.horizon_tstar = 50.0;
        return s;
    }
    if (name == "disk_cap_shrink") {
        s.domain_kind = geo::DomainKind::disk2d;
        s.n1 = 48;
        s.n2 = 96;
        s.schedule_mode = "cap_shrink";
        s.shrink_rate = 1.0;
        s.gamma1_area = std::numbers::pi;
        s.solver_cfg.dt_init = 1e-3;
        s.solver_cfg.dt_min = 1e-12;
        s.solver_cfg.blowup_threshold = 1e6;
        s.horizon = 2.0;
        return s;
    }
    throw std::invalid_argument("unknown builtin scenario '" + name + "'");
}

geo::BoundarySchedule build_boundary_schedule(
    const Scenario& s, std::optional<sched::ScheduleConstants>* constants_out) {
    geo::Domain dom = s.domain_kind == geo::DomainKind::box2d
                          ? geo::Domain::box(s.a, s.b)
                          : geo::Domain::disk();
    if (constants_out) constants_out->reset();
    if (s.schedule_mode == "fixed")
        return geo::make_schedule(dom, s.gamma1_area,
                                  geo::DecayProfile::constant());
    if (s.schedule_mode == "cap_shrink") {
        // Polar cap whose projected half-width decays as e^(-rate t); the
        // cap's arc length is 2 asin of that width, so the relative decay
        // is asin(e^(-rate t)) / asin(1), tabulated over the horizon.
        require(s.horizon > 0.0, "cap_shrink needs an absolute horizon");
        const int samples = 400;
        std::vector<std::pair<double, double>> table;
        table.reserve(samples + 1);
        for (int i = 0; i <= samples; ++i) {
            double t = s.horizon * i / samples;
            double f = std::asin(std::exp(-s.shrink_rate * t)) /
                       std::asin(1.0);
            table.emplace_back(t, f);
        }
        return geo::make_schedule(dom, s.gamma1_area,
                                  geo::DecayProfile::table(std::move(table)));
    }
    auto constants = sched::build_constants(s.pipeline);
    if (constants_out) *constants_out = constants;
    return geo::make_schedule(dom, s.gamma1_area, constants.profile());
}

double resolve_horizon(const Scenario& s) {
    if (s.horizon_tstar <= 0.0) return s.horizon;
    return s.horizon_tstar * sched::build_constants(s.pipeline).t_star;
}

namespace {

void persist(ScenarioResult& res, const std::string& out_root) {
    fs::path dir = fs::path(out_root) / res.scenario.name;
    fs::create_directories(dir);

    res.scenario.to_config().save((dir / "config.snapshot").string());

    std::ofstream csv(dir / "trace.csv");
    require(csv.good(), "cannot write " + (dir / "trace.csv").string());
    res.report.write_trace_csv(csv);

    std::ofstream rep(dir / "report");
    require(rep.good(), "cannot write " + (dir / "report").string());
    const auto& r = res.report;
    rep << "scenario = " << res.scenario.name << '\n'
        << "verdict = "
        << (r.verdict == solver::Verdict::blowup ? "blowup" : "completed")
        << '\n'
        << "t_star = " << format_double(r.t_star) << '\n'
        << "final_m = " << format_double(r.trace.back().m_running) << '\n'
        << "final_mass = " << format_double(r.trace.back().mass) << '\n'
        << "steps = " << r.trace.size() - 1 << '\n'
        << "resolution = " << r.resolution << '\n'
        << "schedule = " << r.schedule << '\n';
    if (res.constants)
        rep << "constants = " << res.constants->to_json() << '\n';
    require(rep.good(), "write to report failed");
    res.out_dir = dir.string();
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s) {
    ScenarioResult res;
    res.scenario = s;
    auto schedule = build_boundary_schedule(s, &res.constants);
    geo::Domain dom = schedule.domain();
    auto field = solver::make_field(dom, s.n1, s.n2, initial_data(s));
    double horizon = res.constants && s.horizon_tstar > 0.0
                         ? s.horizon_tstar * res.constants->t_star
                         : s.horizon;
    res.report = solver::run(field, schedule, s.solver_cfg, horizon);
    return res;
}

ScenarioResult run_scenario(const Scenario& s, const std::string& out_root) {
    ScenarioResult res = run_scenario(s);
    persist(res, out_root);
    return res;
}

std::string SweepReport::to_csv() const {
    std::string out = "param,T_star,uncertainty\n";
    for (const auto& p : points) {
        out += format_double(p.param);
        out += ',';
        out += format_double(p.failed ? std::nan("") : p.t_star);
        out += ',';
        out += format_double(p.failed ? std::nan("") : p.uncertainty);
        out += '\n';
    }
    return out;
}

SweepReport run_sweep(const SweepPlan& plan) {
    require(!plan.values.empty(), "sweep needs at least one value");
    require(plan.parallelism >= 1, "sweep parallelism must be >= 1");
    const cfg::Config base = plan.base.to_config();
    require(base.has(plan.axis) || plan.axis == "run.horizon" ||
                plan.axis == "run.horizon_tstar",
            "sweep axis '" + plan.axis + "' is not a key of the base "
            "scenario");

    SweepReport report;
    report.points.resize(plan.values.size());

    auto run_point = [&](std::size_t i) {
        SweepPoint& p = report.points[i];
        p.param = plan.values[i];
        try {
            cfg::Config c = base;
            c.set(plan.axis, plan.values[i]);
            Scenario s = Scenario::from_config(c);
            auto res = run_scenario(s);
            p.blowup = res.report.verdict == solver::Verdict::blowup;
            p.t_star = res.report.t_star;
            if (plan.refine && p.blowup) {
                c.set("solver.dt_init", s.solver_cfg.dt_init / 2.0);
                auto fine = run_scenario(Scenario::from_config(c));
                p.uncertainty = std::abs(fine.report.t_star - p.t_star);
                p.t_star = fine.report.t_star;
            }
        } catch (const std::exception& e) {
            p.failed = true;
            p.error = e.what();
        }
    };

    int workers = static_cast<int>(
        std::min<std::size_t>(plan.parallelism, plan.values.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < plan.values.size(); ++i) run_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1);
                     i < plan.values.size(); i = next.fetch_add(1))
                    run_point(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> xs, ys;
    for (const auto& p : report.points) {
        if (p.failed) {
            report.partial = true;
        } else if (p.blowup && p.param > 0.0 && p.t_star > 0.0) {
            xs.push_back(p.param);
            ys.push_back(p.t_star);
        }
    }
    if (xs.size() >= 2) {
        report.loglog = log_log_fit(xs, ys);
        report.has_fit = true;
    }
    return report;
}

}  // namespace nhkl::scen
