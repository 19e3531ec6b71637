#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nhkl/accept.hpp"
#include "nhkl/config.hpp"
#include "nhkl/geometry.hpp"
#include "nhkl/kernel.hpp"
#include "nhkl/scenario.hpp"
#include "nhkl/schedule.hpp"
#include "nhkl/seqlab.hpp"
#include "nhkl/solver.hpp"
#include "nhkl/util.hpp"

namespace fs = std::filesystem;
using namespace nhkl;

namespace {

/// --out flag beats NHKLAB_OUT beats ./runs.
std::string resolve_out(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("NHKLAB_OUT"); env && *env) return env;
    return "runs";
}

/// A scenario reference is a config file path, a built-in name, or a file
/// under scenarios/.
scen::Scenario load_scenario(const std::string& ref) {
    if (fs::exists(ref) && fs::is_regular_file(ref))
        return scen::Scenario::from_config(cfg::Config::load(ref));
    for (const auto& name : scen::builtin_names())
        if (name == ref) return scen::builtin_scenario(name);
    fs::path local = fs::path("scenarios") / ref;
    if (fs::exists(local))
        return scen::Scenario::from_config(cfg::Config::load(local.string()));
    throw std::invalid_argument("scenario '" + ref +
                                "' is neither a config file nor a built-in "
                                "(built-ins: blowup_fixed_gamma, "
                                "prevention_beta2, cap_b5, disk_cap_shrink)");
}

void cmd_simulate(const std::string& ref, const std::string& out_flag) {
    auto s = load_scenario(ref);
    auto res = scen::run_scenario(s, resolve_out(out_flag));
    std::cout << res.report.to_json() << "\n";
    if (res.constants)
        std::cout << "schedule constants: " << res.constants->to_json()
                  << "\n";
    std::cout << "artifacts written to " << res.out_dir << "\n";
}

void cmd_kernel_check() {
    kernel::BoxKernel k(geo::Domain::box(1.0, 1.0));
    auto one = [](const kernel::Point&) { return 1.0; };
    Rng rng(11u);
    double norm = 0.0, asym = 0.0, flux = 0.0;
    for (int i = 0; i < 10; ++i) {
        kernel::Point x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        for (double t : {0.01, 0.1, 0.5, 1.0})
            norm = std::max(norm,
                            std::abs(k.volume_integral(x, t, one) - 1.0));
    }
    for (int i = 0; i < 20; ++i) {
        kernel::Point x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        kernel::Point y{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0};
        for (double t : {0.02, 0.3})
            asym = std::max(asym,
                            std::abs(k.value(x, y, t) - k.value(y, x, t)));
    }
    double per = k.domain().boundary_measure();
    const double h = 1e-4;
    for (int i = 0; i < 36; ++i) {
        auto bp = k.domain().boundary_point(per * (i + 0.5) / 36.0);
        kernel::Point x{bp.xy[0], bp.xy[1], 0.0};
        kernel::Point y{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), 0.0};
        kernel::Point x1{x[0] - h * bp.outward_normal[0],
                         x[1] - h * bp.outward_normal[1], 0.0};
        kernel::Point x2{x[0] - 2 * h * bp.outward_normal[0],
                         x[1] - 2 * h * bp.outward_normal[1], 0.0};
        double d = (-3.0 * k.value(x, y, 0.1) + 4.0 * k.value(x1, y, 0.1) -
                    k.value(x2, y, 0.1)) /
                   (2.0 * h);
        flux = std::max(flux, std::abs(d));
    }
    std::cout << "normalization residual: " << format_double(norm) << "\n"
              << "symmetry residual:      " << format_double(asym) << "\n"
              << "wall flux residual:     " << format_double(flux) << "\n";
}

void cmd_calibrate(double alpha, bool domination) {
    kernel::BoxKernel k(geo::Domain::box(1.0, 1.0));
    kernel::BtiPlan plan;
    plan.arc_measures = {0.05, 0.1, 0.2, 0.4};
    plan.times = {0.05, 0.25, 0.6, 1.0};
    plan.random_samples = 40;
    plan.seed = 7;
    std::cout << kernel::calibrate_bti_constant(k, alpha, plan).to_json()
              << "\n";
    if (domination)
        std::cout << kernel::calibrate_gaussian_domination(k).to_json()
                  << "\n";
}

struct ScheduleArgs {
    std::string mode = "global";
    int n = 2;
    double q = 2.0, beta = 2.0, M0 = 1.0, gamma1 = 0.1, chat = 1.0;
    double B = 0.0, alpha = 0.0, s = 0.0;
};

void cmd_schedule(const ScheduleArgs& a) {
    sched::PipelineInput in;
    if (a.mode == "global")
        in.mode = sched::Mode::global;
    else if (a.mode == "capped")
        in.mode = sched::Mode::capped;
    else
        throw std::invalid_argument("--mode must be global or capped");
    in.n = a.n;
    in.q = a.q;
    in.beta = a.beta;
    in.M0 = a.M0;
    in.gamma1_area = a.gamma1;
    in.c_hat = a.chat;
    in.B = a.B;
    in.alpha_override = a.alpha;
    in.s_override = a.s;
    std::cout << sched::build_constants(in).to_json() << "\n";
}

void cmd_lifespan_scan(const std::string& ref, const std::string& axis,
                       const std::vector<double>& values, int parallel,
                       bool no_refine, const std::string& out_flag) {
    scen::SweepPlan plan;
    plan.base = load_scenario(ref);
    plan.axis = axis;
    plan.values = values;
    plan.parallelism = parallel;
    plan.refine = !no_refine;
    auto rep = scen::run_sweep(plan);

    std::string root = resolve_out(out_flag);
    fs::create_directories(root);
    fs::path csv = fs::path(root) / "lifespan_scan.csv";
    std::ofstream(csv) << rep.to_csv();

    std::cout << rep.to_csv();
    if (rep.has_fit)
        std::cout << "log-log fit: exponent " << format_double(rep.loglog.slope)
                  << ", R^2 " << format_double(rep.loglog.r_squared) << "\n";
    if (rep.partial) {
        std::cerr << "warning: some sweep points failed\n";
        for (const auto& p : rep.points)
            if (p.failed)
                std::cerr << "  " << axis << " = " << p.param << ": "
                          << p.error << "\n";
    }
    std::cout << "scan written to " << csv.string() << "\n";
}

void cmd_sequence_check(long J, double q, double eps,
                        const std::string& out_flag) {
    std::string root = resolve_out(out_flag);
    fs::create_directories(root);
    for (const auto& spec : seq::builtin_suite(q)) {
        auto trace = seq::running_min_jlambda(spec, J);
        fs::path csv = fs::path(root) / ("seq_" + spec.label + ".csv");
        std::ofstream os(csv);
        seq::write_csv(os, trace);
        std::cout << spec.label << ": running min of j*Lambda_j at J = " << J
                  << " is " << format_double(trace.final_running_min) << " ("
                  << csv.string() << ")\n";
    }
    auto probe = seq::sharpness_probe(eps, J, q);
    fs::path csv = fs::path(root) / "sharpness.csv";
    std::ofstream os(csv);
    seq::write_csv(os, probe);
    std::cout << probe.label
              << ": min over samples = " << format_double(probe.final_running_min)
              << " (" << csv.string() << ")\n";
}

int cmd_accept(const std::string& suite, const std::string& out_flag) {
    auto rep = accept::run_acceptance(suite, out_flag);
    std::cout << rep.to_text();
    return rep.failures() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "nhklab: heat flow with a superlinear radiating boundary portion -- "
        "solvers, kernel calibrations, schedule pipelines and the acceptance "
        "suite"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto* sim = app.add_subcommand(
        "simulate", "run one scenario and persist report, trace and config");
    std::string sim_ref, sim_out;
    sim->add_option("--scenario", sim_ref,
                    "config file or built-in name (blowup_fixed_gamma, "
                    "prevention_beta2, cap_b5, disk_cap_shrink)")
        ->required();
    sim->add_option("--out", sim_out, "output root (default $NHKLAB_OUT or ./runs)");
    sim->callback([&] { cmd_simulate(sim_ref, sim_out); });

    auto* kc = app.add_subcommand("kernel-check",
                                  "print kernel residuals (normalization, "
                                  "symmetry, wall flux)");
    kc->callback([&] { cmd_kernel_check(); });

    auto* cal = app.add_subcommand(
        "calibrate", "calibrate the boundary-time bound constant");
    double cal_alpha = 0.75;
    bool cal_dom = false;
    cal->add_option("--alpha", cal_alpha, "bound exponent alpha (default 0.75)");
    cal->add_flag("--domination", cal_dom,
                  "also calibrate the widened-Gaussian domination constant");
    cal->callback([&] { cmd_calibrate(cal_alpha, cal_dom); });

    auto* sch = app.add_subcommand(
        "schedule", "run the decay-schedule constant pipeline and print it");
    ScheduleArgs sa;
    sch->add_option("--mode", sa.mode, "global or capped")->required();
    sch->add_option("--n", sa.n, "space dimension");
    sch->add_option("--q", sa.q, "flux exponent");
    sch->add_option("--beta", sa.beta, "decay exponent");
    sch->add_option("--M0", sa.M0, "initial supremum");
    sch->add_option("--gamma1", sa.gamma1, "initial radiating measure");
    sch->add_option("--chat", sa.chat, "calibrated bound constant")->required();
    sch->add_option("--B", sa.B, "temperature cap (capped mode)");
    sch->add_option("--alpha", sa.alpha, "override the midpoint alpha");
    sch->add_option("--s", sa.s, "override the midpoint s (capped mode)");
    sch->callback([&] { cmd_schedule(sa); });

    auto* scan = app.add_subcommand(
        "lifespan-scan", "sweep one scenario key and fit T* against it");
    std::string scan_ref = "blowup_fixed_gamma";
    std::string scan_axis = "schedule.gamma1_area";
    std::vector<double> scan_values{0.4, 0.2, 0.1, 0.05};
    int scan_parallel = 1;
    bool scan_no_refine = false;
    std::string scan_out;
    scan->add_option("--scenario", scan_ref, "base scenario (file or built-in)");
    scan->add_option("--axis", scan_axis, "swept config key");
    scan->add_option("--values", scan_values, "swept values")->expected(-1);
    scan->add_option("--parallel", scan_parallel, "worker pool size");
    scan->add_flag("--no-refine", scan_no_refine,
                   "skip the half-step uncertainty reruns");
    scan->add_option("--out", scan_out, "output root");
    scan->callback([&] {
        cmd_lifespan_scan(scan_ref, scan_axis, scan_values, scan_parallel,
                          scan_no_refine, scan_out);
    });

    auto* seqc = app.add_subcommand(
        "sequence-check", "trace j*Lambda_j for the built-in growth families");
    long seq_J = 1000000;
    double seq_q = 2.0, seq_eps = 0.1;
    std::string seq_out;
    seqc->add_option("--J", seq_J, "window end (default 1e6)");
    seqc->add_option("--q", seq_q, "functional exponent");
    seqc->add_option("--eps", seq_eps, "sharpness probe weight j^(1+eps)");
    seqc->add_option("--out", seq_out, "output root");
    seqc->callback([&] { cmd_sequence_check(seq_J, seq_q, seq_eps, seq_out); });

    auto* acc = app.add_subcommand("accept",
                                   "run the acceptance criteria and report "
                                   "pass/fail per criterion");
    std::string acc_suite = "all";
    std::string acc_out;
    acc->add_option("--suite", acc_suite, "kernel, solver, schedule, seqlab, e2e or all");
    acc->add_option("--out", acc_out, "persist run artifacts under this root");
    acc->callback([&] { exit_code = cmd_accept(acc_suite, acc_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
