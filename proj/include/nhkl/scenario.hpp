#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nhkl/config.hpp"
#include "nhkl/geometry.hpp"
#include "nhkl/schedule.hpp"
#include "nhkl/solver.hpp"
#include "nhkl/util.hpp"

namespace nhkl::scen {

/// One fully specified experiment: domain, initial data, radiating
/// schedule, solver configuration, horizon.  A Scenario carries exactly
/// the information of its flat-config form; from_config(to_config(s))
/// reproduces s, and unknown keys are rejected rather than ignored.
struct Scenario {
    std::string name = "unnamed";

    // domain.*
    geo::DomainKind domain_kind = geo::DomainKind::box2d;
    double a = 1.0;  // box extents; the disk is always the unit disk
    double b = 1.0;
    int n1 = 64;  // grid resolution (disk: rings, nodes per ring)
    int n2 = 64;

    // u0.*: constant plus an optional cosine mode (boxes only).  The mode
    // has zero normal derivative on the walls, so it is compatible with
    // the insulated part of the boundary.
    double u0_value = 1.0;
    double u0_amp = 0.0;
    int u0_mx = 1;
    int u0_my = 1;

    // schedule.*: how the radiating region evolves.
    //   fixed      constant area gamma1_area
    //   global     polynomial decay from the unbounded-milestone pipeline
    //   capped     polynomial decay from the capped-milestone pipeline
    //   cap_shrink polar cap on the disk, projected half-width e^(-rate t)
    std::string schedule_mode = "fixed";
    double gamma1_area = 0.1;
    sched::PipelineInput pipeline;  // used by global/capped
    double shrink_rate = 1.0;       // used by cap_shrink

    // solver.*
    solver::SolverConfig solver_cfg;

    // run.*: absolute horizon, or a multiple of the pipeline's t*.
    double horizon = 1.0;
    double horizon_tstar = 0.0;  // when > 0, horizon = horizon_tstar * t*
    std::uint64_t seed = 1;

    cfg::Config to_config() const;
    static Scenario from_config(const cfg::Config& c);
    bool operator==(const Scenario& other) const {
        return to_config() == other.to_config();
    }
};

/// Names accepted by builtin_scenario, in display order.
std::vector<std::string> builtin_names();

/// Shipped configurations: a fixed-arc blowup box, the two prevention
/// pipelines (polynomial decay, capped decay), and the disk with an
/// exponentially shrinking polar cap.
Scenario builtin_scenario(const std::string& name);

/// The radiating schedule a scenario prescribes; pipeline modes also
/// yield the constants that generated the decay profile, which persisted
/// runs record next to their traces.
geo::BoundarySchedule build_boundary_schedule(
    const Scenario& s, std::optional<sched::ScheduleConstants>* constants_out =
                           nullptr);

/// Horizon after resolving a t*-relative request against the pipeline.
double resolve_horizon(const Scenario& s);

struct ScenarioResult {
    Scenario scenario;
    solver::RunReport report;
    std::optional<sched::ScheduleConstants> constants;
    std::string out_dir;  // empty when the run was not persisted
};

/// Runs the scenario; the two-argument form also writes
/// <out_root>/<name>/{report, trace.csv, config.snapshot}.
ScenarioResult run_scenario(const Scenario& s);
ScenarioResult run_scenario(const Scenario& s, const std::string& out_root);

/// One scenario re-run across values of a single numeric config key.
struct SweepPlan {
    Scenario base;
    std::string axis = "schedule.gamma1_area";
    std::vector<double> values;
    int parallelism = 1;
    bool refine = true;  // repeat each point at dt/2 for an uncertainty
};

struct SweepPoint {
    double param = 0.0;
    double t_star = 0.0;
    double uncertainty = 0.0;
    bool blowup = false;
    bool failed = false;
    std::string error;
};

struct SweepReport {
    std::vector<SweepPoint> points;  // ordered as plan.values
    bool partial = false;            // some point failed
    bool has_fit = false;
    LinearFit loglog;  // t* against the swept parameter

    /// CSV with header param,T_star,uncertainty.
    std::string to_csv() const;
};

/// Runs every point on a pool of `parallelism` workers; failures are
/// recorded per point and never abort the sweep.  The log-log fit uses
/// the points that ended in blowup.
SweepReport run_sweep(const SweepPlan& plan);

}  // namespace nhkl::scen
