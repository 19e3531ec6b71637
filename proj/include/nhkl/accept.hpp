#pragma once

#include <string>
#include <vector>

namespace nhkl::accept {

/// One checked acceptance criterion.  `detail` carries the measured
/// quantities and the pinned tolerances so a failure is diagnosable from
/// the report alone.
struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct SuiteReport {
    std::vector<CriterionResult> results;

    int failures() const;
    /// One line per criterion ("[PASS] 3 ...: measured ... [1.2s]") plus a
    /// summary line.
    std::string to_text() const;
};

/// Suites: kernel (1-4), solver (5, 6, 10), e2e (7-9), seqlab (11),
/// schedule (12), all.
std::vector<std::string> suite_names();

/// Runs the requested suite.  Criteria are independent apart from shared
/// calibrations and the blowup run that criterion 10 re-examines; those
/// are computed once.  When out_root is nonempty the scenario-driving
/// criteria persist their run artifacts beneath it.
SuiteReport run_acceptance(const std::string& suite,
                           const std::string& out_root = "");

}  // namespace nhkl::accept
