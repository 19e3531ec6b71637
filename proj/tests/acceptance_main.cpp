// Runs every acceptance criterion and prints one pass/fail line per
// criterion with the measured values and pinned tolerances.  Exits nonzero
// when any criterion fails, so the ctest entry goes red with the report
// attached rather than hiding a failure.
#include <cstdio>

#include "nhkl/accept.hpp"

int main() {
    auto report = nhkl::accept::run_acceptance("all");
    std::fputs(report.to_text().c_str(), stdout);
    return report.failures() == 0 ? 0 : 1;
}
