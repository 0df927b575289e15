#pragma once

#include <iosfwd>
#include <string>

#include "cvahedge/scenario.hpp"

namespace cvahedge {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

// Runs the scenario's mode and writes its files under scenario.output_dir.
// Diagnostics go to `log`.
int run(const Scenario& scenario, std::ostream& log);

// individual modes; they throw on failure
void run_simulate(const Scenario& s);
void run_price(const Scenario& s);
void run_cva(const Scenario& s);
void run_hedge(const Scenario& s);
// returns true when every check passed
bool run_verify(const Scenario& s);

}  // namespace cvahedge
