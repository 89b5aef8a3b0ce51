// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#pragma once

#include "desync/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace desync {

// Scenario files hold one `key = value` pair per line; blank lines and lines
// starting with '#' are skipped. Keys: id, voltage, frequency, phase,
// chip_train, chip_attack, enables. The three value lists accept either an
// explicit set `{a, b, c}` or an inclusive range `[lo;hi] step s`, which
// expands to floor((hi-lo)/step)+1 values. `enables` is a comma-separated
// subset of f, p, v (or `none`).
ScenarioSpec parse_scenario(std::istream& in);
ScenarioSpec parse_scenario_text(const std::string& text);
ScenarioSpec load_scenario(const std::string& path);

// Inclusive range expansion, exposed for reuse and testing.
std::vector<double> expand_range(double lo, double hi, double step);

// The built-in scenario catalogue, embedded so the runner does not depend on
// the working directory. Ids: Synch, C1, C2, V1, V2, V3, P1, F1, F2, F3, F3_125.
const std::vector<std::string>& table1_scenario_ids();
std::string table1_scenario_text(const std::string& id);
ScenarioSpec table1_scenario(const std::string& id);

}  // namespace desync
