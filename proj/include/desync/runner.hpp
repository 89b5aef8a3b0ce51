// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.
//
// End-to-end orchestration: synthesize profiling and attack sets for a
// scenario, run the raw / high-passed / aggregated attack matrix, and render
// the result table.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "desync/attack.hpp"
#include "desync/leakage.hpp"
#include "desync/scenario.hpp"

namespace desync {

// Which post-processed views of the traces the attacks run on.
struct PostMatrix {
  bool include_raw = true;
  bool include_hpf = true;
  std::vector<Eigen::Index> agg_levels = {1, 100, 1000};
  double hpf_cutoff_hz = 125e3;
};

struct ExperimentPlan {
  ScenarioSpec scenario;
  std::size_t n_attack_traces = 10000;
  std::size_t n_profiling_per_class = 100;  // 256 classes
  PostMatrix post;
  std::uint64_t synthesis_seed = 1;
  std::uint64_t attack_seed = 2;
  int ge_reps = 20;
  int template_byte = 0;
  std::string out_dir;  // empty: keep everything in memory
  KeyBytes key = {0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6,
                  0xab, 0xf7, 0x15, 0x88, 0x09, 0xcf, 0x4f, 0x3c};
  LeakageModel model;
  SimConfig sim;

  void validate() const;
};

// One line of the result table: one scenario at one aggregation level, with
// raw and high-passed columns side by side.
struct ReportRow {
  std::string scenario_id;
  Eigen::Index agg = 1;
  double rho_raw = 0.0;
  double rho_hpf = 0.0;
  std::optional<std::size_t> cpa_raw;  // traces to full disclosure, if reached
  std::optional<std::size_t> cpa_hpf;
  double ta_raw_ge = 0.0;  // guessing entropy at the last checkpoint
  double ta_hpf_ge = 0.0;
  bool ta_raw_ok = false;  // guessing entropy exactly 1
  bool ta_hpf_ok = false;
  std::string error;  // non-empty: this row aborted and carries no results
};

// Run one scenario end to end.  Produces one row per aggregation level;
// failures mark the affected rows instead of aborting the run.
std::vector<ReportRow> run_plan(const ExperimentPlan& plan);

struct SuiteConfig {
  double scale = 0.1;  // fraction of the full budgets (100k CPA, 1k per class)
  std::uint64_t seed = 1;
  std::string out_dir;
  int ge_reps = 20;
  LeakageModel model;
  SimConfig sim;
};

struct SuiteReport {
  std::vector<ReportRow> rows;
  double noise_sigma = 0.0;
};

// Run the whole scenario family and collect the result table.  With an
// output directory set, synthesized and post-processed trace sets, the
// correlation curves, and the rendered reports are written there; available
// disk space is checked against an estimate before any synthesis starts.
SuiteReport run_table1_suite(const SuiteConfig& cfg);

// Render the result table as CSV.  Disclosure cells show a trace count or
// "x"; template cells show "ok" or "x".
std::string render_report_csv(const SuiteReport& report);

// Render the result table as aligned text.
std::string render_report_txt(const SuiteReport& report);

struct CalibrationResult {
  double sigma = 0.0;
  double rho_raw = 0.0;
  std::size_t disclosure = 0;
  int iterations = 0;
};

// Pick a noise level at which the undefended scenario's CPA discloses the
// key at the first checkpoint with a mid-range correlation peak.
CalibrationResult calibrate_noise_sigma(std::uint64_t seed,
                                        const LeakageModel& start = {},
                                        const SimConfig& sim = {});

// Scenario ids and their aggregation levels for the standard suite.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>> suite_rows();

}  // namespace desync
