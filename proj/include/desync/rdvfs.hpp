// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#pragma once

#include "desync/mmcm.hpp"
#include "desync/rng.hpp"
#include "desync/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace desync {

struct SimConfig {
  double f_in_mhz = 100.0;
  double lock_time_us = 20.0;
  double phase_native_step_deg = 3.75;
  double phase_step_time_us = 0.5;
  // Completions shorter than this dwell (no-op requests, zero-step phase
  // draws) still take one interval, so the request loop always advances.
  double min_request_interval_us = 1.0;
  double v_period_us = 60.0;
  double regulator_tau_us = 50.0;
  // The actuators run before the capture window opens, so traces sample the
  // stationary regime instead of a cold start.
  double warmup_us = 300.0;
  MmcmLimits limits;
};

// Random operating-point generator: one memory per component, drawn uniformly
// and independently when the matching enable is set. Disabled components keep
// their previous value and consume no randomness.
struct RopGenState {
  Rng rng;
  std::vector<double> freq_memory;
  std::vector<double> phase_memory;
  std::vector<double> volt_memory;
  OperatingPoint current;
};

RopGenState make_ropgen(const ScenarioSpec& scenario, std::uint64_t seed);
OperatingPoint ropgen_next(RopGenState& state, const ControlEnables& enables);

// Large phase shifts are realized as a train of native-step actuations; the
// last entry carries the remainder. A zero target is an empty train.
std::vector<double> phase_shift_sequence(double target_deg, double native_step_deg);

// Dual-tile glitch-free frequency switch: the selected tile keeps driving the
// output while the shadow tile reconfigures; when the shadow locks, the
// output multiplexer swaps. `ack` is high from accepted request to
// completion and blocks concurrent requests.
struct DfsState {
  bool sel_b = false;  // false: tile A drives the output
  MmcmConfig master_cfg;
  MmcmConfig slave_cfg;
  bool locked_a = true;
  bool locked_b = true;
  bool ack = false;
  double lock_remaining_us = 0.0;

  struct Pending {
    double freq_mhz = 0.0;
    double phase_deg = 0.0;
    bool f_en = false;
    bool p_en = false;
    bool operator==(const Pending&) const = default;
  };
  std::optional<Pending> pending;

  double current_freq_mhz = 0.0;
  double current_phase_deg = 0.0;

  bool selected_locked() const { return sel_b ? locked_b : locked_a; }
  bool operator==(const DfsState&) const = default;
};

DfsState make_dfs(const ConfigTable& table, double f0_mhz, double p0_deg,
                  const SimConfig& cfg = {});

// Returns false (state untouched) while a previous request is in flight.
// Throws NotFoundError when f_en names a frequency outside the table.
bool dfs_request(DfsState& state, double f_mhz, double p_deg, bool f_en, bool p_en,
                 const ConfigTable& table, const SimConfig& cfg = {});

struct DfsEvent {
  double at_us = 0.0;  // offset from the start of the tick
  double freq_mhz = 0.0;
  double phase_deg = 0.0;
  bool swapped = false;  // sel toggled (frequency path reconfigured)
  bool noop = false;     // request had nothing to do
};

std::vector<DfsEvent> dfs_tick(DfsState& state, double dt_us);

// First-order regulator: v(t) = target + (start - target) * exp(-(t-t0)/tau).
struct RegulatorState {
  double v = 1.0;
  double target = 1.0;
};

// Waveform of the supply rail sampled at sample_rate_hz over [0, duration).
// Actuations are (time_us, target_v) pairs; times before 0 are applied to the
// initial state analytically.
SampleVector regulator_response(const std::vector<std::pair<double, double>>& actuations,
                                double tau_us, double sample_rate_hz, double duration_us,
                                double v_initial);

struct TimelineResult {
  OperatingTimeline timeline;
  SampleVector regulator_waveform;
  double waveform_rate_hz = 0.0;
  std::vector<std::pair<double, double>> v_actuations;  // within [0, duration)
  double v_at_start = 0.0;
};

// Closed-loop actuator run: ROPGen feeds the frequency/phase switch (a new
// request as soon as the previous completes) and the supply regulator
// (fixed cadence when only the voltage loop is enabled). Deterministic in
// (scenario, duration, seed, table, cfg).
TimelineResult build_timeline(const ScenarioSpec& scenario, double duration_us,
                              std::uint64_t seed, const ConfigTable& table,
                              double waveform_rate_hz, const SimConfig& cfg = {});

}  // namespace desync
