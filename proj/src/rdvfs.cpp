// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/rdvfs.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace desync {

RopGenState make_ropgen(const ScenarioSpec& scenario, std::uint64_t seed) {
  scenario.validate();
  RopGenState state{Rng(seed), scenario.frequency_values, scenario.phase_values,
                    scenario.voltage_values, OperatingPoint{}};
  state.current.frequency_mhz = scenario.frequency_values.front();
  state.current.phase_deg = scenario.phase_values.front();
  state.current.voltage_v = scenario.voltage_values.front();
  return state;
}

OperatingPoint ropgen_next(RopGenState& state, const ControlEnables& enables) {
  if (enables.f_en) {
    state.current.frequency_mhz = state.freq_memory[state.rng.uniform_index(state.freq_memory.size())];
  }
  if (enables.p_en) {
    state.current.phase_deg = state.phase_memory[state.rng.uniform_index(state.phase_memory.size())];
  }
  if (enables.v_en) {
    state.current.voltage_v = state.volt_memory[state.rng.uniform_index(state.volt_memory.size())];
  }
  return state.current;
}

std::vector<double> phase_shift_sequence(double target_deg, double native_step_deg) {
  if (!(native_step_deg > 0.0)) throw ValidationError("native phase step must be positive");
  if (target_deg < 0.0) throw ValidationError("phase shift target must be non-negative");
  std::vector<double> steps;
  if (target_deg < 1e-12) return steps;
  const auto full = static_cast<std::size_t>(std::floor(target_deg / native_step_deg + 1e-9));
  const double remainder = target_deg - static_cast<double>(full) * native_step_deg;
  steps.assign(full, native_step_deg);
  if (remainder > 1e-9) {
    steps.push_back(remainder);
  }
  return steps;
}

DfsState make_dfs(const ConfigTable& table, double f0_mhz, double p0_deg, const SimConfig&) {
  DfsState state;
  state.master_cfg = lookup(table, f0_mhz);
  state.slave_cfg = state.master_cfg;
  state.current_freq_mhz = f0_mhz;
  state.current_phase_deg = p0_deg;
  return state;
}

bool dfs_request(DfsState& state, double f_mhz, double p_deg, bool f_en, bool p_en,
                 const ConfigTable& table, const SimConfig& cfg) {
  if (state.ack) return false;

  double duration = 0.0;
  if (f_en) {
    state.slave_cfg = lookup(table, f_mhz);  // throws before any state change
    duration += cfg.lock_time_us;
  }
  if (p_en) {
    const double delta = std::fmod(p_deg - state.current_phase_deg + 360.0, 360.0);
    const auto steps = phase_shift_sequence(delta, cfg.phase_native_step_deg);
    duration += static_cast<double>(steps.size()) * cfg.phase_step_time_us;
  }
  if (f_en) {
    // The shadow tile drops lock while it reconfigures; the selected tile
    // keeps driving the output.
    (state.sel_b ? state.locked_a : state.locked_b) = false;
  }
  state.pending = DfsState::Pending{f_en ? f_mhz : state.current_freq_mhz,
                                    p_en ? p_deg : state.current_phase_deg, f_en, p_en};
  state.lock_remaining_us = duration;
  state.ack = true;
  return true;
}

std::vector<DfsEvent> dfs_tick(DfsState& state, double dt_us) {
  assert(dt_us >= 0.0 && "tick must advance time");
  std::vector<DfsEvent> events;
  if (!state.ack) return events;
  if (state.lock_remaining_us > dt_us) {
    state.lock_remaining_us -= dt_us;
    return events;
  }

  const DfsState::Pending pending = *state.pending;
  DfsEvent ev;
  ev.at_us = state.lock_remaining_us;
  ev.noop = !pending.f_en && !pending.p_en;
  if (pending.f_en) {
    (state.sel_b ? state.locked_a : state.locked_b) = true;
    state.sel_b = !state.sel_b;
    std::swap(state.master_cfg, state.slave_cfg);
    state.current_freq_mhz = pending.freq_mhz;
    ev.swapped = true;
  }
  if (pending.p_en) {
    state.current_phase_deg = pending.phase_deg;
  }
  ev.freq_mhz = state.current_freq_mhz;
  ev.phase_deg = state.current_phase_deg;
  state.lock_remaining_us = 0.0;
  state.ack = false;
  state.pending.reset();
  events.push_back(ev);
  return events;
}

SampleVector regulator_response(const std::vector<std::pair<double, double>>& actuations,
                                double tau_us, double sample_rate_hz, double duration_us,
                                double v_initial) {
  if (!(tau_us > 0.0)) throw ValidationError("regulator tau must be positive");
  if (!(sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
  const double rate_us = sample_rate_hz * 1e-6;
  const auto n = static_cast<Eigen::Index>(std::llround(duration_us * rate_us));
  SampleVector wave(n);

  std::vector<std::pair<double, double>> acts = actuations;
  std::stable_sort(acts.begin(), acts.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  double v = v_initial;
  double target = v_initial;
  double t_state = 0.0;
  std::size_t next = 0;

  // Fold in everything that happened before the window opens.
  if (!acts.empty() && acts.front().first < t_state) {
    double t_prev = acts.front().first;
    while (next < acts.size() && acts[next].first <= 0.0) {
      const double ta = acts[next].first;
      v = target + (v - target) * std::exp(-(ta - t_prev) / tau_us);
      target = acts[next].second;
      t_prev = ta;
      ++next;
    }
    v = target + (v - target) * std::exp(-(0.0 - t_prev) / tau_us);
  }

  Eigen::Index k = 0;
  while (k < n) {
    const double t_seg_end = next < acts.size() ? acts[next].first : duration_us;
    const auto k_end = std::min<Eigen::Index>(
        n, static_cast<Eigen::Index>(std::ceil(t_seg_end * rate_us - 1e-9)));
    if (k < k_end) {
      const double t_first = static_cast<double>(k) / rate_us;
      double vk = target + (v - target) * std::exp(-(t_first - t_state) / tau_us);
      const double decay = std::exp(-1.0 / (rate_us * tau_us));
      for (; k < k_end; ++k) {
        wave[k] = static_cast<float>(vk);
        vk = target + (vk - target) * decay;
      }
    }
    if (next < acts.size() && t_seg_end < duration_us) {
      const double ta = acts[next].first;
      v = target + (v - target) * std::exp(-(ta - t_state) / tau_us);
      target = acts[next].second;
      t_state = ta;
      ++next;
    } else if (k >= n) {
      break;
    }
  }
  return wave;
}

namespace {

struct TimedPoint {
  double t_us;
  OperatingPoint point;
};

}  // namespace

TimelineResult build_timeline(const ScenarioSpec& scenario, double duration_us,
                              std::uint64_t seed, const ConfigTable& table,
                              double waveform_rate_hz, const SimConfig& cfg) {
  scenario.validate();
  if (!(duration_us > 0.0)) throw ValidationError("timeline duration must be positive");

  RopGenState rop = make_ropgen(scenario, derive_seed(seed, 1));
  DfsState dfs = make_dfs(table, rop.current.frequency_mhz, rop.current.phase_deg, cfg);
  const ControlEnables& en = scenario.enables;
  const bool fp_active = en.f_en || en.p_en;
  const double start = -cfg.warmup_us;

  double v_target = rop.current.voltage_v;
  std::vector<std::pair<double, double>> all_v_acts;
  std::vector<TimedPoint> events;

  auto current_point = [&]() {
    return OperatingPoint{dfs.current_freq_mhz, dfs.current_phase_deg, v_target};
  };
  auto record = [&](double t, const OperatingPoint& p) {
    if (!events.empty() && events.back().t_us == t) {
      events.back().point = p;  // coalesce same-instant updates, last wins
    } else {
      events.push_back({t, p});
    }
  };

  if (fp_active) {
    double t = start;
    while (t < duration_us) {
      const OperatingPoint pt = ropgen_next(rop, en);
      if (en.v_en) {
        v_target = pt.voltage_v;
        all_v_acts.emplace_back(t, v_target);
        record(t, current_point());
      }
      const bool accepted = dfs_request(dfs, pt.frequency_mhz, pt.phase_deg, en.f_en, en.p_en,
                                        table, cfg);
      assert(accepted && "request loop only issues when the switch is idle");
      (void)accepted;
      const double dwell = std::max(dfs.lock_remaining_us, cfg.min_request_interval_us);
      for (const DfsEvent& ev : dfs_tick(dfs, dwell)) {
        if (!ev.noop) record(t + ev.at_us, current_point());
      }
      t += dwell;
    }
  } else if (en.v_en) {
    for (double t = start; t < duration_us; t += cfg.v_period_us) {
      const OperatingPoint pt = ropgen_next(rop, en);
      v_target = pt.voltage_v;
      all_v_acts.emplace_back(t, v_target);
      record(t, current_point());
    }
  }

  TimelineResult result;
  OperatingPoint point_at_0{rop.freq_memory.front(), rop.phase_memory.front(),
                            rop.volt_memory.front()};
  for (const TimedPoint& ev : events) {
    if (ev.t_us <= 0.0) {
      point_at_0 = ev.point;
    } else if (ev.t_us < duration_us) {
      result.timeline.segments.push_back({ev.t_us, ev.point});
    }
  }
  result.timeline.segments.insert(result.timeline.segments.begin(),
                                  OperatingTimeline::Segment{0.0, point_at_0});
  result.timeline.validate();

  result.regulator_waveform = regulator_response(all_v_acts, cfg.regulator_tau_us,
                                                 waveform_rate_hz, duration_us,
                                                 rop.volt_memory.front());
  result.waveform_rate_hz = waveform_rate_hz;
  result.v_at_start =
      result.regulator_waveform.size() > 0 ? result.regulator_waveform[0] : v_target;
  for (const auto& [t, v] : all_v_acts) {
    if (t >= 0.0 && t < duration_us) result.v_actuations.emplace_back(t, v);
  }
  return result;
}

}  // namespace desync
