// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/leakage.hpp"

#include <algorithm>
#include <cmath>

namespace desync {

const std::array<std::uint8_t, 256> kSbox = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b,
    0xfe, 0xd7, 0xab, 0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0,
    0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26,
    0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0,
    0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed,
    0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f,
    0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec,
    0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14,
    0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c,
    0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f,
    0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e,
    0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1, 0xf8, 0x98, 0x11,
    0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f,
    0xb0, 0x54, 0xbb, 0x16};

std::array<int, 16> first_round_leakage(const KeyBytes& key,
                                        const std::uint8_t* plaintext16) {
  std::array<int, 16> out;
  for (int i = 0; i < 16; ++i) {
    out[static_cast<std::size_t>(i)] =
        hw(kSbox[static_cast<std::size_t>(plaintext16[i] ^ key[static_cast<std::size_t>(i)])]);
  }
  return out;
}

namespace {

const ChipProfile kChips[] = {
    {"artix7_100", 1.0, 0.0},
    {"artix7_35", 0.93, 0.35},
};

}  // namespace

const ChipProfile& chip_profile(const std::string& label) {
  for (const ChipProfile& c : kChips) {
    if (c.label == label) return c;
  }
  throw NotFoundError("unknown chip profile: " + label);
}

float quantize(double value, int bits, double full_scale) {
  const double levels = std::ldexp(1.0, bits);
  const double step = full_scale / levels;
  double code = std::round(value / step);
  code = std::clamp(code, 0.0, levels - 1.0);
  return static_cast<float>(code * step);
}

Eigen::Index trace_length(const LeakageModel& model, double f_min_mhz) {
  if (!(f_min_mhz > 0.0)) throw ValidationError("minimum frequency must be positive");
  const double window_us =
      model.trigger_delay_us + static_cast<double>(model.cycles_per_round) / f_min_mhz + 1.0;
  return static_cast<Eigen::Index>(std::llround(window_us * model.sample_rate_hz * 1e-6));
}

SampleVector synthesize_trace(const KeyBytes& key, const std::uint8_t* plaintext16,
                              const OperatingTimeline& timeline,
                              const SampleVector& regulator_waveform,
                              double waveform_rate_hz, Eigen::Index n_samples,
                              const LeakageModel& model, const ChipProfile& chip,
                              Rng& noise_rng) {
  timeline.validate();
  if (n_samples <= 0) throw ValidationError("trace length must be positive");

  const double rate_us = model.sample_rate_hz * 1e-6;
  const double wave_rate_us = waveform_rate_hz * 1e-6;
  const double window_us = static_cast<double>(n_samples) / rate_us;

  const std::array<int, 16> leak = first_round_leakage(key, plaintext16);
  std::array<double, 64> cycle_activity{};
  for (int c = 0; c < model.cycles_per_round && c < 64; ++c) {
    cycle_activity[static_cast<std::size_t>(c)] = model.beta;
  }
  for (int i = 0; i < 16; ++i) {
    const int c = model.byte_cycle(i);
    if (c >= 0 && c < model.cycles_per_round && c < 64) {
      cycle_activity[static_cast<std::size_t>(c)] +=
          model.alpha * static_cast<double>(leak[static_cast<std::size_t>(i)]);
    }
  }

  SampleVector trace = SampleVector::Zero(n_samples);
  auto voltage_at = [&](double t_us) {
    const auto idx = static_cast<Eigen::Index>(std::floor(t_us * wave_rate_us));
    if (idx < 0 || idx >= regulator_waveform.size()) {
      throw CoverageError("regulator waveform does not cover the trace window");
    }
    return static_cast<double>(regulator_waveform[idx]);
  };
  auto deposit = [&](double a_us, double b_us, double height) {
    const double lo = std::max(a_us, 0.0);
    const double hi = std::min(b_us, window_us);
    if (hi <= lo) return;
    auto k = static_cast<Eigen::Index>(std::floor(lo * rate_us));
    const auto k_last = std::min<Eigen::Index>(
        n_samples - 1, static_cast<Eigen::Index>(std::floor(hi * rate_us)));
    for (; k <= k_last; ++k) {
      const double bin_lo = static_cast<double>(k) / rate_us;
      const double bin_hi = static_cast<double>(k + 1) / rate_us;
      const double overlap = std::min(hi, bin_hi) - std::max(lo, bin_lo);
      if (overlap > 0.0) {
        trace[k] += static_cast<float>(height * overlap * rate_us);
      }
    }
  };

  // The clock runs from t = 0; the first round occupies cycles_per_round
  // cycles starting at the first edge at or after the trigger delay.
  double t_edge = 0.0;
  long enc_start_cycle = -1;
  long cycles_done = 0;
  long cycle = 0;
  while (t_edge < window_us) {
    const OperatingPoint pt = timeline.point_at(t_edge);
    const double period_us = 1.0 / pt.frequency_mhz;
    if (enc_start_cycle < 0 && t_edge >= model.trigger_delay_us - 1e-12) {
      enc_start_cycle = cycle;
    }
    double activity = model.beta;
    if (enc_start_cycle >= 0) {
      const long rel = cycle - enc_start_cycle;
      if (rel >= 0 && rel < model.cycles_per_round) {
        activity = cycle_activity[static_cast<std::size_t>(rel)];
        ++cycles_done;
      }
    }
    const double pulse_start = t_edge + (pt.phase_deg / 360.0) * period_us;
    const double v = voltage_at(std::min(pulse_start, window_us - 1e-9));
    const double supply = v * v * (pt.frequency_mhz / model.f_ref_mhz);
    const double height = chip.gain * supply * activity + chip.offset;
    deposit(pulse_start, pulse_start + period_us, height);
    t_edge += period_us;
    ++cycle;
  }
  if (enc_start_cycle < 0 || cycles_done < model.cycles_per_round) {
    throw CoverageError("trace window ends before the encryption completes");
  }

  for (Eigen::Index k = 0; k < n_samples; ++k) {
    const double noisy =
        static_cast<double>(trace[k]) + model.noise_sigma * noise_rng.gaussian();
    trace[k] = model.quantize_bits > 0
                   ? quantize(noisy, model.quantize_bits, model.full_scale)
                   : static_cast<float>(noisy);
  }
  return trace;
}

namespace {

constexpr std::uint64_t kTimelineStream = 0x7431;
constexpr std::uint64_t kPlaintextStream = 0x9a3f;
constexpr std::uint64_t kNoiseStream = 0x11c5;

TraceSet synthesize_on_chip(const ScenarioSpec& scenario, const ChipProfile& chip,
                            const KeyBytes& key, std::size_t n_traces,
                            std::uint64_t seed, const ConfigTable& table,
                            const LeakageModel& model, const SimConfig& sim) {
  scenario.validate();
  if (n_traces == 0) throw ValidationError("trace count must be positive");

  const double f_min =
      *std::min_element(scenario.frequency_values.begin(), scenario.frequency_values.end());
  const Eigen::Index n_samples = trace_length(model, f_min);
  const double window_us = static_cast<double>(n_samples) / (model.sample_rate_hz * 1e-6);

  TraceSet set;
  set.sample_rate_hz = model.sample_rate_hz;
  set.resolution_bits = model.quantize_bits > 0 ? model.quantize_bits : 32;
  set.key = key;
  set.chip_label = chip.label;
  set.plaintexts.resize(static_cast<Eigen::Index>(n_traces), 16);
  set.samples.resize(static_cast<Eigen::Index>(n_traces), n_samples);

  for (std::size_t i = 0; i < n_traces; ++i) {
    const std::uint64_t trace_seed = derive_seed(seed, i);
    Rng pt_rng(derive_seed(trace_seed, kPlaintextStream));
    std::array<std::uint8_t, 16> pt;
    for (auto& b : pt) b = pt_rng.byte();

    const TimelineResult tl = build_timeline(scenario, window_us,
                                             derive_seed(trace_seed, kTimelineStream), table,
                                             model.sample_rate_hz, sim);
    Rng noise_rng(derive_seed(trace_seed, kNoiseStream));
    const SampleVector trace =
        synthesize_trace(key, pt.data(), tl.timeline, tl.regulator_waveform,
                         tl.waveform_rate_hz, n_samples, model, chip, noise_rng);

    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < 16; ++j) set.plaintexts(row, j) = pt[static_cast<std::size_t>(j)];
    set.samples.row(row) = trace.transpose();
  }
  set.validate();
  return set;
}

}  // namespace

TraceSet synthesize_set(const ScenarioSpec& scenario, const KeyBytes& key,
                        std::size_t n_traces, std::uint64_t seed,
                        const ConfigTable& table, const LeakageModel& model,
                        const SimConfig& sim) {
  return synthesize_on_chip(scenario, chip_profile(scenario.chip_attack), key, n_traces,
                            seed, table, model, sim);
}

TraceSet synthesize_profiling_set(const ScenarioSpec& scenario, const KeyBytes& key,
                                  std::size_t n_traces, std::uint64_t seed,
                                  const ConfigTable& table, const LeakageModel& model,
                                  const SimConfig& sim) {
  return synthesize_on_chip(scenario, chip_profile(scenario.chip_train), key, n_traces,
                            seed, table, model, sim);
}

}  // namespace desync
