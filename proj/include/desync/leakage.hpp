// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.
//
// Synthetic power-trace generation for a first-round AES-128 target.  Each
// clock cycle deposits a rectangular power pulse whose height follows the
// switching activity of that cycle and the supply conditions (voltage
// squared, frequency) at the time the cycle runs.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "desync/rdvfs.hpp"
#include "desync/rng.hpp"
#include "desync/types.hpp"

namespace desync {

// AES forward S-box.
extern const std::array<std::uint8_t, 256> kSbox;

// Hamming weight of a byte.
inline int hw(std::uint8_t v) { return __builtin_popcount(static_cast<unsigned>(v)); }

// Per-byte first-round leakage values: hw(sbox(pt[i] ^ key[i])) for each of
// the 16 state bytes.
std::array<int, 16> first_round_leakage(const KeyBytes& key,
                                        const std::uint8_t* plaintext16);

// Gain and static offset of a particular device, relative to the reference
// device the model constants were fit on.
struct ChipProfile {
  std::string label;
  double gain = 1.0;
  double offset = 0.0;
};

// Known device profiles ("artix7_100", "artix7_35").
const ChipProfile& chip_profile(const std::string& label);

// Everything that shapes a synthesized trace apart from the operating
// timeline itself.
struct LeakageModel {
  double alpha = 0.05;          // data-dependent activity weight
  double beta = 5.0;            // data-independent activity floor
  double noise_sigma = 0.15;    // additive Gaussian noise, pre-quantization
  int cycles_per_round = 64;    // clock cycles occupied by the first round
  double trigger_delay_us = 4.0;
  int quantize_bits = 12;       // 0 disables quantization
  double full_scale = 16.0;     // ADC range [0, full_scale)
  double f_ref_mhz = 50.0;      // frequency the activity constants are fit at
  double sample_rate_hz = 250e6;

  // Cycle index at which state byte i contributes its leakage.
  int byte_cycle(int i) const { return 4 * i; }
};

// Clamp-and-round quantization to the model's ADC grid.
float quantize(double value, int bits, double full_scale);

// Number of samples needed to cover the first round at the slowest clock in
// the scenario, with margin.
Eigen::Index trace_length(const LeakageModel& model, double f_min_mhz);

// Synthesize one trace.  The clock runs continuously from t = 0; the
// encryption's first cycle starts at the first cycle boundary at or after
// trigger_delay_us.  `timeline` gives frequency/phase segments,
// `regulator_waveform` the supply voltage at `waveform_rate_hz`; the
// waveform must cover the whole trace window or a CoverageError is thrown.
SampleVector synthesize_trace(const KeyBytes& key, const std::uint8_t* plaintext16,
                              const OperatingTimeline& timeline,
                              const SampleVector& regulator_waveform,
                              double waveform_rate_hz, Eigen::Index n_samples,
                              const LeakageModel& model, const ChipProfile& chip,
                              Rng& noise_rng);

// Synthesize a full trace set for a scenario: fresh random plaintexts, a
// fresh actuation timeline per trace, additive noise, quantization.
TraceSet synthesize_set(const ScenarioSpec& scenario, const KeyBytes& key,
                        std::size_t n_traces, std::uint64_t seed,
                        const ConfigTable& table,
                        const LeakageModel& model = {},
                        const SimConfig& sim = {});

// Like synthesize_set, but on the chip_train profile and with the given key;
// used to build profiling sets for template attacks.
TraceSet synthesize_profiling_set(const ScenarioSpec& scenario, const KeyBytes& key,
                                  std::size_t n_traces, std::uint64_t seed,
                                  const ConfigTable& table,
                                  const LeakageModel& model = {},
                                  const SimConfig& sim = {});

}  // namespace desync
