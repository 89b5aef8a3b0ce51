// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace desync {

void OperatingPoint::validate() const {
  std::ostringstream msg;
  if (!(frequency_mhz >= 5.0 && frequency_mhz <= 800.0)) {
    msg << "frequency " << frequency_mhz << " MHz outside [5, 800]";
    throw ValidationError(msg.str());
  }
  if (!is_eighth_multiple(frequency_mhz)) {
    msg << "frequency " << frequency_mhz << " MHz is not a multiple of 0.125 MHz";
    throw ValidationError(msg.str());
  }
  if (!(phase_deg >= 0.0 && phase_deg < 360.0)) {
    msg << "phase " << phase_deg << " deg outside [0, 360)";
    throw ValidationError(msg.str());
  }
  const double centi = voltage_v * 100.0;
  if (std::abs(centi - std::llround(centi)) > 1e-6) {
    msg << "voltage " << voltage_v << " V is not a multiple of 0.01 V";
    throw ValidationError(msg.str());
  }
  if (!(voltage_v > 0.0)) {
    msg << "voltage " << voltage_v << " V must be positive";
    throw ValidationError(msg.str());
  }
}

void OperatingTimeline::validate() const {
  if (segments.empty()) throw ValidationError("timeline has no segments");
  if (segments.front().start_us != 0.0) {
    throw ValidationError("timeline must start at 0 us");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segments[i].point.validate();
    if (i > 0 && !(segments[i].start_us > segments[i - 1].start_us)) {
      std::ostringstream msg;
      msg << "segment start times must be strictly increasing (segment " << i << ")";
      throw ValidationError(msg.str());
    }
  }
}

const OperatingPoint& OperatingTimeline::point_at(double t_us) const {
  assert(!segments.empty() && "timeline must have segments");
  assert(t_us >= 0.0 && "timeline time starts at 0");
  // Last segment whose start is <= t; the final segment extends onward.
  auto it = std::upper_bound(segments.begin(), segments.end(), t_us,
                             [](double t, const Segment& s) { return t < s.start_us; });
  return std::prev(it)->point;
}

void TraceSet::validate() const {
  std::ostringstream msg;
  if (samples.rows() != plaintexts.rows()) {
    msg << "trace count " << samples.rows() << " != plaintext count " << plaintexts.rows();
    throw ValidationError(msg.str());
  }
  if (samples.rows() > 0 && samples.cols() == 0) {
    throw ValidationError("non-empty trace set must have at least one sample per trace");
  }
  if (!(sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
  if (resolution_bits == 0 || resolution_bits > 32) {
    msg << "resolution " << resolution_bits << " bits outside [1, 32]";
    throw ValidationError(msg.str());
  }
  if (chip_label.size() > 27) {
    msg << "chip label '" << chip_label << "' exceeds 27 characters";
    throw ValidationError(msg.str());
  }
}

bool TraceSet::operator==(const TraceSet& other) const {
  return sample_rate_hz == other.sample_rate_hz && resolution_bits == other.resolution_bits &&
         key == other.key && chip_label == other.chip_label &&
         plaintexts.rows() == other.plaintexts.rows() && plaintexts == other.plaintexts &&
         samples.rows() == other.samples.rows() && samples.cols() == other.samples.cols() &&
         samples == other.samples;
}

void ScenarioSpec::validate() const {
  std::ostringstream msg;
  if (id.empty()) throw ValidationError("scenario id is empty");
  if (voltage_values.empty() || frequency_values.empty() || phase_values.empty()) {
    throw ValidationError("scenario " + id + " must list voltage, frequency, and phase values");
  }
  if (chip_train.empty() || chip_attack.empty()) {
    throw ValidationError("scenario " + id + " must name chip_train and chip_attack");
  }
  if (frequency_values.size() > 1024) {
    msg << "scenario " << id << " lists " << frequency_values.size()
        << " frequencies, cap is 1024";
    throw ValidationError(msg.str());
  }
  if (voltage_values.size() > 128) {
    msg << "scenario " << id << " lists " << voltage_values.size() << " voltages, cap is 128";
    throw ValidationError(msg.str());
  }
  for (const double f : frequency_values) {
    OperatingPoint p;
    p.frequency_mhz = f;
    p.validate();
  }
  for (const double v : voltage_values) {
    if (!(v >= 0.75 && v <= 1.05)) {
      msg << "scenario " << id << " voltage " << v << " V outside [0.75, 1.05]";
      throw ValidationError(msg.str());
    }
    const double centi = v * 100.0;
    if (std::abs(centi - std::llround(centi)) > 1e-6) {
      msg << "scenario " << id << " voltage " << v << " V is not a multiple of 0.01 V";
      throw ValidationError(msg.str());
    }
  }
  for (const double p : phase_values) {
    if (!(p >= 0.0 && p < 360.0)) {
      msg << "scenario " << id << " phase " << p << " deg outside [0, 360)";
      throw ValidationError(msg.str());
    }
  }
}

}  // namespace desync
