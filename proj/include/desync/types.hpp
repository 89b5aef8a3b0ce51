// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace desync {

// Traces are stored row-major, one trace per row, so a single trace is a
// contiguous slice and block-wise streaming over traces is cache-friendly.
using TraceMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PlaintextMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 16, Eigen::RowMajor>;
using SampleVector = Eigen::VectorXf;
using KeyBytes = std::array<std::uint8_t, 16>;

// Correlation and covariance work happens in double regardless of the trace
// scalar; 256 hypothesis rows by n_samples columns.
using CorrMatrix = Eigen::MatrixXd;

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Truncated input is a distinct failure from malformed input: it names how
// many bytes were expected and how many were present.
struct TruncatedError : ParseError {
  using ParseError::ParseError;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  InfeasibleError(const std::string& what, double best_error_mhz)
      : std::runtime_error(what), best_error_mhz(best_error_mhz) {}
  double best_error_mhz;
};

struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_eighth_multiple(double mhz) {
  const double steps = mhz * 8.0;
  return std::abs(steps - std::llround(steps)) < 1e-6;
}

// One actuator setting: what the clock and supply are asked to be.
struct OperatingPoint {
  double frequency_mhz = 50.0;  // multiple of 0.125 in [5, 800]
  double phase_deg = 0.0;       // [0, 360)
  double voltage_v = 1.0;       // 0.01 V granularity

  void validate() const;
  bool operator==(const OperatingPoint&) const = default;
};

// Piecewise-constant operating point over time. Segments must start at 0,
// be strictly increasing, and hold valid points.
struct OperatingTimeline {
  struct Segment {
    double start_us = 0.0;
    OperatingPoint point;
    bool operator==(const Segment&) const = default;
  };
  std::vector<Segment> segments;

  void validate() const;
  const OperatingPoint& point_at(double t_us) const;
  bool operator==(const OperatingTimeline&) const = default;
};

struct ControlEnables {
  bool f_en = false;
  bool p_en = false;
  bool v_en = false;
  bool operator==(const ControlEnables&) const = default;
};

// A capture: n_traces x n_samples of quantized samples plus the plaintexts
// and the key that produced them.
struct TraceSet {
  double sample_rate_hz = 250e6;
  std::uint32_t resolution_bits = 12;
  KeyBytes key{};
  PlaintextMatrix plaintexts;
  TraceMatrix samples;
  std::string chip_label;

  Eigen::Index n_traces() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }
  void validate() const;
  bool operator==(const TraceSet&) const;
};

struct ScenarioSpec {
  std::string id;
  std::vector<double> voltage_values;
  std::vector<double> frequency_values;
  std::vector<double> phase_values;
  std::string chip_train;
  std::string chip_attack;
  ControlEnables enables;

  void validate() const;
};

}  // namespace desync
