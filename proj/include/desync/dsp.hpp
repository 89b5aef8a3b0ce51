// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.
//
// Trace post-processing: zero-phase Butterworth high-pass filtering and
// sample aggregation.

#pragma once

#include <array>

#include "desync/types.hpp"

namespace desync {

// One normalized biquad section (a0 == 1).
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

// Fourth-order Butterworth high-pass as two cascaded biquad sections.
std::array<Biquad, 2> butterworth_highpass(double cutoff_hz, double sample_rate_hz);

// Zero-phase filtering: forward pass, backward pass, odd-reflection padding
// at both ends, steady-state initial conditions per section.  Matches the
// behaviour of scipy.signal.filtfilt with its default pad type.
Eigen::VectorXd filtfilt(const std::array<Biquad, 2>& sections, const Eigen::VectorXd& x,
                         Eigen::Index padlen);

// High-pass one trace with zero phase distortion.  The default 125 kHz
// cutoff removes the slow supply-voltage envelope while keeping the
// per-cycle switching detail.
Eigen::VectorXd high_pass(const Eigen::VectorXd& x, double sample_rate_hz,
                          double cutoff_hz = 125e3);

// High-pass every trace in a set.
TraceSet high_pass(const TraceSet& set, double cutoff_hz = 125e3);

// Mean over non-overlapping windows of n samples; a trailing partial window
// is averaged over the samples it actually has.  Output length is
// ceil(len / n).
SampleVector aggregate(const SampleVector& x, Eigen::Index n);

// Aggregate every trace in a set; the sample rate scales down by n.
TraceSet aggregate_set(const TraceSet& set, Eigen::Index n);

}  // namespace desync
