// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/dsp.hpp"

#include <cmath>

namespace desync {

namespace {

constexpr double kPi = 3.14159265358979323846;

Biquad rbj_highpass(double cutoff_hz, double sample_rate_hz, double q) {
  const double w0 = 2.0 * kPi * cutoff_hz / sample_rate_hz;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = (1.0 + cw) / 2.0 / a0;
  s.b1 = -(1.0 + cw) / a0;
  s.b2 = s.b0;
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

// Steady-state filter memory for a unit step, direct form II transposed.
// Scaling it by the first input sample makes the filter start settled, which
// is what keeps the backward pass from ringing at the edges.
std::array<double, 2> step_state(const Biquad& s) {
  const double k = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z2 = s.b2 - s.a2 * k;
  const double z1 = s.b1 - s.a1 * k + z2;
  return {z1, z2};
}

void run_section(const Biquad& s, Eigen::VectorXd& x, const std::array<double, 2>& zi) {
  double z1 = zi[0] * x[0];
  double z2 = zi[1] * x[0];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double in = x[i];
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    x[i] = out;
  }
}

}  // namespace

std::array<Biquad, 2> butterworth_highpass(double cutoff_hz, double sample_rate_hz) {
  if (!(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0) {
    throw ValidationError("cutoff must sit inside (0, sample_rate / 2)");
  }
  // Butterworth pole pairs at 22.5 and 67.5 degrees off the imaginary axis.
  const double q1 = 1.0 / (2.0 * std::cos(kPi / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * kPi / 8.0));
  return {rbj_highpass(cutoff_hz, sample_rate_hz, q1),
          rbj_highpass(cutoff_hz, sample_rate_hz, q2)};
}

Eigen::VectorXd filtfilt(const std::array<Biquad, 2>& sections, const Eigen::VectorXd& x,
                         Eigen::Index padlen) {
  const Eigen::Index n = x.size();
  if (n < 2) throw ValidationError("filtfilt needs at least two samples");
  if (padlen < 0 || padlen > n - 1) {
    throw ValidationError("pad length must be in [0, len - 1]");
  }

  Eigen::VectorXd ext(n + 2 * padlen);
  for (Eigen::Index i = 0; i < padlen; ++i) {
    ext[i] = 2.0 * x[0] - x[padlen - i];
    ext[n + padlen + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  ext.segment(padlen, n) = x;

  const std::array<std::array<double, 2>, 2> zi = {step_state(sections[0]),
                                                   step_state(sections[1])};
  for (int s = 0; s < 2; ++s) run_section(sections[static_cast<std::size_t>(s)], ext, zi[static_cast<std::size_t>(s)]);
  ext.reverseInPlace();
  for (int s = 0; s < 2; ++s) run_section(sections[static_cast<std::size_t>(s)], ext, zi[static_cast<std::size_t>(s)]);
  ext.reverseInPlace();
  return ext.segment(padlen, n);
}

Eigen::VectorXd high_pass(const Eigen::VectorXd& x, double sample_rate_hz, double cutoff_hz) {
  const auto sections = butterworth_highpass(cutoff_hz, sample_rate_hz);
  const auto wanted =
      static_cast<Eigen::Index>(3 * std::llround(sample_rate_hz / cutoff_hz));
  const Eigen::Index padlen = std::min<Eigen::Index>(x.size() - 1, std::max<Eigen::Index>(12, wanted));
  return filtfilt(sections, x, padlen);
}

TraceSet high_pass(const TraceSet& set, double cutoff_hz) {
  set.validate();
  TraceSet out = set;
  for (Eigen::Index r = 0; r < out.samples.rows(); ++r) {
    const Eigen::VectorXd row = set.samples.row(r).transpose().cast<double>();
    out.samples.row(r) = high_pass(row, set.sample_rate_hz, cutoff_hz).cast<float>().transpose();
  }
  return out;
}

SampleVector aggregate(const SampleVector& x, Eigen::Index n) {
  if (n < 1) throw ValidationError("aggregation factor must be at least 1");
  if (n == 1) return x;
  const Eigen::Index len = x.size();
  const Eigen::Index out_len = (len + n - 1) / n;
  SampleVector out(out_len);
  for (Eigen::Index i = 0; i < out_len; ++i) {
    const Eigen::Index lo = i * n;
    const Eigen::Index count = std::min(n, len - lo);
    out[i] = static_cast<float>(x.segment(lo, count).cast<double>().mean());
  }
  return out;
}

TraceSet aggregate_set(const TraceSet& set, Eigen::Index n) {
  set.validate();
  if (n < 1) throw ValidationError("aggregation factor must be at least 1");
  TraceSet out = set;
  if (n == 1) return out;
  const Eigen::Index len = set.n_samples();
  const Eigen::Index out_len = (len + n - 1) / n;
  out.samples.resize(set.samples.rows(), out_len);
  for (Eigen::Index r = 0; r < set.samples.rows(); ++r) {
    out.samples.row(r) = aggregate(set.samples.row(r).transpose(), n).transpose();
  }
  out.sample_rate_hz = set.sample_rate_hz / static_cast<double>(n);
  return out;
}

}  // namespace desync
