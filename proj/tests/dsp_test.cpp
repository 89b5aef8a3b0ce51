// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "desync/dsp.hpp"
#include "desync/rng.hpp"

#include <cmath>

using namespace desync;

namespace {

constexpr double kFs = 250e6;
constexpr double kCut = 125e3;

Eigen::VectorXd sine(double freq_hz, double fs_hz, Eigen::Index n) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / fs_hz);
  }
  return x;
}

double central_rms(const Eigen::VectorXd& x) {
  const Eigen::Index margin = x.size() / 8;
  const auto mid = x.segment(margin, x.size() - 2 * margin);
  return std::sqrt(mid.squaredNorm() / static_cast<double>(mid.size()));
}

}  // namespace

TEST_CASE("biquad sections reject DC and pass Nyquist") {
  const auto sections = butterworth_highpass(kCut, kFs);
  for (const Biquad& s : sections) {
    // Transfer function at z = 1 (DC) and z = -1 (Nyquist).
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double ny = (s.b0 - s.b1 + s.b2) / (1.0 - s.a1 + s.a2);
    CHECK(std::abs(dc) < 1e-12);
    CHECK(ny == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("a constant input is removed to numerical precision") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(8192, 3.7);
  const Eigen::VectorXd y = high_pass(x, kFs, kCut);
  REQUIRE(y.size() == x.size());
  CHECK(y.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a tone a decade above the cutoff passes within one percent") {
  const Eigen::VectorXd x = sine(10.0 * kCut, kFs, 16384);
  const Eigen::VectorXd y = high_pass(x, kFs, kCut);
  CHECK(central_rms(y) == doctest::Approx(central_rms(x)).epsilon(0.01));
}

TEST_CASE("a tone a decade below the cutoff is attenuated by 60 dB") {
  const Eigen::VectorXd x = sine(kCut / 10.0, kFs, 60000);
  const Eigen::VectorXd y = high_pass(x, kFs, kCut);
  CHECK(central_rms(y) < central_rms(x) * 1e-3);
}

TEST_CASE("zero-phase filtering is linear") {
  Rng rng(5);
  Eigen::VectorXd x(500), y(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    x[i] = rng.gaussian();
    y[i] = rng.gaussian();
  }
  const Eigen::VectorXd combined = high_pass(2.5 * x - 1.25 * y, kFs, kCut);
  const Eigen::VectorXd separate =
      2.5 * high_pass(x, kFs, kCut) - 1.25 * high_pass(y, kFs, kCut);
  CHECK((combined - separate).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("filtering runs forward and backward without a time shift") {
  // A symmetric pulse must stay symmetric around its center.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4001);
  for (Eigen::Index i = -20; i <= 20; ++i) {
    x[2000 + i] = std::exp(-0.01 * static_cast<double>(i * i));
  }
  // The recursion's poles sit close to the unit circle at this
  // cutoff-to-rate ratio, so forward and backward rounding drift apart by a
  // few 1e-6; an actual one-sample shift would show up at the 1e-2 level.
  const Eigen::VectorXd y = high_pass(x, kFs, kCut);
  for (Eigen::Index i = 1; i <= 100; ++i) {
    CHECK(std::abs(y[2000 + i] - y[2000 - i]) < 1e-4);
  }
}

TEST_CASE("cutoff must sit below Nyquist") {
  CHECK_THROWS_AS(butterworth_highpass(kFs / 2.0, kFs), ValidationError);
  CHECK_THROWS_AS(butterworth_highpass(0.0, kFs), ValidationError);
  CHECK_THROWS_AS(butterworth_highpass(-5.0, kFs), ValidationError);
  CHECK_THROWS_AS(butterworth_highpass(kCut, 0.0), ValidationError);
}

TEST_CASE("filtfilt pad length is bounded by the input") {
  const auto sections = butterworth_highpass(kCut, kFs);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS(filtfilt(sections, x, 10), ValidationError);
  CHECK_THROWS_AS(filtfilt(sections, x, -1), ValidationError);
  CHECK_NOTHROW(filtfilt(sections, x, 9));
  Eigen::VectorXd one = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(filtfilt(sections, one, 0), ValidationError);
}

TEST_CASE("high-passing a set keeps its shape and metadata") {
  TraceSet set;
  set.sample_rate_hz = kFs;
  set.resolution_bits = 12;
  set.plaintexts.resize(2, 16);
  set.plaintexts.setZero();
  set.samples.resize(2, 3000);
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index i = 0; i < 3000; ++i) {
      // Slow ramp (well under the cutoff) plus a sharp spike.
      set.samples(r, i) = static_cast<float>(static_cast<double>(i) * 1e-3);
    }
    set.samples(r, 1500 + 100 * r) += 2.0f;
  }

  const TraceSet out = high_pass(set, kCut);
  CHECK(out.n_traces() == 2);
  CHECK(out.n_samples() == 3000);
  CHECK(out.sample_rate_hz == kFs);
  CHECK(out.resolution_bits == 12);
  CHECK(out.plaintexts == set.plaintexts);

  // The ramp is gone; the spikes survive at their positions.
  CHECK(std::abs(out.samples(0, 700)) < 0.05f);
  CHECK(out.samples(0, 1500) > 1.0f);
  CHECK(out.samples(1, 1600) > 1.0f);
}

TEST_CASE("aggregation averages non-overlapping windows") {
  SampleVector x(4);
  x << 1.0f, 2.0f, 3.0f, 4.0f;
  const SampleVector y = aggregate(x, 2);
  REQUIRE(y.size() == 2);
  CHECK(y[0] == 1.5f);
  CHECK(y[1] == 3.5f);
}

TEST_CASE("a trailing partial window averages only what it has") {
  SampleVector x(3);
  x << 1.0f, 2.0f, 3.0f;
  const SampleVector y = aggregate(x, 2);
  REQUIRE(y.size() == 2);
  CHECK(y[0] == 1.5f);
  CHECK(y[1] == 3.0f);
}

TEST_CASE("aggregation corner cases") {
  SampleVector x(5);
  x << 4.0f, 8.0f, 12.0f, 16.0f, 20.0f;

  SUBCASE("factor one is the identity") {
    const SampleVector y = aggregate(x, 1);
    CHECK(y == x);
  }
  SUBCASE("output length is the ceiling of len over n") {
    CHECK(aggregate(x, 2).size() == 3);
    CHECK(aggregate(x, 5).size() == 1);
    CHECK(aggregate(x, 7).size() == 1);
  }
  SUBCASE("a constant stays exactly constant") {
    const SampleVector c = SampleVector::Constant(10, 2.5f);
    const SampleVector y = aggregate(c, 3);
    for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y[i] == 2.5f);
  }
  SUBCASE("commutes with scalar multiplication") {
    const SampleVector a = aggregate(SampleVector(3.0f * x), 2);
    const SampleVector b = 3.0f * aggregate(x, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    }
  }
  SUBCASE("factor below one is rejected") {
    CHECK_THROWS_AS(aggregate(x, 0), ValidationError);
  }
}

TEST_CASE("aggregating a set scales the sample rate down") {
  TraceSet set;
  set.sample_rate_hz = kFs;
  set.resolution_bits = 12;
  set.plaintexts.resize(1, 16);
  set.plaintexts.setZero();
  set.samples.resize(1, 1001);
  for (Eigen::Index i = 0; i < 1001; ++i) set.samples(0, i) = static_cast<float>(i % 7);

  const TraceSet out = aggregate_set(set, 100);
  CHECK(out.n_samples() == 11);  // ceil(1001 / 100)
  CHECK(out.sample_rate_hz == doctest::Approx(kFs / 100.0).epsilon(1e-12));
  CHECK(out.key == set.key);

  const TraceSet same = aggregate_set(set, 1);
  CHECK(same == set);
}
