// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "desync/attack.hpp"
#include "desync/leakage.hpp"
#include "desync/mmcm.hpp"
#include "desync/rng.hpp"
#include "desync/scenario.hpp"
#include "desync/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace desync;
using doctest::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

KeyBytes random_key(Rng& rng) {
  KeyBytes key{};
  for (auto& b : key) b = rng.byte();
  return key;
}

// Random plaintexts, Gaussian samples: nothing to find.
TraceSet noise_set(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  TraceSet set;
  set.key = random_key(rng);
  set.plaintexts.resize(n, 16);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int b = 0; b < 16; ++b) set.plaintexts(i, b) = rng.byte();
  }
  set.samples.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      set.samples(i, j) = static_cast<float>(rng.gaussian());
    }
  }
  return set;
}

// Byte b leaks hw(sbox(pt[b] ^ key[b])) in column 2b + 1; even columns hold
// noise.  Plaintext byte 0 walks 0..255 so every class is covered.
TraceSet hw_leak_set(Eigen::Index n, std::uint64_t seed, double sigma = 0.0) {
  Rng rng(seed);
  TraceSet set;
  set.key = random_key(rng);
  set.plaintexts.resize(n, 16);
  for (Eigen::Index i = 0; i < n; ++i) {
    set.plaintexts(i, 0) = static_cast<std::uint8_t>(i & 0xff);
    for (int b = 1; b < 16; ++b) set.plaintexts(i, b) = rng.byte();
  }
  set.samples.resize(n, 33);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto leak = first_round_leakage(set.key, set.plaintexts.row(i).data());
    for (Eigen::Index j = 0; j < 33; ++j) {
      set.samples(i, j) = static_cast<float>(rng.gaussian());
    }
    for (int b = 0; b < 16; ++b) {
      set.samples(i, 2 * b + 1) =
          static_cast<float>(leak[static_cast<std::size_t>(b)] + sigma * rng.gaussian());
    }
  }
  return set;
}

// Two-pass oracle for the streamed attack: peak |pearson| over columns.
double two_pass_peak(const TraceSet& set, int byte_index, std::uint8_t guess) {
  const Eigen::Index n = set.samples.rows();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] = hw(kSbox[static_cast<std::size_t>(set.plaintexts(i, byte_index) ^ guess)]);
  }
  double peak = 0.0;
  for (Eigen::Index j = 0; j < set.samples.cols(); ++j) {
    const Eigen::VectorXd x = set.samples.col(j).cast<double>();
    peak = std::max(peak, std::abs(pearson(h, x)));
  }
  return peak;
}

}  // namespace

TEST_CASE("pearson reproduces hand-computed values") {
  const auto x = vec({1.0, 2.0, 3.0, 4.0});
  CHECK(pearson(x, x) == Approx(1.0));
  CHECK(pearson(x, x) <= 1.0);
  CHECK(pearson(x, -x) == Approx(-1.0));
  CHECK(pearson(x, -x) >= -1.0);

  // cov([1,2,3],[1,3,2]) = 0.5 against unit-ish spreads of 1.
  CHECK(pearson(vec({1, 2, 3}), vec({1, 3, 2})) == Approx(0.5));
  CHECK(pearson(vec({1, 3, 2}), vec({1, 2, 3})) == Approx(0.5));

  const auto y = vec({2.0, -1.0, 0.5, 7.0});
  CHECK(pearson(x, y) == Approx(pearson(y, x)));
  CHECK(pearson(2.0 * x, y + Eigen::VectorXd::Constant(4, 3.0)) == Approx(pearson(x, y)));
}

TEST_CASE("pearson rejects bad input") {
  CHECK_THROWS_AS(pearson(vec({1, 2, 3}), vec({1, 2})), ValidationError);
  CHECK_THROWS_AS(pearson(vec({1}), vec({1})), ValidationError);
  CHECK_THROWS_WITH_AS(pearson(vec({2, 2, 2}), vec({1, 2, 3})),
                       "correlation undefined: an input has zero variance",
                       NumericalError);
  CHECK_THROWS_AS(pearson(vec({1, 2, 3}), vec({5, 5, 5})), NumericalError);
}

TEST_CASE("cpa_correlation matches pearson column by column") {
  TraceSet set = noise_set(64, 12, 41);
  const int byte_index = 3;
  const std::uint8_t guess = 0x5a;

  Eigen::VectorXd h(set.n_traces());
  for (Eigen::Index i = 0; i < set.n_traces(); ++i) {
    h[i] = hw(kSbox[static_cast<std::size_t>(set.plaintexts(i, byte_index) ^ guess)]);
  }

  const Eigen::VectorXd corr = cpa_correlation(set, byte_index, guess);
  REQUIRE(corr.size() == 12);
  for (Eigen::Index j = 0; j < corr.size(); ++j) {
    CHECK(corr[j] == Approx(pearson(h, set.samples.col(j).cast<double>())).epsilon(1e-12));
  }

  SUBCASE("constant columns correlate to zero instead of failing") {
    set.samples.col(7).setConstant(2.5f);
    const Eigen::VectorXd with_flat = cpa_correlation(set, byte_index, guess);
    CHECK(with_flat[7] == 0.0);
  }

  SUBCASE("argument guards") {
    CHECK_THROWS_AS(cpa_correlation(set, -1, guess), ValidationError);
    CHECK_THROWS_AS(cpa_correlation(set, 16, guess), ValidationError);
    TraceSet tiny = noise_set(1, 4, 5);
    CHECK_THROWS_AS(cpa_correlation(tiny, 0, guess), ValidationError);
  }
}

TEST_CASE("rho_metric is the true-key correlation peak") {
  const TraceSet set = hw_leak_set(300, 17, 0.5);
  for (int b : {0, 7, 15}) {
    const Eigen::VectorXd corr =
        cpa_correlation(set, b, set.key[static_cast<std::size_t>(b)]);
    CHECK(rho_metric(set, b) == Approx(corr.cwiseAbs().maxCoeff()).epsilon(1e-15));
  }
  CHECK(rho_metric(hw_leak_set(300, 17, 0.0), 0) == Approx(1.0));
}

TEST_CASE("streamed attack matches the two-pass oracle on every guess") {
  const TraceSet set = noise_set(200, 16, 1234);
  const CpaResult result = cpa_attack(set, {200});
  REQUIRE(result.grid == std::vector<std::size_t>{200});

  for (int b = 0; b < 16; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    for (int k = 0; k < 256; ++k) {
      const double oracle = two_pass_peak(set, b, static_cast<std::uint8_t>(k));
      CHECK(result.final_peak[bu][static_cast<std::size_t>(k)] ==
            Approx(oracle).epsilon(1e-9));
    }
    CHECK(result.true_rho[bu] ==
          result.final_peak[bu][set.key[bu]]);
    int rank = 1;
    for (int k = 0; k < 256; ++k) {
      if (k != set.key[bu] && result.final_peak[bu][static_cast<std::size_t>(k)] >
                                  result.true_rho[bu]) {
        ++rank;
      }
    }
    CHECK(result.final_rank[bu] == rank);
    CHECK(result.ranks(0, b) == rank);
    CHECK(result.true_rho_at(0, b) == Approx(result.true_rho[bu]).epsilon(1e-12));

    // The recorded peak sample actually attains the true-key peak.
    const Eigen::VectorXd corr = cpa_correlation(set, b, set.key[bu]);
    CHECK(std::abs(corr[result.true_peak_sample[bu]]) ==
          Approx(result.true_rho[bu]).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint rows agree with attacks on prefixes") {
  const TraceSet set = hw_leak_set(120, 3, 2.0);
  const CpaResult full = cpa_attack(set, {40, 80, 120});
  REQUIRE(full.grid.size() == 3);

  TraceSet prefix;
  prefix.key = set.key;
  prefix.plaintexts = set.plaintexts.topRows(80);
  prefix.samples = set.samples.topRows(80);
  const CpaResult part = cpa_attack(prefix, {80});

  for (int b = 0; b < 16; ++b) {
    CHECK(full.ranks(1, b) == part.ranks(0, b));
    CHECK(full.true_rho_at(1, b) == Approx(part.true_rho_at(0, b)).epsilon(1e-12));
  }
}

TEST_CASE("hamming-weight leak columns disclose immediately") {
  TraceSet set = hw_leak_set(512, 7);
  set.samples.col(0).setZero();
  set.samples.col(32).setConstant(2.0f);

  const CpaResult result = cpa_attack(set);
  CHECK(result.grid == std::vector<std::size_t>{200, 500, 512});

  for (int b = 0; b < 16; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    CHECK(result.final_rank[bu] == 1);
    CHECK(result.true_rho[bu] == Approx(1.0));
    CHECK(result.true_peak_sample[bu] == 2 * b + 1);
    for (Eigen::Index g = 0; g < 3; ++g) CHECK(result.ranks(g, b) == 1);
  }
  CHECK(result.zero_variance_samples == 2);

  const auto disclosure = traces_to_disclosure(result);
  REQUIRE(disclosure.has_value());
  CHECK(*disclosure == 200);
}

TEST_CASE("pure noise keeps the correlation low and the key hidden") {
  const TraceSet set = noise_set(2000, 20, 99);
  CHECK(rho_metric(set, 0) < 0.2);

  const CpaResult result = cpa_attack(set);
  CHECK(result.grid == std::vector<std::size_t>{200, 500, 1000, 2000});
  CHECK_FALSE(traces_to_disclosure(result).has_value());
  CHECK(result.zero_variance_samples == 0);
  for (int b = 0; b < 16; ++b) {
    CHECK(result.true_rho[static_cast<std::size_t>(b)] < 0.2);
  }
}

TEST_CASE("explicit grids are clipped, sorted and deduplicated") {
  const TraceSet set = noise_set(150, 4, 8);

  CHECK(cpa_attack(set, {200}).grid == std::vector<std::size_t>{150});
  CHECK(cpa_attack(set, {0, 1000}).grid == std::vector<std::size_t>{150});
  CHECK(cpa_attack(set, {3, 3, 2}).grid == std::vector<std::size_t>{2, 3});
  CHECK(cpa_attack(set, {150, 10}).grid == std::vector<std::size_t>{10, 150});

  const CpaResult two = cpa_attack(set, {5, 10});
  CHECK(two.ranks.rows() == 2);
  CHECK(two.ranks.cols() == 16);
  CHECK(two.true_rho_at.rows() == 2);
}

TEST_CASE("default checkpoint grid") {
  CHECK(default_cpa_grid(137) == std::vector<std::size_t>{137});
  CHECK(default_cpa_grid(200) == std::vector<std::size_t>{200});
  CHECK(default_cpa_grid(1000) == std::vector<std::size_t>{200, 500, 1000});
  CHECK(default_cpa_grid(250000) ==
        std::vector<std::size_t>{200, 500, 1000, 5000, 10000, 50000, 100000, 250000});
  CHECK_THROWS_AS(default_cpa_grid(0), ValidationError);
}

TEST_CASE("disclosure needs every byte at rank one") {
  CpaResult r;
  r.grid = {10, 20, 30};
  r.ranks = Eigen::MatrixXi::Ones(3, 16);

  SUBCASE("first clean checkpoint wins") {
    r.ranks(0, 5) = 2;
    const auto d = traces_to_disclosure(r);
    REQUIRE(d.has_value());
    CHECK(*d == 20);
  }
  SUBCASE("one stubborn byte per row blocks disclosure") {
    r.ranks(0, 5) = 2;
    r.ranks(1, 0) = 3;
    r.ranks(2, 15) = 2;
    CHECK_FALSE(traces_to_disclosure(r).has_value());
  }
  SUBCASE("immediately first") {
    const auto d = traces_to_disclosure(r);
    REQUIRE(d.has_value());
    CHECK(*d == 10);
  }
}

TEST_CASE("attack input guards") {
  CHECK_THROWS_AS(cpa_attack(noise_set(1, 4, 2)), ValidationError);
  TraceSet bad = noise_set(8, 4, 2);
  bad.resolution_bits = 0;
  CHECK_THROWS_AS(cpa_attack(bad), ValidationError);
}

TEST_CASE("bootstrap interval brackets a noisy correlation peak") {
  const TraceSet set = hw_leak_set(400, 21, 1.0);
  const BootstrapRho boot = bootstrap_rho(set, 0, 200, 77);

  CHECK(boot.samples.size() == 200);
  CHECK(boot.ci_lo <= boot.ci_hi);
  CHECK(boot.rho == Approx(rho_metric(set, 0)).epsilon(1e-15));
  CHECK(boot.ci_lo > 0.0);
  CHECK(boot.ci_hi <= 1.0 + 1e-12);
  CHECK(boot.rho >= boot.ci_lo - 0.1);
  CHECK(boot.rho <= boot.ci_hi + 0.1);

  // The interval endpoints interpolate the sorted resample distribution.
  std::vector<double> sorted = boot.samples;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] * (1.0 - (pos - std::floor(pos))) +
           sorted[hi] * (pos - std::floor(pos));
  };
  CHECK(boot.ci_lo == Approx(quantile(0.025)).epsilon(1e-12));
  CHECK(boot.ci_hi == Approx(quantile(0.975)).epsilon(1e-12));
}

TEST_CASE("bootstrap is deterministic per seed and honors the window") {
  const TraceSet set = hw_leak_set(200, 33, 1.5);
  const BootstrapRho a = bootstrap_rho(set, 0, 50, 5);
  const BootstrapRho b = bootstrap_rho(set, 0, 50, 5);
  CHECK(a.samples == b.samples);
  CHECK(a.ci_lo == b.ci_lo);
  CHECK(a.ci_hi == b.ci_hi);

  const BootstrapRho c = bootstrap_rho(set, 0, 50, 6);
  CHECK(a.samples != c.samples);

  // A window of one keeps only the peak column, which still carries the
  // full-set peak.
  const BootstrapRho narrow = bootstrap_rho(set, 0, 50, 5, 1);
  CHECK(narrow.rho == Approx(a.rho).epsilon(1e-15));
  CHECK(narrow.samples.size() == 50);

  CHECK_THROWS_AS(bootstrap_rho(set, 0, 1, 5), ValidationError);
  CHECK_THROWS_AS(bootstrap_rho(set, 16, 10, 5), ValidationError);
  CHECK_THROWS_AS(bootstrap_rho(noise_set(1, 3, 4), 0, 10, 5), ValidationError);
}

TEST_CASE("points of interest follow between-class variance and spacing") {
  TraceMatrix samples(40, 10);
  samples.setZero();
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) {
    const int cls = i % 2;
    labels[static_cast<std::size_t>(i)] = cls;
    const float sign = cls == 0 ? 1.0f : -1.0f;
    samples(i, 2) = 10.0f * sign;
    samples(i, 3) = 8.0f * sign;
    samples(i, 7) = 5.0f * sign;
  }

  const TemplateModel tight = build_templates_labeled(samples, labels, 2, 1);
  CHECK(tight.poi == std::vector<Eigen::Index>{2, 3});

  const TemplateModel spaced = build_templates_labeled(samples, labels, 2, 2);
  CHECK(spaced.poi == std::vector<Eigen::Index>{2, 7});

  // Spacing can make the requested count unreachable.
  const TemplateModel sparse = build_templates_labeled(samples, labels, 3, 10);
  CHECK(sparse.poi.size() == 1);
  CHECK(sparse.poi[0] == 2);

  // More points than samples clips to the trace width.
  const TemplateModel all = build_templates_labeled(samples, labels, 99, 1);
  CHECK(all.poi.size() == 10);

  CHECK_THROWS_AS(build_templates_labeled(samples, labels, 0, 1), ValidationError);
  CHECK_THROWS_AS(build_templates_labeled(samples, labels, 2, 0), ValidationError);
  labels.pop_back();
  CHECK_THROWS_AS(build_templates_labeled(samples, labels, 2, 1), ValidationError);
  labels.push_back(300);
  CHECK_THROWS_AS(build_templates_labeled(samples, labels, 2, 1), ValidationError);
  CHECK_THROWS_AS(
      build_templates_labeled(samples.topRows(1), {0}, 2, 1), ValidationError);
}

TEST_CASE("noise-free class encodings are recovered exactly") {
  // Column 0 carries the class value itself, column 1 its Hamming weight;
  // the remaining columns are flat.
  const Eigen::Index n = 512;
  TraceMatrix samples(n, 6);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i) % 256;
    labels[static_cast<std::size_t>(i)] = cls;
    samples(i, 0) = static_cast<float>(cls);
    samples(i, 1) = static_cast<float>(hw(static_cast<std::uint8_t>(cls)));
    samples(i, 2) = 1.0f;
    samples(i, 3) = 1.0f;
    samples(i, 4) = 1.0f;
    samples(i, 5) = 1.0f;
  }
  const TemplateModel model = build_templates_labeled(samples, labels, 2, 1);
  REQUIRE(model.poi == std::vector<Eigen::Index>{0, 1});
  CHECK(model.means.rows() == 256);
  CHECK(model.means.cols() == 2);
  for (int cls = 0; cls < 256; ++cls) {
    CHECK(model.means(cls, 0) == Approx(cls).epsilon(1e-12));
    CHECK(model.means(cls, 1) ==
          Approx(hw(static_cast<std::uint8_t>(cls))).epsilon(1e-12));
  }

  // Score each distinct pattern against the model; the generating class must
  // rank first everywhere.
  Eigen::MatrixXd scores(256, 256);
  for (int i = 0; i < 256; ++i) {
    Eigen::Vector2d x(static_cast<double>(i), static_cast<double>(hw(static_cast<std::uint8_t>(i))));
    scores.row(i) = (model.proj * x - 0.5 * model.quad).transpose();
  }
  for (int i = 0; i < 256; ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    CHECK(best == i);
  }
  const GeCurve curve = ranked_ge(scores, 0, {1, 4, 16}, 3, 11);
  REQUIRE(curve.grid == std::vector<std::size_t>{1, 4, 16});
  // Only row 0 of this score matrix belongs to class 0, so restrict to it.
  const GeCurve self = ranked_ge(scores.topRows(1), 0, {1}, 2, 11);
  CHECK(self.ge == std::vector<double>{1.0});
}

TEST_CASE("tied likelihoods share their rank") {
  // Two clone classes at the top produce a mid-rank of exactly 1.5.
  Eigen::MatrixXd scores = Eigen::MatrixXd::Constant(20, 256, -4.0);
  scores.col(0).setConstant(3.0);
  scores.col(1).setConstant(3.0);
  const GeCurve twins = ranked_ge(scores, 0, {1, 2, 8, 20}, 4, 5);
  for (double g : twins.ge) CHECK(g == 1.5);

  // All classes identical: every rank is the full mid-rank 128.5.
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(16, 256);
  const GeCurve blind = ranked_ge(flat, 200, {1, 4, 16}, 3, 9);
  for (double g : blind.ge) CHECK(g == 128.5);
}

TEST_CASE("random scores leave the guess near the middle of the ranking") {
  Rng rng(4242);
  Eigen::MatrixXd scores(400, 256);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) scores(i, j) = rng.gaussian();
  }
  // Keep every grid point below the trace count: at the full budget each
  // repetition sums the same rows and the rank collapses to one uniform draw.
  const GeCurve curve = ranked_ge(scores, 77, {1, 10, 100}, 150, 31);
  for (double g : curve.ge) {
    CHECK(g > 100.0);
    CHECK(g < 157.0);
  }
}

TEST_CASE("ranked GE is invariant to positive scaling and per-trace shifts") {
  Rng rng(55);
  Eigen::MatrixXd scores(64, 256);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) scores(i, j) = rng.gaussian();
  }
  const GeCurve base = ranked_ge(scores, 9, {1, 8, 64}, 5, 13);

  Eigen::MatrixXd scaled = 4.0 * scores;
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
    scaled.row(i).array() += 0.5 * static_cast<double>(i % 7);
  }
  const GeCurve moved = ranked_ge(scaled, 9, {1, 8, 64}, 5, 13);
  CHECK(moved.grid == base.grid);
  CHECK(moved.ge == base.ge);
}

TEST_CASE("guessing entropy is deterministic per seed") {
  Rng rng(66);
  Eigen::MatrixXd scores(100, 256);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) scores(i, j) = rng.gaussian();
  }
  const GeCurve a = ranked_ge(scores, 3, {1, 5, 25}, 3, 101);
  const GeCurve b = ranked_ge(scores, 3, {1, 5, 25}, 3, 101);
  CHECK(a.ge == b.ge);
  const GeCurve c = ranked_ge(scores, 3, {1, 5, 25}, 3, 102);
  CHECK(a.ge != c.ge);
}

TEST_CASE("score machinery guards") {
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(8, 256);
  CHECK_THROWS_AS(ranked_ge(scores, 0, {1}, 0, 1), ValidationError);
  CHECK_THROWS_AS(ranked_ge(scores, -1, {1}, 1, 1), ValidationError);
  CHECK_THROWS_AS(ranked_ge(scores, 256, {1}, 1, 1), ValidationError);
  CHECK_THROWS_AS(ranked_ge(Eigen::MatrixXd::Zero(8, 17), 0, {1}, 1, 1),
                  ValidationError);

  scores(2, 100) = std::nan("");
  CHECK_THROWS_WITH_AS(ranked_ge(scores, 0, {1}, 1, 1),
                       "non-finite likelihood at trace 2", NumericalError);
  scores(2, 100) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ranked_ge(scores, 0, {1}, 1, 1), NumericalError);
}

TEST_CASE("default guessing-entropy grid") {
  CHECK(default_ta_grid(100) ==
        std::vector<std::size_t>{1, 2, 5, 10, 20, 50, 100});
  CHECK(default_ta_grid(150) ==
        std::vector<std::size_t>{1, 2, 5, 10, 20, 50, 100});
  CHECK(default_ta_grid(3) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(default_ta_grid(0), ValidationError);
}

TEST_CASE("template attack on synthesized captures recovers the key byte") {
  const ScenarioSpec synch = table1_scenario("Synch");
  const ConfigTable table = build_config_table(50.0, 50.0, 0.125);
  LeakageModel model;
  model.noise_sigma = 0.01;

  KeyBytes key{};
  for (int i = 0; i < 16; ++i) key[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(17 * i + 3);

  const TraceSet profiling = synthesize_profiling_set(synch, key, 1024, 900, table, model);
  const TraceSet attack = synthesize_set(synch, key, 64, 901, table, model);

  const TemplateModel tmpl = build_templates(profiling, 0, 5);
  CHECK(tmpl.byte_index == 0);
  REQUIRE_FALSE(tmpl.poi.empty());
  // The leak for byte 0 sits at the encryption start, 4 us into a 250 MS/s
  // capture running at 50 MHz.
  for (Eigen::Index p : tmpl.poi) {
    CHECK(p >= 995);
    CHECK(p <= 1010);
  }

  const GeCurve curve = template_attack(attack, tmpl, {1, 2, 5, 10, 20}, 5, 77);
  REQUIRE(curve.grid.size() == 5);
  CHECK(curve.ge.back() == 1.0);
  CHECK(curve.ge.front() < 64.0);

  // Guessing entropy is non-increasing here apart from tiny replication
  // wobble at the smallest counts.
  CHECK(curve.ge[3] <= curve.ge[0] + 1.0);

  SUBCASE("points of interest must fit the attacked traces") {
    TemplateModel broken = tmpl;
    broken.poi.push_back(attack.samples.cols() + 5);
    CHECK_THROWS_WITH_AS(template_attack(attack, broken, {1}, 1, 1),
                         "template points of interest fall outside the trace",
                         ValidationError);
  }

  SUBCASE("byte index guard") {
    CHECK_THROWS_AS(build_templates(profiling, 16, 5), ValidationError);
  }
}
