// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.
//
// Key-recovery engines: correlation power analysis against the first-round
// S-box output, and Gaussian template attacks with pooled covariance.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "desync/types.hpp"

namespace desync {

// Plain two-pass Pearson correlation.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Per-sample correlation between the measured traces and the Hamming-weight
// prediction hw(sbox(pt[byte] ^ key_byte)).
Eigen::VectorXd cpa_correlation(const TraceSet& set, int byte_index,
                                std::uint8_t key_byte);

// Peak |correlation| for the set's true key at the given byte.
double rho_metric(const TraceSet& set, int byte_index = 0);

// Standard trace-count checkpoints, cut to the available budget; the budget
// itself is always included.
std::vector<std::size_t> default_cpa_grid(std::size_t budget);

struct CpaResult {
  std::vector<std::size_t> grid;          // evaluated trace counts, ascending
  Eigen::MatrixXi ranks;                  // grid.size() x 16, rank of true key byte
  Eigen::MatrixXd true_rho_at;            // grid.size() x 16, peak |corr| of true byte
  std::array<std::array<double, 256>, 16> final_peak{};  // peak |corr| per candidate
  std::array<double, 16> true_rho{};      // peak |corr| of the true key byte
  std::array<Eigen::Index, 16> true_peak_sample{};
  std::array<int, 16> final_rank{};
  std::size_t zero_variance_samples = 0;  // at the final checkpoint
};

// Run CPA on all 16 key bytes, ranking the true byte at each checkpoint.
// Rank counts strictly better candidates only: 1 + #{k : peak_k > peak_true}.
CpaResult cpa_attack(const TraceSet& set, std::vector<std::size_t> grid = {});

// Smallest checkpoint at which every byte ranks first, if any.
std::optional<std::size_t> traces_to_disclosure(const CpaResult& result);

struct BootstrapRho {
  double rho = 0.0;    // peak |corr| on the full set, within the window
  double ci_lo = 0.0;  // 2.5th percentile of the bootstrap distribution
  double ci_hi = 0.0;  // 97.5th percentile
  std::vector<double> samples;
};

// Percentile-bootstrap confidence interval for the peak correlation metric.
// Resampling is restricted to the `window` samples with the largest |corr|
// on the full set.
BootstrapRho bootstrap_rho(const TraceSet& set, int byte_index, int n_boot,
                           std::uint64_t seed, Eigen::Index window = 256);

// Gaussian templates for one key byte: one class per S-box output value,
// pooled within-class covariance over the selected points of interest.
struct TemplateModel {
  int byte_index = 0;
  std::vector<Eigen::Index> poi;
  Eigen::MatrixXd means;  // 256 x n_poi
  Eigen::MatrixXd proj;   // 256 x n_poi, means * cov^-1
  Eigen::VectorXd quad;   // 256, diag(means * cov^-1 * means^T)
};

// Fit templates from a profiling set with a known key.  Points of interest
// are chosen greedily by between-class variance, keeping at least
// `min_spacing` samples between picks.
TemplateModel build_templates(const TraceSet& profiling, int byte_index,
                              int n_poi = 5, Eigen::Index min_spacing = 1);

// Synthetic-label variant for machinery checks: class labels are supplied
// directly instead of being derived from plaintexts and a key.
TemplateModel build_templates_labeled(const TraceMatrix& samples,
                                      const std::vector<int>& labels, int n_poi = 5,
                                      Eigen::Index min_spacing = 1);

struct GeCurve {
  std::vector<std::size_t> grid;  // attack trace counts
  std::vector<double> ge;         // mean rank of the true byte, mid-rank ties
};

// Standard attack-trace checkpoints for guessing-entropy curves.
std::vector<std::size_t> default_ta_grid(std::size_t budget);

// Guessing entropy of the true key byte versus attack-trace count.  Each
// repetition samples traces without replacement under its own derived seed;
// ties in log-likelihood share their rank (mid-rank convention).
GeCurve template_attack(const TraceSet& attack, const TemplateModel& tmpl,
                        const std::vector<std::size_t>& grid, int reps,
                        std::uint64_t seed);

// Mid-rank guessing entropy over per-trace class scores (row i holds the
// score of every class for trace i, and the hypothesis IS the class); the
// machinery behind template_attack, exposed for sanity checks.
GeCurve ranked_ge(const Eigen::MatrixXd& scores, int true_class,
                  const std::vector<std::size_t>& grid, int reps, std::uint64_t seed);

}  // namespace desync
