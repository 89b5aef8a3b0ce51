// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "desync/leakage.hpp"
#include "desync/rng.hpp"

namespace desync {

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValidationError("pearson needs two equal-length vectors of at least 2 samples");
  }
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::VectorXd cx = x.array() - mx;
  const Eigen::VectorXd cy = y.array() - my;
  const double denom = std::sqrt(cx.squaredNorm() * cy.squaredNorm());
  if (denom <= 0.0) {
    throw NumericalError("correlation undefined: an input has zero variance");
  }
  return std::clamp(cx.dot(cy) / denom, -1.0, 1.0);
}

namespace {

void check_byte_index(int byte_index) {
  if (byte_index < 0 || byte_index >= 16) {
    throw ValidationError("byte index must be in [0, 16)");
  }
}

// W(k, v) = hw(sbox(v ^ k)): folding traces into per-plaintext-value class
// sums first makes the per-checkpoint correlation a 256 x 256 product instead
// of a pass over all traces, with bit-identical results.
const Eigen::MatrixXd& hw_by_guess() {
  static const Eigen::MatrixXd w = [] {
    Eigen::MatrixXd m(256, 256);
    for (int k = 0; k < 256; ++k) {
      for (int v = 0; v < 256; ++v) {
        m(k, v) = hw(kSbox[static_cast<std::size_t>(v ^ k)]);
      }
    }
    return m;
  }();
  return w;
}

std::vector<std::size_t> sanitize_grid(std::vector<std::size_t> grid, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t g : grid) {
    if (g >= 1 && g <= n) out.push_back(g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) out.push_back(n);
  return out;
}

}  // namespace

std::vector<std::size_t> default_cpa_grid(std::size_t budget) {
  if (budget == 0) throw ValidationError("trace budget must be positive");
  std::vector<std::size_t> grid;
  for (std::size_t g : {std::size_t{200}, std::size_t{500}, std::size_t{1000},
                        std::size_t{5000}, std::size_t{10000}, std::size_t{50000},
                        std::size_t{100000}}) {
    if (g <= budget) grid.push_back(g);
  }
  if (grid.empty() || grid.back() != budget) grid.push_back(budget);
  return grid;
}

Eigen::VectorXd cpa_correlation(const TraceSet& set, int byte_index,
                                std::uint8_t key_byte) {
  set.validate();
  check_byte_index(byte_index);
  const Eigen::Index n = set.samples.rows();
  const Eigen::Index m = set.samples.cols();
  if (n < 2) throw ValidationError("correlation needs at least 2 traces");

  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] = hw(kSbox[static_cast<std::size_t>(
        set.plaintexts(i, byte_index) ^ key_byte)]);
  }
  const double mh = h.mean();
  const Eigen::VectorXd ch = h.array() - mh;
  const double hh = ch.squaredNorm();

  Eigen::VectorXd corr(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd x = set.samples.col(j).cast<double>();
    const Eigen::VectorXd cx = x.array() - x.mean();
    const double denom = std::sqrt(cx.squaredNorm() * hh);
    corr[j] = denom > 0.0 ? ch.dot(cx) / denom : 0.0;
  }
  return corr;
}

double rho_metric(const TraceSet& set, int byte_index) {
  return cpa_correlation(set, byte_index, set.key[static_cast<std::size_t>(byte_index)])
      .cwiseAbs()
      .maxCoeff();
}

CpaResult cpa_attack(const TraceSet& set, std::vector<std::size_t> grid) {
  set.validate();
  const auto n = static_cast<std::size_t>(set.samples.rows());
  const Eigen::Index m = set.samples.cols();
  if (n < 2) throw ValidationError("attack needs at least 2 traces");
  if (grid.empty()) grid = default_cpa_grid(n);
  grid = sanitize_grid(std::move(grid), n);

  CpaResult result;
  result.grid = grid;
  result.ranks.resize(static_cast<Eigen::Index>(grid.size()), 16);
  result.true_rho_at.resize(static_cast<Eigen::Index>(grid.size()), 16);

  const Eigen::MatrixXd& w = hw_by_guess();
  const Eigen::MatrixXd w2 = w.cwiseProduct(w);

  std::array<Eigen::MatrixXd, 16> class_sums;
  std::array<Eigen::VectorXd, 16> class_counts;
  for (auto& cs : class_sums) cs = Eigen::MatrixXd::Zero(256, m);
  for (auto& cc : class_counts) cc = Eigen::VectorXd::Zero(256);
  Eigen::VectorXd sx = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sxx = Eigen::VectorXd::Zero(m);

  std::size_t next_checkpoint = 0;
  Eigen::VectorXd xrow(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    xrow = set.samples.row(row).cast<double>().transpose();
    sx += xrow;
    sxx.array() += xrow.array().square();
    for (int b = 0; b < 16; ++b) {
      const auto v = static_cast<Eigen::Index>(set.plaintexts(row, b));
      class_sums[static_cast<std::size_t>(b)].row(v) += xrow.transpose();
      class_counts[static_cast<std::size_t>(b)][v] += 1.0;
    }

    if (next_checkpoint < grid.size() && i + 1 == grid[next_checkpoint]) {
      const double cnt = static_cast<double>(i + 1);
      const bool final_checkpoint = next_checkpoint + 1 == grid.size();
      if (final_checkpoint) result.zero_variance_samples = 0;
      const Eigen::ArrayXd var_x = (cnt * sxx.array() - sx.array().square()).max(0.0);
      for (int b = 0; b < 16; ++b) {
        const auto bu = static_cast<std::size_t>(b);
        const Eigen::MatrixXd s_hx = w * class_sums[bu];        // 256 x m
        const Eigen::VectorXd sh = w * class_counts[bu];        // 256
        const Eigen::VectorXd sh2 = w2 * class_counts[bu];      // 256
        const Eigen::ArrayXd var_h = (cnt * sh2.array() - sh.array().square()).max(0.0);

        const std::uint8_t true_k = set.key[bu];
        double true_peak = 0.0;
        std::array<double, 256> peaks{};
        Eigen::Index true_arg = 0;
        for (int k = 0; k < 256; ++k) {
          const double vh = var_h[k];
          double peak = 0.0;
          Eigen::Index arg = 0;
          if (vh > 0.0) {
            for (Eigen::Index j = 0; j < m; ++j) {
              const double d = vh * var_x[j];
              const double c =
                  d > 0.0 ? std::abs(cnt * s_hx(k, j) - sh[k] * sx[j]) / std::sqrt(d) : 0.0;
              if (c > peak) {
                peak = c;
                arg = j;
              }
            }
          }
          peaks[static_cast<std::size_t>(k)] = peak;
          if (k == true_k) {
            true_peak = peak;
            true_arg = arg;
          }
        }
        int rank = 1;
        for (int k = 0; k < 256; ++k) {
          if (k != true_k && peaks[static_cast<std::size_t>(k)] > true_peak) ++rank;
        }
        result.ranks(static_cast<Eigen::Index>(next_checkpoint), b) = rank;
        result.true_rho_at(static_cast<Eigen::Index>(next_checkpoint), b) = true_peak;
        if (final_checkpoint) {
          result.final_peak[bu] = peaks;
          result.true_rho[bu] = true_peak;
          result.true_peak_sample[bu] = true_arg;
          result.final_rank[bu] = rank;
          if (b == 0) {
            for (Eigen::Index j = 0; j < m; ++j) {
              if (var_x[j] <= 0.0) ++result.zero_variance_samples;
            }
          }
        }
      }
      ++next_checkpoint;
    }
  }
  return result;
}

std::optional<std::size_t> traces_to_disclosure(const CpaResult& result) {
  for (std::size_t g = 0; g < result.grid.size(); ++g) {
    bool all_first = true;
    for (int b = 0; b < 16; ++b) {
      if (result.ranks(static_cast<Eigen::Index>(g), b) != 1) {
        all_first = false;
        break;
      }
    }
    if (all_first) return result.grid[g];
  }
  return std::nullopt;
}

BootstrapRho bootstrap_rho(const TraceSet& set, int byte_index, int n_boot,
                           std::uint64_t seed, Eigen::Index window) {
  set.validate();
  check_byte_index(byte_index);
  if (n_boot < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  const Eigen::Index n = set.samples.rows();
  const Eigen::Index m = set.samples.cols();
  if (n < 2) throw ValidationError("bootstrap needs at least 2 traces");

  const Eigen::VectorXd base =
      cpa_correlation(set, byte_index, set.key[static_cast<std::size_t>(byte_index)]);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(base[a]) > std::abs(base[b]);
  });
  const Eigen::Index w = std::min(window, m);
  std::vector<Eigen::Index> win(order.begin(), order.begin() + w);
  std::sort(win.begin(), win.end());

  Eigen::MatrixXd xw(n, w);
  for (Eigen::Index j = 0; j < w; ++j) {
    xw.col(j) = set.samples.col(win[static_cast<std::size_t>(j)]).cast<double>();
  }
  const Eigen::MatrixXd xw2 = xw.cwiseProduct(xw);
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] = hw(kSbox[static_cast<std::size_t>(
        set.plaintexts(i, byte_index) ^ set.key[static_cast<std::size_t>(byte_index)])]);
  }
  const Eigen::VectorXd h2 = h.cwiseProduct(h);

  BootstrapRho out;
  out.rho = base.cwiseAbs().maxCoeff();
  out.samples.reserve(static_cast<std::size_t>(n_boot));

  Rng rng(seed);
  Eigen::VectorXd weights(n);
  const double cnt = static_cast<double>(n);
  for (int b = 0; b < n_boot; ++b) {
    weights.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      weights[static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)))] += 1.0;
    }
    const double sh = weights.dot(h);
    const double sh2 = weights.dot(h2);
    const double var_h = std::max(0.0, cnt * sh2 - sh * sh);
    const Eigen::VectorXd sxv = xw.transpose() * weights;
    const Eigen::VectorXd sxx = xw2.transpose() * weights;
    const Eigen::VectorXd shx = xw.transpose() * weights.cwiseProduct(h);
    double peak = 0.0;
    for (Eigen::Index j = 0; j < w; ++j) {
      const double var_x = std::max(0.0, cnt * sxx[j] - sxv[j] * sxv[j]);
      const double d = var_h * var_x;
      if (d > 0.0) {
        peak = std::max(peak, std::abs(cnt * shx[j] - sh * sxv[j]) / std::sqrt(d));
      }
    }
    out.samples.push_back(peak);
  }

  std::vector<double> sorted = out.samples;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  out.ci_lo = quantile(0.025);
  out.ci_hi = quantile(0.975);
  return out;
}

namespace {

std::vector<Eigen::Index> pick_poi(const Eigen::VectorXd& score, int n_poi,
                                   Eigen::Index min_spacing) {
  if (n_poi < 1) throw ValidationError("need at least one point of interest");
  if (min_spacing < 1) throw ValidationError("poi spacing must be at least 1");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(score.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return score[a] > score[b]; });
  std::vector<Eigen::Index> poi;
  for (Eigen::Index j : order) {
    bool ok = true;
    for (Eigen::Index p : poi) {
      if (std::abs(p - j) < min_spacing) {
        ok = false;
        break;
      }
    }
    if (ok) poi.push_back(j);
    if (static_cast<int>(poi.size()) == n_poi) break;
  }
  std::sort(poi.begin(), poi.end());
  return poi;
}

TemplateModel fit_templates(const TraceMatrix& samples, const std::vector<int>& labels,
                            int n_poi, Eigen::Index min_spacing) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index m = samples.cols();
  if (n < 2) throw ValidationError("template fitting needs at least 2 traces");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ValidationError("one label per trace required");
  }
  for (int l : labels) {
    if (l < 0 || l > 255) throw ValidationError("labels must be byte values");
  }
  n_poi = std::min<int>(n_poi, static_cast<int>(m));

  Eigen::MatrixXd class_sum = Eigen::MatrixXd::Zero(256, m);
  Eigen::VectorXd class_cnt = Eigen::VectorXd::Zero(256);
  for (Eigen::Index i = 0; i < n; ++i) {
    class_sum.row(labels[static_cast<std::size_t>(i)]) +=
        samples.row(i).cast<double>();
    class_cnt[labels[static_cast<std::size_t>(i)]] += 1.0;
  }
  const Eigen::RowVectorXd global_mean = class_sum.colwise().sum() / static_cast<double>(n);
  Eigen::MatrixXd means(256, m);
  int n_classes = 0;
  for (int k = 0; k < 256; ++k) {
    if (class_cnt[k] > 0.0) {
      means.row(k) = class_sum.row(k) / class_cnt[k];
      ++n_classes;
    } else {
      means.row(k) = global_mean;
    }
  }

  // Between-class variance of the per-class means, weighted by class size.
  Eigen::VectorXd score = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < 256; ++k) {
    if (class_cnt[k] > 0.0) {
      score += class_cnt[k] *
               (means.row(k) - global_mean).array().square().matrix().transpose();
    }
  }

  TemplateModel model;
  model.poi = pick_poi(score, n_poi, min_spacing);
  const auto p = static_cast<Eigen::Index>(model.poi.size());

  model.means.resize(256, p);
  for (Eigen::Index j = 0; j < p; ++j) model.means.col(j) = means.col(model.poi[static_cast<std::size_t>(j)]);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd resid(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) {
      resid[j] = static_cast<double>(samples(i, model.poi[static_cast<std::size_t>(j)])) -
                 model.means(l, j);
    }
    cov.noalias() += resid * resid.transpose();
  }
  const double dof = std::max(1.0, static_cast<double>(n - n_classes));
  cov /= dof;
  const double ridge = 1e-6 * cov.diagonal().mean();
  cov.diagonal().array() += ridge > 0.0 ? ridge : 1e-12;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("pooled covariance is not factorizable");
  }
  model.proj = ldlt.solve(model.means.transpose()).transpose();
  model.quad = (model.proj.cwiseProduct(model.means)).rowwise().sum();
  return model;
}

double midrank_of_true(const Eigen::VectorXd& ll, int true_class) {
  const double lt = ll[true_class];
  int greater = 0;
  int tied = 0;
  for (int k = 0; k < 256; ++k) {
    if (k == true_class) continue;
    if (ll[k] > lt) {
      ++greater;
    } else if (ll[k] == lt) {
      ++tied;
    }
  }
  return 1.0 + static_cast<double>(greater) + static_cast<double>(tied) / 2.0;
}

void check_scores_finite(const Eigen::MatrixXd& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (!scores.row(i).allFinite()) {
      throw NumericalError("non-finite likelihood at trace " + std::to_string(i));
    }
  }
}

GeCurve ge_over_scores(const Eigen::MatrixXd& scores,
                       const std::vector<int>& hypothesis_class_by_guess_stride,
                       int true_class, const std::vector<std::size_t>& grid_in, int reps,
                       std::uint64_t seed) {
  // hypothesis_class_by_guess_stride: for trace i and guess g the scored
  // class is entry [i * 256 + g]; empty means the guess is the class.
  const auto n = static_cast<std::size_t>(scores.rows());
  if (reps < 1) throw ValidationError("need at least one repetition");
  check_scores_finite(scores);
  std::vector<std::size_t> grid = sanitize_grid(grid_in, n);

  GeCurve curve;
  curve.grid = grid;
  curve.ge.assign(grid.size(), 0.0);

  const std::size_t max_n = grid.back();
  std::vector<std::size_t> idx(n);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_n && i + 1 < n; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    Eigen::VectorXd ll = Eigen::VectorXd::Zero(256);
    std::size_t g = 0;
    for (std::size_t used = 1; used <= max_n; ++used) {
      const auto row = static_cast<Eigen::Index>(idx[used - 1]);
      if (hypothesis_class_by_guess_stride.empty()) {
        ll += scores.row(row).transpose();
      } else {
        const std::size_t base = idx[used - 1] * 256;
        for (int guess = 0; guess < 256; ++guess) {
          ll[guess] += scores(row, hypothesis_class_by_guess_stride[base + static_cast<std::size_t>(guess)]);
        }
      }
      if (g < grid.size() && used == grid[g]) {
        curve.ge[g] += midrank_of_true(ll, true_class);
        ++g;
      }
    }
  }
  for (double& v : curve.ge) v /= static_cast<double>(reps);
  return curve;
}

}  // namespace

TemplateModel build_templates(const TraceSet& profiling, int byte_index, int n_poi,
                              Eigen::Index min_spacing) {
  profiling.validate();
  check_byte_index(byte_index);
  const Eigen::Index n = profiling.samples.rows();
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = kSbox[static_cast<std::size_t>(
        profiling.plaintexts(i, byte_index) ^
        profiling.key[static_cast<std::size_t>(byte_index)])];
  }
  TemplateModel model = fit_templates(profiling.samples, labels, n_poi, min_spacing);
  model.byte_index = byte_index;
  return model;
}

TemplateModel build_templates_labeled(const TraceMatrix& samples,
                                      const std::vector<int>& labels, int n_poi,
                                      Eigen::Index min_spacing) {
  return fit_templates(samples, labels, n_poi, min_spacing);
}

std::vector<std::size_t> default_ta_grid(std::size_t budget) {
  if (budget == 0) throw ValidationError("trace budget must be positive");
  std::vector<std::size_t> grid;
  for (std::size_t g : {std::size_t{1}, std::size_t{2}, std::size_t{5}, std::size_t{10},
                        std::size_t{20}, std::size_t{50}, std::size_t{100}}) {
    if (g <= budget) grid.push_back(g);
  }
  if (grid.empty()) grid.push_back(budget);
  return grid;
}

GeCurve template_attack(const TraceSet& attack, const TemplateModel& tmpl,
                        const std::vector<std::size_t>& grid, int reps,
                        std::uint64_t seed) {
  attack.validate();
  const Eigen::Index n = attack.samples.rows();
  const auto p = static_cast<Eigen::Index>(tmpl.poi.size());
  for (Eigen::Index j : tmpl.poi) {
    if (j < 0 || j >= attack.samples.cols()) {
      throw ValidationError("template points of interest fall outside the trace");
    }
  }

  Eigen::MatrixXd xp(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    xp.col(j) = attack.samples.col(tmpl.poi[static_cast<std::size_t>(j)]).cast<double>();
  }
  // scores(i, k): log-likelihood of class k for trace i, up to a shared term.
  Eigen::MatrixXd scores = xp * tmpl.proj.transpose();
  scores.rowwise() -= 0.5 * tmpl.quad.transpose();

  std::vector<int> class_of(static_cast<std::size_t>(n) * 256);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t pt = attack.plaintexts(i, tmpl.byte_index);
    for (int g = 0; g < 256; ++g) {
      class_of[static_cast<std::size_t>(i) * 256 + static_cast<std::size_t>(g)] =
          kSbox[static_cast<std::size_t>(pt ^ g)];
    }
  }
  const int true_byte = attack.key[static_cast<std::size_t>(tmpl.byte_index)];
  return ge_over_scores(scores, class_of, true_byte, grid, reps, seed);
}

GeCurve ranked_ge(const Eigen::MatrixXd& scores, int true_class,
                  const std::vector<std::size_t>& grid, int reps, std::uint64_t seed) {
  if (scores.cols() != 256) throw ValidationError("scores must have 256 class columns");
  if (true_class < 0 || true_class > 255) throw ValidationError("true class must be a byte");
  return ge_over_scores(scores, {}, true_class, grid, reps, seed);
}

}  // namespace desync
