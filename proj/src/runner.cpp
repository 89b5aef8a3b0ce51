// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "desync/dsp.hpp"
#include "desync/trace_io.hpp"

namespace desync {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kAttackSetStream = 1;
constexpr std::uint64_t kProfilingSetStream = 2;

std::string format_double(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

// One (raw|hpf, agg) cell needs a stable stream id so that dropping other
// cells from the plan never changes this one's sampling.
std::uint64_t cell_stream(bool hpf, Eigen::Index agg) {
  return (hpf ? 0x8000000000000000ULL : 0) ^ static_cast<std::uint64_t>(agg);
}

struct CellSets {
  TraceSet attack;
  TraceSet profiling;
};

}  // namespace

void ExperimentPlan::validate() const {
  scenario.validate();
  if (n_attack_traces < 2) throw ValidationError("plan needs at least 2 attack traces");
  if (n_profiling_per_class < 1) {
    throw ValidationError("plan needs at least 1 profiling trace per class");
  }
  if (ge_reps < 1) throw ValidationError("plan needs at least 1 attack repetition");
  if (template_byte < 0 || template_byte >= 16) {
    throw ValidationError("template byte must be in [0, 16)");
  }
  if (!post.include_raw && !post.include_hpf) {
    throw ValidationError("plan must include at least one of raw and high-passed");
  }
  if (post.agg_levels.empty()) throw ValidationError("plan needs an aggregation level");
  for (Eigen::Index a : post.agg_levels) {
    if (a < 1) throw ValidationError("aggregation levels must be at least 1");
  }
}

std::vector<ReportRow> run_plan(const ExperimentPlan& plan) {
  plan.validate();

  std::vector<ReportRow> rows;
  for (Eigen::Index agg : plan.post.agg_levels) {
    ReportRow row;
    row.scenario_id = plan.scenario.id;
    row.agg = agg;
    rows.push_back(row);
  }

  fs::path dir;
  if (!plan.out_dir.empty()) {
    dir = fs::path(plan.out_dir) / plan.scenario.id;
    fs::create_directories(dir);
  }

  TraceSet attack_raw;
  TraceSet prof_raw;
  try {
    const ConfigTable table =
        build_config_table(plan.scenario.frequency_values, plan.sim.f_in_mhz, plan.sim.limits);
    attack_raw = synthesize_set(plan.scenario, plan.key, plan.n_attack_traces,
                                derive_seed(plan.synthesis_seed, kAttackSetStream), table,
                                plan.model, plan.sim);
    prof_raw = synthesize_profiling_set(plan.scenario, plan.key,
                                        plan.n_profiling_per_class * 256,
                                        derive_seed(plan.synthesis_seed, kProfilingSetStream),
                                        table, plan.model, plan.sim);
    if (!dir.empty()) {
      save_trace_set(attack_raw, (dir / "attack_raw.dsb1").string());
      save_trace_set(prof_raw, (dir / "profiling_raw.dsb1").string());
    }
  } catch (const std::exception& e) {
    for (ReportRow& row : rows) row.error = e.what();
    return rows;
  }

  TraceSet attack_hpf;
  TraceSet prof_hpf;
  bool hpf_ready = false;
  std::string hpf_error;
  if (plan.post.include_hpf) {
    try {
      attack_hpf = high_pass(attack_raw, plan.post.hpf_cutoff_hz);
      prof_hpf = high_pass(prof_raw, plan.post.hpf_cutoff_hz);
      hpf_ready = true;
    } catch (const std::exception& e) {
      hpf_error = e.what();
    }
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    ReportRow& row = rows[r];
    const Eigen::Index agg = row.agg;
    try {
      auto run_cell = [&](const TraceSet& att_src, const TraceSet& prof_src, bool hpf,
                          double& rho, std::optional<std::size_t>& cpa_out, double& ge,
                          bool& ok) {
        const TraceSet att = aggregate_set(att_src, agg);
        const TraceSet prof = aggregate_set(prof_src, agg);
        if (!dir.empty()) {
          char name[64];
          std::snprintf(name, sizeof name, "attack_%s_agg%lld.dsb1", hpf ? "hpf" : "raw",
                        static_cast<long long>(agg));
          save_trace_set(att, (dir / name).string());
        }
        rho = rho_metric(att, plan.template_byte);
        const CpaResult cpa = cpa_attack(att);
        cpa_out = traces_to_disclosure(cpa);

        const TemplateModel tmpl = build_templates(prof, plan.template_byte);
        const auto ta_budget = std::min<std::size_t>(100, plan.n_attack_traces);
        const GeCurve curve =
            template_attack(att, tmpl, default_ta_grid(ta_budget), plan.ge_reps,
                            derive_seed(plan.attack_seed, cell_stream(hpf, agg)));
        ge = curve.ge.back();
        ok = ge == 1.0;
      };

      if (plan.post.include_raw) {
        run_cell(attack_raw, prof_raw, false, row.rho_raw, row.cpa_raw, row.ta_raw_ge,
                 row.ta_raw_ok);
      }
      if (plan.post.include_hpf) {
        if (!hpf_ready) throw NumericalError(hpf_error);
        run_cell(attack_hpf, prof_hpf, true, row.rho_hpf, row.cpa_hpf, row.ta_hpf_ge,
                 row.ta_hpf_ok);
      }
    } catch (const std::exception& e) {
      row = ReportRow{};
      row.scenario_id = plan.scenario.id;
      row.agg = agg;
      row.error = e.what();
    }
  }

  if (!dir.empty()) {
    try {
      const Eigen::VectorXd curve_raw = cpa_correlation(
          attack_raw, plan.template_byte,
          plan.key[static_cast<std::size_t>(plan.template_byte)]);
      std::ostringstream curves;
      curves << "sample,corr_raw";
      Eigen::VectorXd curve_hpf;
      if (hpf_ready) {
        curve_hpf = cpa_correlation(attack_hpf, plan.template_byte,
                                    plan.key[static_cast<std::size_t>(plan.template_byte)]);
        curves << ",corr_hpf";
      }
      curves << "\n";
      for (Eigen::Index j = 0; j < curve_raw.size(); ++j) {
        curves << j << "," << format_double(curve_raw[j], 6);
        if (hpf_ready) curves << "," << format_double(curve_hpf[j], 6);
        curves << "\n";
      }
      write_text_file(dir / "correlation_curve.csv", curves.str());
    } catch (const std::exception&) {
      // curves are a plotting convenience; never fail the run over them
    }
  }
  return rows;
}

std::vector<std::pair<std::string, std::vector<Eigen::Index>>> suite_rows() {
  const std::vector<Eigen::Index> full = {1, 100, 1000};
  const std::vector<Eigen::Index> raw_only = {1};
  return {
      {"synch", full},   {"c1", raw_only}, {"c2", raw_only}, {"v1", raw_only},
      {"v2", raw_only},  {"v3", raw_only}, {"p1", full},     {"f1", full},
      {"f2", full},      {"f3", full},     {"f3_125", full},
  };
}

namespace {

std::size_t estimate_plan_bytes(const ExperimentPlan& plan) {
  const double f_min = *std::min_element(plan.scenario.frequency_values.begin(),
                                         plan.scenario.frequency_values.end());
  const auto m = static_cast<std::size_t>(trace_length(plan.model, f_min));
  const std::size_t n_prof = plan.n_profiling_per_class * 256;
  std::size_t total = dsb1_file_size(plan.n_attack_traces, m) + dsb1_file_size(n_prof, m);
  const int forms = (plan.post.include_raw ? 1 : 0) + (plan.post.include_hpf ? 1 : 0);
  for (Eigen::Index agg : plan.post.agg_levels) {
    const auto ma = static_cast<std::size_t>(
        (m + static_cast<std::size_t>(agg) - 1) / static_cast<std::size_t>(agg));
    total += static_cast<std::size_t>(forms) * dsb1_file_size(plan.n_attack_traces, ma);
  }
  return total;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentPlan make_suite_plan(const SuiteConfig& cfg, const std::string& id,
                               const std::vector<Eigen::Index>& agg_levels) {
  ExperimentPlan plan;
  plan.scenario = table1_scenario(id);
  plan.n_attack_traces =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(100000.0 * cfg.scale)));
  plan.n_profiling_per_class =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1000.0 * cfg.scale)));
  plan.post.agg_levels = agg_levels;
  plan.synthesis_seed = derive_seed(cfg.seed, fnv1a64(id));
  plan.attack_seed = derive_seed(plan.synthesis_seed, 0xa77ac4);
  plan.ge_reps = cfg.ge_reps;
  plan.out_dir = cfg.out_dir;
  plan.model = cfg.model;
  plan.sim = cfg.sim;
  return plan;
}

}  // namespace

SuiteReport run_table1_suite(const SuiteConfig& cfg) {
  if (!(cfg.scale > 0.0) || cfg.scale > 1.0) {
    throw ValidationError("scale must be in (0, 1]");
  }

  const auto rows_spec = suite_rows();
  std::vector<ExperimentPlan> plans;
  for (const auto& [id, aggs] : rows_spec) plans.push_back(make_suite_plan(cfg, id, aggs));

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::size_t needed = 0;
    for (const ExperimentPlan& plan : plans) needed += estimate_plan_bytes(plan);
    const auto space = fs::space(cfg.out_dir);
    if (space.available < needed + (needed / 10)) {
      throw IoError("insufficient disk space: need about " +
                    std::to_string(needed / (1024 * 1024)) + " MiB, have " +
                    std::to_string(space.available / (1024 * 1024)) + " MiB");
    }
  }

  SuiteReport report;
  report.noise_sigma = cfg.model.noise_sigma;
  for (const ExperimentPlan& plan : plans) {
    const std::vector<ReportRow> rows = run_plan(plan);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }

  if (!cfg.out_dir.empty()) {
    write_text_file(fs::path(cfg.out_dir) / "report.csv", render_report_csv(report));
    write_text_file(fs::path(cfg.out_dir) / "report.txt", render_report_txt(report));
  }
  return report;
}

namespace {

std::string cpa_cell(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "x";
}

std::string ta_cell(bool ok) { return ok ? "ok" : "x"; }

// Right-align by code points, not bytes, so the multibyte glyph cells line up.
std::string pad_cell(const std::string& s, std::size_t width) {
  std::size_t glyphs = 0;
  for (unsigned char c : s) glyphs += (c & 0xC0) != 0x80;
  if (glyphs >= width) return s;
  return std::string(width - glyphs, ' ') + s;
}

}  // namespace

std::string render_report_csv(const SuiteReport& report) {
  std::ostringstream out;
  out << "# noise_sigma=" << format_double(report.noise_sigma, 6) << "\n";
  out << "scenario,agg,rho_raw,rho_hpf,cpa_raw,cpa_hpf,ta_raw,ta_hpf,error\n";
  for (const ReportRow& row : report.rows) {
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << row.scenario_id << "," << row.agg << ",";
    if (row.error.empty()) {
      out << format_double(row.rho_raw) << "," << format_double(row.rho_hpf) << ","
          << cpa_cell(row.cpa_raw) << "," << cpa_cell(row.cpa_hpf) << ","
          << ta_cell(row.ta_raw_ok) << "," << ta_cell(row.ta_hpf_ok) << ",";
    } else {
      out << ",,,,,,";
    }
    out << error << "\n";
  }
  return out.str();
}

std::string render_report_txt(const SuiteReport& report) {
  std::ostringstream out;
  out << "noise sigma: " << format_double(report.noise_sigma, 6) << "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %5s %9s %9s %9s %9s %7s %7s\n", "scenario",
                "agg", "rho_raw", "rho_hpf", "cpa_raw", "cpa_hpf", "ta_raw", "ta_hpf");
  out << line;
  out << std::string(72, '-') << "\n";
  for (const ReportRow& row : report.rows) {
    if (!row.error.empty()) {
      std::snprintf(line, sizeof line, "%-10s %5lld  error: %s\n", row.scenario_id.c_str(),
                    static_cast<long long>(row.agg), row.error.c_str());
      out << line;
      continue;
    }
    std::snprintf(line, sizeof line, "%-10s %5lld", row.scenario_id.c_str(),
                  static_cast<long long>(row.agg));
    out << line << pad_cell(format_double(row.rho_raw), 10)
        << pad_cell(format_double(row.rho_hpf), 10)
        << pad_cell(row.cpa_raw ? std::to_string(*row.cpa_raw) : "✗", 10)
        << pad_cell(row.cpa_hpf ? std::to_string(*row.cpa_hpf) : "✗", 10)
        << pad_cell(row.ta_raw_ok ? "✓" : "✗", 8)
        << pad_cell(row.ta_hpf_ok ? "✓" : "✗", 8) << "\n";
  }
  return out.str();
}

CalibrationResult calibrate_noise_sigma(std::uint64_t seed, const LeakageModel& start,
                                        const SimConfig& sim) {
  const ScenarioSpec synch = table1_scenario("synch");
  const ConfigTable table =
      build_config_table(synch.frequency_values, sim.f_in_mhz, sim.limits);
  const KeyBytes key = ExperimentPlan{}.key;
  constexpr std::size_t kTraces = 1200;
  constexpr double kTargetRho = 0.42;

  LeakageModel model = start;
  CalibrationResult result;
  for (int iter = 1; iter <= 10; ++iter) {
    result.iterations = iter;
    result.sigma = model.noise_sigma;
    const TraceSet set = synthesize_set(synch, key, kTraces, seed, table, model, sim);
    result.rho_raw = rho_metric(set, 0);

    if (result.rho_raw >= 0.3 && result.rho_raw <= 0.6) {
      const CpaResult cpa = cpa_attack(set);
      const auto disclosure = traces_to_disclosure(cpa);
      if (disclosure && *disclosure <= 200) {
        result.disclosure = *disclosure;
        return result;
      }
      model.noise_sigma *= 0.85;
      continue;
    }
    // Solve sigma for the target correlation: with signal variance fixed,
    // 1/rho^2 - 1 scales as sigma^2.
    const double rho = std::clamp(result.rho_raw, 1e-3, 0.999);
    const double ratio = (1.0 / (kTargetRho * kTargetRho) - 1.0) /
                         (1.0 / (rho * rho) - 1.0);
    model.noise_sigma *= std::sqrt(std::max(ratio, 1e-6));
  }
  throw NumericalError("noise calibration did not converge");
}

}  // namespace desync
