// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/mmcm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>

namespace desync {

namespace {

// The whole solver runs on integers: frequencies in eighths of a MHz and the
// multiplier/output dividers in eighths (a = 8m, b = 8o). realized - target
// then compares exactly as |fin8*a - F*d*b| / (8*d*b).
struct Candidate {
  std::int64_t err_num = 0;  // |fin8*a - F*d*b|
  std::int64_t a = 0;
  std::int64_t d = 0;
  std::int64_t b = 0;

  std::int64_t err_den() const { return 8 * d * b; }

  // Lexicographic: smaller error, higher VCO (a/d), smaller d, smaller o.
  bool better_than(const Candidate& other) const {
    const std::int64_t lhs = err_num * other.d * other.b;
    const std::int64_t rhs = other.err_num * d * b;
    if (lhs != rhs) return lhs < rhs;
    const std::int64_t vco_l = a * other.d;
    const std::int64_t vco_r = other.a * d;
    if (vco_l != vco_r) return vco_l > vco_r;
    if (d != other.d) return d < other.d;
    return b < other.b;
  }
};

std::int64_t to_eighths(double mhz, const char* what) {
  const double steps = mhz * 8.0;
  const std::int64_t rounded = std::llround(steps);
  if (std::abs(steps - static_cast<double>(rounded)) > 1e-6) {
    std::ostringstream msg;
    msg << what << " " << mhz << " MHz is not a multiple of 0.125 MHz";
    throw ValidationError(msg.str());
  }
  return rounded;
}

MmcmConfig from_integers(std::int64_t a, std::int64_t d, std::int64_t b) {
  MmcmConfig cfg;
  cfg.m = static_cast<double>(a) / 8.0;
  cfg.d = static_cast<int>(d);
  cfg.o_int = static_cast<int>(b / 8);
  cfg.o_frac = static_cast<int>(b % 8);
  cfg.o_frac_en = cfg.o_frac != 0;
  return cfg;
}

void check_f_in(double f_in_mhz) {
  if (!(f_in_mhz >= 1.0 && f_in_mhz <= 800.0)) {
    std::ostringstream msg;
    msg << "input clock " << f_in_mhz << " MHz outside [1, 800]";
    throw ValidationError(msg.str());
  }
  to_eighths(f_in_mhz, "input clock");
}

}  // namespace

double solve_tolerance_mhz() { return 0.0625; }

void validate_mmcm(const MmcmConfig& cfg, const MmcmLimits& limits) {
  std::ostringstream msg;
  const double m_steps = cfg.m * 8.0;
  if (std::abs(m_steps - std::llround(m_steps)) > 1e-6) {
    msg << "multiplier " << cfg.m << " is not a multiple of 0.125";
    throw ValidationError(msg.str());
  }
  if (cfg.m < limits.m_min - 1e-9 || cfg.m > limits.m_max + 1e-9) {
    msg << "multiplier " << cfg.m << " outside [" << limits.m_min << ", " << limits.m_max << "]";
    throw ValidationError(msg.str());
  }
  if (cfg.d < 1 || cfg.d > limits.d_max) {
    msg << "divider d=" << cfg.d << " outside [1, " << limits.d_max << "]";
    throw ValidationError(msg.str());
  }
  if (cfg.o_int < 1 || cfg.o_int > limits.o_int_max) {
    msg << "output divider o_int=" << cfg.o_int << " outside [1, " << limits.o_int_max << "]";
    throw ValidationError(msg.str());
  }
  if (cfg.o_frac < 0 || cfg.o_frac > 7) {
    msg << "o_frac=" << cfg.o_frac << " outside [0, 7]";
    throw ValidationError(msg.str());
  }
  if (!cfg.o_frac_en && cfg.o_frac != 0) {
    throw ValidationError("o_frac must be 0 when fractional output division is disabled");
  }
  if (cfg.o_frac_en && cfg.o_frac == 0) {
    throw ValidationError("o_frac_en set but o_frac is 0");
  }
}

void validate_mmcm(const MmcmConfig& cfg, double f_in_mhz, const MmcmLimits& limits) {
  validate_mmcm(cfg, limits);
  check_f_in(f_in_mhz);
  const double vco = mmcm_vco_mhz(cfg, f_in_mhz);
  if (vco < limits.vco_min_mhz - 1e-9 || vco > limits.vco_max_mhz + 1e-9) {
    std::ostringstream msg;
    msg << "VCO " << vco << " MHz outside [" << limits.vco_min_mhz << ", "
        << limits.vco_max_mhz << "]";
    throw ValidationError(msg.str());
  }
}

double mmcm_vco_mhz(const MmcmConfig& cfg, double f_in_mhz) {
  return f_in_mhz * cfg.m / static_cast<double>(cfg.d);
}

double mmcm_output_frequency(const MmcmConfig& cfg, double f_in_mhz, const MmcmLimits& limits) {
  // Field-level checks only: the divider quotient is well-defined whether or
  // not the VCO band is honored, and callers probing hypothetical configs
  // (error reporting, table exports) need the plain arithmetic.
  validate_mmcm(cfg, limits);
  check_f_in(f_in_mhz);
  const double o = static_cast<double>(cfg.o_int) + static_cast<double>(cfg.o_frac) / 8.0;
  return f_in_mhz * cfg.m / (static_cast<double>(cfg.d) * o);
}

MmcmConfig solve_mmcm(double f_target_mhz, double f_in_mhz, const MmcmLimits& limits) {
  check_f_in(f_in_mhz);
  if (!(f_target_mhz >= 5.0 && f_target_mhz <= 800.0)) {
    std::ostringstream msg;
    msg << "target " << f_target_mhz << " MHz outside [5, 800]";
    throw ValidationError(msg.str());
  }
  const std::int64_t F = to_eighths(f_target_mhz, "target");
  const std::int64_t fin8 = to_eighths(f_in_mhz, "input clock");

  const std::int64_t a_min = std::llround(limits.m_min * 8.0);
  const std::int64_t a_max = std::llround(limits.m_max * 8.0);
  const std::int64_t b_max = 8LL * limits.o_int_max + 7;

  std::optional<Candidate> best;
  auto consider = [&](std::int64_t a, std::int64_t d, std::int64_t b) {
    b = std::clamp<std::int64_t>(b, 8, b_max);
    Candidate c{std::abs(fin8 * a - F * d * b), a, d, b};
    if (!best || c.better_than(*best)) best = c;
  };

  for (std::int64_t d = 1; d <= limits.d_max; ++d) {
    // VCO window: vco_min <= fin8*a / (64*d) <= vco_max.
    const double lo = limits.vco_min_mhz * 64.0 * static_cast<double>(d) / static_cast<double>(fin8);
    const double hi = limits.vco_max_mhz * 64.0 * static_cast<double>(d) / static_cast<double>(fin8);
    const std::int64_t a_lo = std::max(a_min, static_cast<std::int64_t>(std::ceil(lo - 1e-9)));
    const std::int64_t a_hi = std::min(a_max, static_cast<std::int64_t>(std::floor(hi + 1e-9)));
    if (a_lo > a_hi) {
      if (lo > static_cast<double>(a_max)) break;  // VCO window moved past the m cap
      continue;
    }
    for (std::int64_t a = a_lo; a <= a_hi; ++a) {
      // Error is monotone in |b - b_ideal| for fixed (a, d), so the two
      // integers bracketing the ideal output divider are exhaustive.
      const double b_ideal = static_cast<double>(fin8 * a) / static_cast<double>(d * F);
      const std::int64_t b_floor = static_cast<std::int64_t>(std::floor(b_ideal));
      consider(a, d, b_floor);
      consider(a, d, b_floor + 1);
    }
  }

  if (!best) {
    throw InfeasibleError("no legal divider triple for the requested clocks", 1e9);
  }
  // err <= 0.0625 MHz = 1/16 <=> 16*err_num <= 8*d*b <=> 2*err_num <= d*b.
  if (2 * best->err_num > best->d * best->b) {
    const double err = static_cast<double>(best->err_num) / static_cast<double>(best->err_den());
    std::ostringstream msg;
    msg << "no config within " << solve_tolerance_mhz() << " MHz of " << f_target_mhz
        << " MHz (best achievable error " << err << " MHz)";
    throw InfeasibleError(msg.str(), err);
  }
  return from_integers(best->a, best->d, best->b);
}

namespace {

ConfigTable build_from_eighths(const std::vector<std::int64_t>& freqs8, double f_in_mhz,
                               const MmcmLimits& limits) {
  if (freqs8.empty()) throw ValidationError("frequency table needs at least one entry");
  if (freqs8.size() > kMaxTableLines) {
    std::ostringstream msg;
    msg << "table would need " << freqs8.size() << " lines, cap is " << kMaxTableLines;
    throw ValidationError(msg.str());
  }

  ConfigTable table;
  table.f_in_mhz = f_in_mhz;
  table.nominal_mhz.reserve(freqs8.size());
  table.config_lines.reserve(freqs8.size());
  for (const std::int64_t f8 : freqs8) {
    const double f = static_cast<double>(f8) / 8.0;
    table.nominal_mhz.push_back(f);
    table.config_lines.push_back(solve_mmcm(f, f_in_mhz, limits));
  }

  // One record per integer MHz present. Lines inside a block must be evenly
  // spaced for base+shift indexing to be exact.
  std::size_t i = 0;
  while (i < freqs8.size()) {
    const std::int64_t n = freqs8[i] / 8;
    std::size_t j = i;
    while (j + 1 < freqs8.size() && freqs8[j + 1] / 8 == n) ++j;

    std::int64_t spacing8 = 0;
    for (std::size_t k = i; k < j; ++k) {
      const std::int64_t gap = freqs8[k + 1] - freqs8[k];
      if (spacing8 == 0) {
        spacing8 = gap;
      } else if (gap != spacing8) {
        std::ostringstream msg;
        msg << "frequencies within " << n << " MHz are unevenly spaced; "
            << "the two-level index cannot represent this block";
        throw ValidationError(msg.str());
      }
    }

    ConfigTable::IndexRecord rec;
    rec.int_mhz = static_cast<int>(n);
    rec.first_line = static_cast<int>(i);
    rec.last_line = static_cast<int>(j);
    rec.shift = spacing8 == 0 ? 0.0 : 1.0 / static_cast<double>(spacing8);
    const std::int64_t r_first = freqs8[i] % 8;
    rec.base = static_cast<double>(i) - rec.shift * static_cast<double>(r_first);
    table.index_records.push_back(rec);
    i = j + 1;
  }
  return table;
}

}  // namespace

ConfigTable build_config_table(double lo_mhz, double hi_mhz, double step_mhz,
                               double f_in_mhz, const MmcmLimits& limits) {
  const std::int64_t lo8 = to_eighths(lo_mhz, "table low bound");
  const std::int64_t hi8 = to_eighths(hi_mhz, "table high bound");
  const std::int64_t s8 = to_eighths(step_mhz, "table step");
  if (s8 <= 0) throw ValidationError("table step must be positive");
  if (lo8 > hi8) throw ValidationError("table low bound exceeds high bound");

  std::vector<std::int64_t> freqs8;
  for (std::int64_t f8 = lo8; f8 <= hi8; f8 += s8) freqs8.push_back(f8);
  return build_from_eighths(freqs8, f_in_mhz, limits);
}

ConfigTable build_config_table(const std::vector<double>& values_mhz, double f_in_mhz,
                               const MmcmLimits& limits) {
  std::vector<std::int64_t> freqs8;
  freqs8.reserve(values_mhz.size());
  for (const double v : values_mhz) freqs8.push_back(to_eighths(v, "table frequency"));
  std::sort(freqs8.begin(), freqs8.end());
  freqs8.erase(std::unique(freqs8.begin(), freqs8.end()), freqs8.end());
  return build_from_eighths(freqs8, f_in_mhz, limits);
}

std::optional<std::size_t> lookup_line(const ConfigTable& table, double f_mhz) {
  std::int64_t f8;
  try {
    f8 = to_eighths(f_mhz, "lookup frequency");
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  const std::int64_t n = f8 >= 0 ? f8 / 8 : -((-f8 + 7) / 8);
  const std::int64_t r = f8 - n * 8;

  const auto rec_it = std::find_if(table.index_records.begin(), table.index_records.end(),
                                   [&](const auto& rec) { return rec.int_mhz == n; });
  if (rec_it == table.index_records.end()) return std::nullopt;

  const double line_f = rec_it->base + rec_it->shift * static_cast<double>(r);
  const double rounded = std::round(line_f);
  if (std::abs(line_f - rounded) > 1e-9) return std::nullopt;
  const auto line = static_cast<std::int64_t>(rounded);
  if (line < rec_it->first_line || line > rec_it->last_line) return std::nullopt;
  if (std::llround(table.nominal_mhz[static_cast<std::size_t>(line)] * 8.0) != f8) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(line);
}

const MmcmConfig& lookup(const ConfigTable& table, double f_mhz) {
  const auto line = lookup_line(table, f_mhz);
  if (!line) {
    std::ostringstream msg;
    msg << "frequency " << f_mhz << " MHz is not in the table";
    throw NotFoundError(msg.str());
  }
  return table.config_lines[*line];
}

std::optional<std::size_t> lookup_scan(const ConfigTable& table, double f_mhz) {
  const double steps = f_mhz * 8.0;
  const std::int64_t f8 = std::llround(steps);
  if (std::abs(steps - static_cast<double>(f8)) > 1e-6) return std::nullopt;
  for (std::size_t i = 0; i < table.nominal_mhz.size(); ++i) {
    if (std::llround(table.nominal_mhz[i] * 8.0) == f8) return i;
  }
  return std::nullopt;
}

void write_table_csv(const ConfigTable& table, std::ostream& out) {
  out << "freq_mhz,m,d,o_int,o_frac,o_frac_en,realized_mhz\n";
  char line[160];
  for (std::size_t i = 0; i < table.size(); ++i) {
    const MmcmConfig& c = table.config_lines[i];
    const double realized = mmcm_output_frequency(c, table.f_in_mhz);
    std::snprintf(line, sizeof line, "%.3f,%.3f,%d,%d,%d,%d,%.6f\n", table.nominal_mhz[i],
                  c.m, c.d, c.o_int, c.o_frac, c.o_frac_en ? 1 : 0, realized);
    out << line;
  }
}

void write_table_mem(const ConfigTable& table, std::ostream& out) {
  out << "// desync-bench frequency table, one 64-bit word per line (hex)\n"
      << "// bits  0..9   multiplier in eighths (8*m)\n"
      << "// bits 10..16  divider d\n"
      << "// bits 17..24  o_int\n"
      << "// bits 25..27  o_frac (eighths)\n"
      << "// bit  28      o_frac_en\n"
      << "// bits 29..42  nominal frequency in eighths of a MHz\n";
  char line[24];
  for (std::size_t i = 0; i < table.size(); ++i) {
    const MmcmConfig& c = table.config_lines[i];
    const auto a = static_cast<std::uint64_t>(std::llround(c.m * 8.0));
    const auto f8 = static_cast<std::uint64_t>(std::llround(table.nominal_mhz[i] * 8.0));
    std::uint64_t word = a & 0x3ffULL;
    word |= (static_cast<std::uint64_t>(c.d) & 0x7fULL) << 10;
    word |= (static_cast<std::uint64_t>(c.o_int) & 0xffULL) << 17;
    word |= (static_cast<std::uint64_t>(c.o_frac) & 0x7ULL) << 25;
    word |= (c.o_frac_en ? 1ULL : 0ULL) << 28;
    word |= (f8 & 0x3fffULL) << 29;
    std::snprintf(line, sizeof line, "%016llx\n", static_cast<unsigned long long>(word));
    out << line;
  }
}

}  // namespace desync
