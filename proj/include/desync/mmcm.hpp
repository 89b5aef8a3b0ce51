// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#pragma once

#include "desync/types.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace desync {

// Divider plan of one clock-management tile: f_out = f_in * m / (d * o)
// with o = o_int + o_frac/8. m carries 0.125 granularity, d is integral,
// and the VCO (f_in * m / d) must sit inside the tile's legal band.
struct MmcmConfig {
  double m = 10.0;     // [2.0, 64.0], multiple of 0.125
  int d = 1;           // [1, 106]
  int o_int = 10;      // [1, 128]
  int o_frac = 0;      // [0, 7] eighths, 0 unless o_frac_en
  bool o_frac_en = false;

  bool operator==(const MmcmConfig&) const = default;
};

struct MmcmLimits {
  double vco_min_mhz = 600.0;
  double vco_max_mhz = 1200.0;
  double m_min = 2.0;
  double m_max = 64.0;
  int d_max = 106;
  int o_int_max = 128;
};

// Throws ValidationError when granularity, ranges, or the o_frac_en/o_frac
// coupling are violated; VCO legality additionally needs f_in.
void validate_mmcm(const MmcmConfig& cfg, const MmcmLimits& limits = {});
void validate_mmcm(const MmcmConfig& cfg, double f_in_mhz, const MmcmLimits& limits = {});

double mmcm_vco_mhz(const MmcmConfig& cfg, double f_in_mhz);
double mmcm_output_frequency(const MmcmConfig& cfg, double f_in_mhz = 100.0,
                             const MmcmLimits& limits = {});

// Exhaustive solve over all legal divider triples. Returns the config whose
// realized frequency is within 0.0625 MHz of the target, preferring smaller
// error, then higher VCO, then smaller d, then smaller o. All comparisons
// are exact integer arithmetic, so the winner does not depend on enumeration
// order. Throws InfeasibleError (carrying the best achievable error) when no
// legal config lands inside the tolerance.
MmcmConfig solve_mmcm(double f_target_mhz, double f_in_mhz = 100.0,
                      const MmcmLimits& limits = {});

double solve_tolerance_mhz();

// BRAM-style frequency table: one solved line per requested frequency plus a
// two-level index. Each integer-MHz record stores the virtual line index its
// n.0 MHz entry would occupy (possibly fractional or negative) and how many
// lines one 0.125 MHz of fractional offset advances, so a lookup is a single
// index computation instead of a scan.
struct ConfigTable {
  struct IndexRecord {
    int int_mhz = 0;
    double base = 0.0;   // virtual line index of int_mhz + 0.000
    double shift = 0.0;  // lines per 0.125 MHz of fractional offset
    int first_line = 0;
    int last_line = 0;
  };

  double f_in_mhz = 100.0;
  std::vector<double> nominal_mhz;       // ascending, one per line
  std::vector<MmcmConfig> config_lines;  // parallel to nominal_mhz
  std::vector<IndexRecord> index_records;

  std::size_t size() const { return config_lines.size(); }
};

inline constexpr std::size_t kMaxTableLines = 1024;

ConfigTable build_config_table(double lo_mhz, double hi_mhz, double step_mhz,
                               double f_in_mhz = 100.0, const MmcmLimits& limits = {});

// Same contract for an explicit frequency list (sorted + deduplicated here).
// Values sharing an integer MHz must be evenly spaced or the two-level index
// cannot represent the block; such lists are rejected.
ConfigTable build_config_table(const std::vector<double>& values_mhz,
                               double f_in_mhz = 100.0, const MmcmLimits& limits = {});

// Two-level resolution; throws NotFoundError when f is not a table line.
const MmcmConfig& lookup(const ConfigTable& table, double f_mhz);

// Reference path for equivalence checks: plain scan of the nominal column.
std::optional<std::size_t> lookup_scan(const ConfigTable& table, double f_mhz);

std::optional<std::size_t> lookup_line(const ConfigTable& table, double f_mhz);

void write_table_csv(const ConfigTable& table, std::ostream& out);
void write_table_mem(const ConfigTable& table, std::ostream& out);

}  // namespace desync
