// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#pragma once

#include "desync/types.hpp"

#include <iosfwd>
#include <string>

namespace desync {

// DSB1 binary layout, little-endian throughout:
//   offset  0: magic "DSB1"
//   offset  4: format version, u32 = 1
//   offset  8: n_traces, u64
//   offset 16: n_samples, u64
//   offset 24: sample_rate_hz, f64
//   offset 32: resolution_bits, u32
//   offset 36: chip label, NUL-padded ASCII (reserved area, zeros = no label)
//   offset 64: key, 16 bytes                      (omitted when n_traces = 0)
//   then    : plaintexts, n_traces x 16 bytes     (omitted when n_traces = 0)
//   then    : samples, n_traces x n_samples f32, one trace per row
// An empty set is exactly the 64-byte header.
inline constexpr std::size_t kDsb1HeaderSize = 64;

std::size_t write_trace_set(const TraceSet& set, std::ostream& out);
TraceSet read_trace_set(std::istream& in);

void save_trace_set(const TraceSet& set, const std::string& path);
TraceSet load_trace_set(const std::string& path);

std::size_t dsb1_file_size(Eigen::Index n_traces, Eigen::Index n_samples);

}  // namespace desync
