// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/trace_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace desync {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kLabelOffset = 36;
constexpr std::size_t kLabelCapacity = kDsb1HeaderSize - kLabelOffset;  // 28, last byte NUL

void put_bytes(char* dst, const void* src, std::size_t n) { std::memcpy(dst, src, n); }

void put_u32(char* dst, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(char* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f64(char* dst, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(dst, bits);
}

std::uint32_t get_u32(const char* src) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const char* src) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(src[i])) << (8 * i);
  return v;
}

double get_f64(const char* src) {
  const std::uint64_t bits = get_u64(src);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != n) {
    std::ostringstream msg;
    msg << "truncated trace set: expected " << n << " bytes of " << what << ", got " << got;
    throw TruncatedError(msg.str());
  }
}

}  // namespace

std::size_t dsb1_file_size(Eigen::Index n_traces, Eigen::Index n_samples) {
  if (n_traces == 0) return kDsb1HeaderSize;
  return kDsb1HeaderSize + 16 + static_cast<std::size_t>(n_traces) * 16 +
         static_cast<std::size_t>(n_traces) * static_cast<std::size_t>(n_samples) * sizeof(float);
}

std::size_t write_trace_set(const TraceSet& set, std::ostream& out) {
  set.validate();
  char header[kDsb1HeaderSize] = {};
  put_bytes(header, kMagic, 4);
  put_u32(header + 4, kVersion);
  put_u64(header + 8, static_cast<std::uint64_t>(set.n_traces()));
  put_u64(header + 16, static_cast<std::uint64_t>(set.n_samples()));
  put_f64(header + 24, set.sample_rate_hz);
  put_u32(header + 32, set.resolution_bits);
  put_bytes(header + kLabelOffset, set.chip_label.data(),
            std::min(set.chip_label.size(), kLabelCapacity - 1));
  out.write(header, sizeof header);

  if (set.n_traces() == 0) {
    if (!out) throw IoError("failed writing trace set header");
    return kDsb1HeaderSize;
  }

  out.write(reinterpret_cast<const char*>(set.key.data()), 16);
  out.write(reinterpret_cast<const char*>(set.plaintexts.data()),
            static_cast<std::streamsize>(set.plaintexts.size()));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(set.samples.data()),
            static_cast<std::streamsize>(set.samples.size() * sizeof(float)));
  if (!out) throw IoError("failed writing trace set payload");
  return dsb1_file_size(set.n_traces(), set.n_samples());
}

TraceSet read_trace_set(std::istream& in) {
  char header[kDsb1HeaderSize];
  read_exact(in, header, sizeof header, "header");
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw ParseError("bad magic: not a DSB1 trace set");
  }
  const std::uint32_t version = get_u32(header + 4);
  if (version != kVersion) {
    std::ostringstream msg;
    msg << "unsupported DSB1 version " << version << " (expected " << kVersion << ")";
    throw ParseError(msg.str());
  }
  const std::uint64_t n_traces = get_u64(header + 8);
  const std::uint64_t n_samples = get_u64(header + 16);

  TraceSet set;
  set.sample_rate_hz = get_f64(header + 24);
  set.resolution_bits = get_u32(header + 32);
  const char* label = header + kLabelOffset;
  set.chip_label.assign(label, strnlen(label, kLabelCapacity));

  if (n_traces == 0) {
    if (n_samples != 0) throw ParseError("empty trace set must record 0 samples");
    set.plaintexts.resize(0, 16);
    set.samples.resize(0, 0);
    set.validate();
    return set;
  }

  read_exact(in, reinterpret_cast<char*>(set.key.data()), 16, "key");
  set.plaintexts.resize(static_cast<Eigen::Index>(n_traces), 16);
  read_exact(in, reinterpret_cast<char*>(set.plaintexts.data()),
             static_cast<std::size_t>(set.plaintexts.size()), "plaintexts");
  set.samples.resize(static_cast<Eigen::Index>(n_traces), static_cast<Eigen::Index>(n_samples));
  read_exact(in, reinterpret_cast<char*>(set.samples.data()),
             static_cast<std::size_t>(set.samples.size()) * sizeof(float), "samples");
  set.validate();
  return set;
}

void save_trace_set(const TraceSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_trace_set(set, out);
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

TraceSet load_trace_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_trace_set(in);
}

}  // namespace desync
