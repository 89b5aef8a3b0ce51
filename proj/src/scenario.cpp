// SPDX-License-Identifier: Apache-2.0
//
// This file is part of desync-bench, a workbench for studying how random
// DVFS actuation desynchronizes power traces and degrades side-channel
// attacks.

#include "desync/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace desync {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& token, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty()) {
    std::ostringstream msg;
    msg << "line " << line_no << ": '" << token << "' is not a number";
    throw ParseError(msg.str());
  }
  return v;
}

std::vector<double> parse_value_list(const std::string& value, int line_no) {
  if (value.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty value list");
  if (value.front() == '{') {
    if (value.back() != '}') {
      throw ParseError("line " + std::to_string(line_no) + ": unterminated '{' list");
    }
    std::vector<double> values;
    std::string body = value.substr(1, value.size() - 2);
    std::stringstream ss(body);
    std::string token;
    while (std::getline(ss, token, ',')) {
      values.push_back(parse_number(trim(token), line_no));
    }
    if (values.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": '{}' list has no values");
    }
    return values;
  }
  if (value.front() == '[') {
    const auto close = value.find(']');
    const auto semi = value.find(';');
    if (close == std::string::npos || semi == std::string::npos || semi > close) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": range must look like [lo;hi] step s");
    }
    const double lo = parse_number(trim(value.substr(1, semi - 1)), line_no);
    const double hi = parse_number(trim(value.substr(semi + 1, close - semi - 1)), line_no);
    std::string rest = trim(value.substr(close + 1));
    if (rest.rfind("step", 0) != 0) {
      throw ParseError("line " + std::to_string(line_no) + ": range is missing 'step s'");
    }
    const double step = parse_number(trim(rest.substr(4)), line_no);
    if (!(step > 0.0)) {
      throw ParseError("line " + std::to_string(line_no) + ": range step must be positive");
    }
    if (hi < lo) {
      throw ParseError("line " + std::to_string(line_no) + ": range high bound below low bound");
    }
    return expand_range(lo, hi, step);
  }
  throw ParseError("line " + std::to_string(line_no) +
                   ": value must be '{a, b, c}' or '[lo;hi] step s'");
}

ControlEnables parse_enables(const std::string& value, int line_no) {
  ControlEnables e;
  const std::string v = trim(value);
  if (v == "none" || v.empty()) return e;
  std::stringstream ss(v);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token == "f") {
      e.f_en = true;
    } else if (token == "p") {
      e.p_en = true;
    } else if (token == "v") {
      e.v_en = true;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown enable '" + token +
                       "' (expected f, p, v, or none)");
    }
  }
  return e;
}

double snap(double v, double granularity) {
  return std::llround(v / granularity) * granularity;
}

}  // namespace

std::vector<double> expand_range(double lo, double hi, double step) {
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) values[k] = lo + static_cast<double>(k) * step;
  return values;
}

ScenarioSpec parse_scenario(std::istream& in) {
  ScenarioSpec spec;
  std::map<std::string, bool> seen;
  std::string line;
  int line_no = 0;
  bool enables_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (seen[key]) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    seen[key] = true;

    if (key == "id") {
      spec.id = value;
    } else if (key == "voltage") {
      spec.voltage_values = parse_value_list(value, line_no);
      for (double& v : spec.voltage_values) v = snap(v, 0.01);
    } else if (key == "frequency") {
      spec.frequency_values = parse_value_list(value, line_no);
      for (double& v : spec.frequency_values) v = snap(v, 0.125);
    } else if (key == "phase") {
      spec.phase_values = parse_value_list(value, line_no);
      for (double& v : spec.phase_values) v = snap(v, 1e-6);
    } else if (key == "chip_train") {
      spec.chip_train = value;
    } else if (key == "chip_attack") {
      spec.chip_attack = value;
    } else if (key == "enables") {
      spec.enables = parse_enables(value, line_no);
      enables_seen = true;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  for (const char* required : {"id", "voltage", "frequency", "phase", "chip_train", "chip_attack"}) {
    if (!seen[required]) {
      throw ParseError(std::string("scenario is missing required key '") + required + "'");
    }
  }
  if (!enables_seen) throw ParseError("scenario is missing required key 'enables'");
  spec.validate();
  return spec;
}

ScenarioSpec parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path);
  return parse_scenario(in);
}

namespace {

struct NamedScenario {
  const char* id;
  const char* text;
};

// F1/F2 use the inclusive range reading (10 and 8 values); the explicitly
// enumerated 9/7-value variants ship as scenarios/f1_steps9.scn and
// scenarios/f2_steps7.scn for anyone who wants the printed step counts.
const NamedScenario kTable1[] = {
    {"Synch",
     "id = Synch\n"
     "voltage = {1.0}\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = none\n"},
    {"C1",
     "id = C1\n"
     "voltage = {1.0}\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_35\n"
     "enables = none\n"},
    {"C2",
     "id = C2\n"
     "voltage = {1.0}\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_35\n"
     "chip_attack = artix7_100\n"
     "enables = none\n"},
    {"V1",
     "id = V1\n"
     "voltage = [0.99;1.01] step 0.01\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = v\n"},
    {"V2",
     "id = V2\n"
     "voltage = {0.75, 1.05}\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = v\n"},
    {"V3",
     "id = V3\n"
     "voltage = [0.75;1.05] step 0.03\n"
     "frequency = {50}\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = v\n"},
    {"P1",
     "id = P1\n"
     "voltage = {1.0}\n"
     "frequency = {50}\n"
     "phase = [0;30] step 3.75\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = p\n"},
    {"F1",
     "id = F1\n"
     "voltage = {1.0}\n"
     "frequency = [38.375;39.5] step 0.125\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = f\n"},
    {"F2",
     "id = F2\n"
     "voltage = {1.0}\n"
     "frequency = [30;65] step 5.0\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = f\n"},
    {"F3",
     "id = F3\n"
     "voltage = {1.0}\n"
     "frequency = [25;75] step 10.0\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = f\n"},
    {"F3_125",
     "id = F3_125\n"
     "voltage = {1.0}\n"
     "frequency = [25;75] step 0.125\n"
     "phase = {0}\n"
     "chip_train = artix7_100\n"
     "chip_attack = artix7_100\n"
     "enables = f\n"},
};

}  // namespace

const std::vector<std::string>& table1_scenario_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& s : kTable1) v.emplace_back(s.id);
    return v;
  }();
  return ids;
}

std::string table1_scenario_text(const std::string& id) {
  const auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string want = lower(id);
  for (const auto& s : kTable1) {
    if (want == lower(s.id)) return s.text;
  }
  throw NotFoundError("no built-in scenario named '" + id + "'");
}

ScenarioSpec table1_scenario(const std::string& id) {
  return parse_scenario_text(table1_scenario_text(id));
}

}  // namespace desync
