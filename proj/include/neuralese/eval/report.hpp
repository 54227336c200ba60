#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "neuralese/common.hpp"

namespace neuralese::eval {

/// One row of a results table. Belief evaluations fill `accuracy`;
/// behavior evaluations fill `reward` and `completion`.
struct EvalReport {
  std::string task;
  std::string direction;  // "r2h" (robot speaks, human listens) or "h2r"
  std::string translator;
  double accuracy = -1.0;
  double reward = 0.0;
  double completion = -1.0;
  int n = 0;
  std::uint64_t seed = 0;

  bool has_accuracy() const { return accuracy >= 0.0; }
  bool has_behavior() const { return completion >= 0.0; }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;

  void validate() const {
    if (has_accuracy() && accuracy > 1.0) throw InvalidConfig("accuracy must be in [0, 1]");
    if (has_behavior() && completion > 1.0) throw InvalidConfig("completion must be in [0, 1]");
  }
};

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* kReportHeader = "task,direction,translator,accuracy,reward,completion,n,seed";

/// Missing metrics are empty fields. Doubles print with 17 significant
/// digits, so parsing returns the same values.
inline std::string reports_to_csv(const std::vector<EvalReport>& rows) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : rows) {
    out += r.task + "," + r.direction + "," + r.translator + ",";
    out += (r.has_accuracy() ? fmt17(r.accuracy) : "") + ",";
    out += (r.has_behavior() ? fmt17(r.reward) : "") + ",";
    out += (r.has_behavior() ? fmt17(r.completion) : "") + ",";
    out += std::to_string(r.n) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

inline std::vector<EvalReport> reports_from_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  std::vector<EvalReport> out;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != kReportHeader) throw ParseError(source, 1, "unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw ParseError(source, n, "expected 8 fields");
    try {
      EvalReport r;
      r.task = f[0];
      r.direction = f[1];
      r.translator = f[2];
      if (!f[3].empty()) r.accuracy = std::stod(f[3]);
      if (!f[4].empty()) r.reward = std::stod(f[4]);
      if (!f[5].empty()) r.completion = std::stod(f[5]);
      r.n = std::stoi(f[6]);
      r.seed = std::stoull(f[7]);
      out.push_back(r);
    } catch (const std::logic_error& e) {
      throw ParseError(source, n, e.what());
    }
  }
  return out;
}

/// Fixed-width table with one row per translator, in the order given.
inline std::string reports_to_table(const std::vector<EvalReport>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %-5s %-8s %10s %10s %10s %6s\n", "task", "dir", "method", "accuracy",
                "reward", "complete", "n");
  out += buf;
  for (const auto& r : rows) {
    auto cell = [](bool has, double v) {
      char c[32];
      std::snprintf(c, sizeof(c), "%.4f", v);
      return has ? std::string(c) : std::string("-");
    };
    std::string acc = cell(r.has_accuracy(), r.accuracy);
    std::string rew = cell(r.has_behavior(), r.reward);
    std::string com = cell(r.has_behavior(), r.completion);
    std::snprintf(buf, sizeof(buf), "%-10s %-5s %-8s %10s %10s %10s %6d\n", r.task.c_str(), r.direction.c_str(),
                  r.translator.c_str(), acc.c_str(), rew.c_str(), com.c_str(), r.n);
    out += buf;
  }
  return out;
}

}  // namespace neuralese::eval
