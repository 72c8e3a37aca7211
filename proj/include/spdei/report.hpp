#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdei/config.hpp"
#include "spdei/model.hpp"

namespace spdei {

inline constexpr const char* kVersion = "spdei-0.1.0";

/// Shortest round-trip decimal rendering of a double; used for every numeric
/// cell so identical runs produce byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json json_of_constants(const ConstantsReport& r) {
  return nlohmann::json{
      {"alpha", r.alpha},
      {"gamma", r.gamma},
      {"L1", r.L1},
      {"L2", r.L2},
      {"mu", r.mu},
      {"lambda_n", r.lambda_n},
      {"theta1", r.theta1},
      {"theta2", r.theta2},
      {"delta1", r.delta1},
      {"delta2", r.delta2},
      {"Lbar", r.Lbar},
      {"beta1", r.beta1},
      {"rho1", r.rho1},
      {"rho2", r.rho2},
      {"tau", r.tau},
      {"stepsize_bound_p1", r.stepsize_bound_p1},
      {"stepsize_bound_p2", r.stepsize_bound_p2},
  };
}

/// Provenance block embedded in every report: full config text, seed and
/// version, so a rerun with the same inputs is byte-identical.
inline nlohmann::json report_envelope(const Config& cfg, std::uint64_t seed,
                                      const ConstantsReport& constants) {
  return nlohmann::json{
      {"version", kVersion},
      {"seed", seed},
      {"config_text", cfg.raw_text()},
      {"config", cfg.values()},
      {"constants", json_of_constants(constants)},
  };
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
}

/// Minimal CSV writer: header row plus rows of stringified cells.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void header(const std::vector<std::string>& names) { row_strings(names); }

  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_double(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace spdei
