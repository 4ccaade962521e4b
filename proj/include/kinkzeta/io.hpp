#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "kinkzeta/errors.hpp"

namespace kinkzeta::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

/// Every configuration key with its default and a one-line description. This table is the
/// single source of defaults.
struct KeySpec {
  const char* key;
  const char* default_value;
  const char* help;
};

inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      // chain
      {"J", "1", "exchange coupling"},
      {"D", "-1", "anisotropy (easy axis: D < 0)"},
      {"gmuB_B", "1", "product g mu_B B"},
      {"a", "1", "lattice constant"},
      {"hbar", "1", "reduced Planck constant"},
      // quantization
      {"T", "1", "Feynman time scale"},
      {"l", "1", "transverse extent in units of a"},
      {"d", "1", "spatial dimension for m0 (1..3); corrections always tabulate 1..3"},
      {"r_policy", "modulus", "modulus: r^2 = T J m^2/(2 pi hbar); value: use r_value"},
      {"r_value", "1", "mass scale when r_policy = value"},
      // modes
      {"width_mode", "eom", "kink width: paper (tanh(m z)) or eom (tanh(m z/sqrt2))"},
      {"density", "eq8", "energy density quartic: eq8 (m^2/(2V^2)) or eq10 (m^2/V^2)"},
      // kink numerics
      {"kink_halfwidth_m", "20", "kink grid half width in units of 1/m"},
      {"kink_points", "4001", "kink grid points"},
      {"relax_tol", "1e-11", "relaxation tolerance on max residual/(J m^2 V)"},
      {"relax_max_iter", "400", "relaxation iteration cap"},
      // spectra and zeta
      {"spectrum_halfwidth", "20", "fluctuation operator half width (units of 1/m)"},
      {"spectrum_points", "4000", "interior grid points for the fluctuation operator"},
      {"split", "1", "Mellin split point (units of 1/m^2)"},
      {"spectral_dims", "1", "dimensions d for which the spectral-numeric correction runs"},
      {"sweep_points", "11", "points in the g mu_B B table of cmd corrections"},
      // m0
      {"b", "1", "sn-wave scale parameter"},
      {"v", "0.5", "sn-wave speed (transport check)"},
      {"contour_o", "0", "Bromwich abscissa, 0 = 1.1 * 2 sqrt3 b^2"},
      {"contour_t_cut", "0", "Bromwich truncation, 0 = 200 b^2"},
      {"contour_nodes", "4000", "Gauss nodes on [0, t_cut]"},
      // chain-sim
      {"chain_sites", "201", "sites in the simulated chain"},
      {"chain_dt", "0.01", "time step"},
      {"chain_steps", "10000", "number of steps"},
      {"chain_record_every", "100", "trajectory sampling interval"},
      {"chain_boundary", "fixed", "fixed or periodic"},
      {"chain_initial_csv", "", "optional initial configuration (n,Sx,Sy,Sz)"},
      // run
      {"out_dir", "kinkzeta_out", "output directory"},
      {"seed", "12345", "seed for randomized spot checks and sweep shuffling"},
      {"workers", "1", "concurrent sweep workers"},
      {"sweep_axes", "", "sweep axes: key=v1:v2:..;key2=... (cmd sweep)"},
      {"sweep_command", "kink", "sub-command each sweep point runs"},
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Flat key/value configuration. Values are kept as strings; typed getters validate.
class Config {
 public:
  Config() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  static bool known(const std::string& key) {
    for (const auto& k : config_keys())
      if (key == k.key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown configuration key '" + key + "'");
    values_[key] = value;
  }

  /// TOML-style subset: `key = value` lines, `#` comments, optional quotes, [section]
  /// headers ignored (keys are global).
  void merge_text(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      bool quoted = false;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) {
          line.resize(i);
          break;
        }
      }
      line = trim(line);
      if (line.empty() || line.front() == '[') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      try {
        set(key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    merge_text(ss.str(), path.string());
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (trim(s.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "': '" + s + "' is not a number");
  }

  long integer(const std::string& key) const {
    const double v = num(key);
    if (v != static_cast<double>(static_cast<long>(v)))
      throw ConfigError("key '" + key + "' must be an integer");
    return static_cast<long>(v);
  }

  /// Canonical text: every key in table order, `key = value`, one per line.
  std::string canonical() const {
    std::string out;
    for (const auto& k : config_keys()) out += std::string(k.key) + " = " + values_.at(k.key) + "\n";
    return out;
  }

  /// Hash over the canonical text minus output location and worker count (neither changes
  /// numeric results).
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (const auto& k : config_keys()) {
      const std::string key = k.key;
      if (key == "out_dir" || key == "workers") continue;
      for (char c : key + "=" + values_.at(key) + "\n") {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
      }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  json to_json() const {
    json j = json::object();
    for (const auto& k : config_keys()) j[k.key] = values_.at(k.key);
    return j;
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Markdown table of the defaults (README and `--print-defaults`).
inline std::string defaults_table() {
  std::string s = "| key | default | meaning |\n|---|---|---|\n";
  for (const auto& k : config_keys())
    s += std::string("| `") + k.key + "` | `" + k.default_value + "` | " + k.help + " |\n";
  return s;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with a header row and full double precision.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<double>& values) {
    if (values.size() != header_.size()) throw SizeError("CsvWriter: row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) line += (i ? "," : "") + fmt(values[i]);
    rows_.push_back(std::move(line));
  }

  void row_text(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw SizeError("CsvWriter: row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    rows_.push_back(std::move(line));
  }

  std::size_t rows() const { return rows_.size(); }

  std::string text() const {
    std::string s;
    for (std::size_t i = 0; i < header_.size(); ++i) s += (i ? "," : "") + header_[i];
    s += "\n";
    for (const auto& r : rows_) s += r + "\n";
    return s;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// JSON value for a double; non-finite numbers become strings so the file stays valid.
inline json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

inline json cnum(std::complex<double> z) { return json{{"re", num(z.real())}, {"im", num(z.imag())}}; }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// One cross-check between a printed formula and an independent evaluation.
struct LedgerEntry {
  std::string formula_id;
  std::string paper_expression;
  json paper_value;
  json oracle_value;
  json deviation;  // ratio or difference, whichever the entry states
  std::string deviation_kind;
  json parameters;
};

/// Ordered collection; timestamps are stamped once per run so that reruns differ only there.
class Ledger {
 public:
  void add(LedgerEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

  json to_json(const std::string& timestamp) const {
    json arr = json::array();
    for (const auto& e : entries_)
      arr.push_back(json{{"formula_id", e.formula_id},
                         {"paper_expression", e.paper_expression},
                         {"paper_value", e.paper_value},
                         {"oracle_value", e.oracle_value},
                         {"deviation", e.deviation},
                         {"deviation_kind", e.deviation_kind},
                         {"parameters", e.parameters},
                         {"timestamp", timestamp}});
    return arr;
  }

 private:
  std::vector<LedgerEntry> entries_;
};

inline json versions() {
  return json{{"kinkzeta", kVersion},
              {"compiler", __VERSION__},
              {"cplusplus", static_cast<long>(__cplusplus)},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                            "." + std::to_string(EIGEN_MINOR_VERSION)},
              {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                            std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                            std::to_string(BOOST_VERSION % 100)}};
}

}  // namespace kinkzeta::io
