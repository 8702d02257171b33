/**
 * @file cli.hpp
 * @brief Run configuration (JSON with model, grid, experiment and output
 *        blocks), dotted-key overrides, schema validation, FNV-1a hashing and
 *        the run manifest used by the pamlab command-line tool.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pam/covariance.hpp"
#include "pam/errors.hpp"
#include "pam/noise.hpp"
#include "pam/stats.hpp"

namespace pam::cli {

using json = nlohmann::json;

/// Version string recorded in every manifest.
inline constexpr const char* kArtifactVersion = "pamlab 1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNumericalFailure = 3, kAcceptanceFailure = 4 };

/// 64-bit FNV-1a hash.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Defaults for every block; a config file is merged on top of these.
inline json default_config() {
  return json::parse(R"({
    "model": {"kind": "white_noise", "d": 1, "a": 1.0},
    "grid": {"L": 16.0, "M": 512, "t0": 0.0, "t_end": 0.5, "J": 128, "master_seed": 1,
             "spacing": "uniform", "auto": true},
    "experiment": {
      "N_list": [8, 16, 32, 64],
      "replicas": 2000,
      "scheme": "comoving",
      "lambda_list": [0.25, 1.0, 4.0],
      "moment_orders": [2, 4],
      "chi": {"n_time": 48, "n_space": 96, "r_max": 0.0, "refine": false},
      "test_functions": ["clip:2", "clip:2"],
      "shifts": [[0], [1]],
      "dump_fields": 1,
      "rate_tolerance": 0.15,
      "constant_tolerance": 0.40,
      "normality_level": 0.01
    },
    "output": "runs"
  })");
}

/// Recursively merges `patch` into `base` (objects merge, everything else replaces).
inline void merge_into(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

/// Applies "a.b.c=value"; the value is parsed as JSON when possible, else kept as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must have the form key.path=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "empty key segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// Reads a JSON config file and merges it over the defaults.
inline json load_config(const std::string& path) {
  json cfg = default_config();
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json file;
  try {
    in >> file;
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  if (!file.is_object()) throw ConfigError(path, "top level must be an object");
  merge_into(cfg, file);
  return cfg;
}

namespace detail {

inline const json& require(const json& block, const std::string& path, const std::string& key) {
  if (!block.contains(key)) throw ConfigError(path + "." + key, "missing required key");
  return block.at(key);
}

inline double positive_number(const json& block, const std::string& path, const std::string& key) {
  const json& v = require(block, path, key);
  if (!v.is_number()) throw ConfigError(path + "." + key, "must be a number");
  const double x = v.get<double>();
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path + "." + key, "must be positive");
  return x;
}

inline int positive_int(const json& block, const std::string& path, const std::string& key) {
  const json& v = require(block, path, key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key, "must be an integer");
  const auto x = v.get<long long>();
  if (x < 1 || x > 1'000'000'000) throw ConfigError(path + "." + key, "must be a positive integer");
  return static_cast<int>(x);
}

inline void only_keys(const json& block, const std::string& path, std::initializer_list<const char*> keys) {
  if (!block.is_object()) throw ConfigError(path, "must be an object");
  for (auto it = block.begin(); it != block.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError(path + "." + it.key(), "unknown key");
}

/// Piecewise-linear interpolation of a [[x, y], ...] table; 0 beyond its ends.
inline std::function<double(double)> table_function(const json& table, const std::string& path) {
  if (!table.is_array() || table.size() < 2) throw ConfigError(path, "must be an array of at least two [x, y] pairs");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table[i];
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
      throw ConfigError(path + "[" + std::to_string(i) + "]", "must be a pair of numbers");
    xs.push_back(row[0].get<double>());
    ys.push_back(row[1].get<double>());
    if (ys.back() < 0.0) throw ConfigError(path + "[" + std::to_string(i) + "]", "values must be nonnegative");
    if (i && !(xs[i] > xs[i - 1])) throw ConfigError(path + "[" + std::to_string(i) + "]", "abscissae must increase");
  }
  return [xs, ys](double x) {
    if (x < xs.front() || x > xs.back()) return 0.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
    if (k == 0) return ys.front();
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return (1.0 - w) * ys[k - 1] + w * ys[k];
  };
}

}  // namespace detail

/// Builds the covariance model from the "model" block.
inline CovarianceModel parse_model(const json& cfg) {
  if (!cfg.contains("model")) throw ConfigError("model", "missing required block");
  const json& m = cfg.at("model");
  detail::only_keys(m, "model",
                    {"kind", "d", "a", "beta", "spectral_table", "density_table", "total_mass", "rajchman", "atom"});
  const json& kind = detail::require(m, "model", "kind");
  if (!kind.is_string()) throw ConfigError("model.kind", "must be a string");
  const int d = detail::positive_int(m, "model", "d");
  if (d > 3) throw ConfigError("model.d", "dimension must be 1, 2 or 3");
  const std::string k = kind.get<std::string>();
  if (k == "white_noise") return CovarianceModel::white_noise(d, detail::positive_number(m, "model", "a"));
  if (k == "gaussian") return CovarianceModel::gaussian(d);
  if (k == "riesz") {
    const double beta = detail::positive_number(m, "model", "beta");
    if (!(beta < std::min(2.0, static_cast<double>(d))))
      throw ConfigError("model.beta", "Riesz exponent must satisfy 0 < beta < min(2, d)");
    return CovarianceModel::riesz(d, beta);
  }
  if (k == "tabulated") {
    auto spectral = detail::table_function(detail::require(m, "model", "spectral_table"), "model.spectral_table");
    std::function<double(double)> density;
    if (m.contains("density_table")) density = detail::table_function(m.at("density_table"), "model.density_table");
    const double mass = detail::positive_number(m, "model", "total_mass");
    const json& raj = detail::require(m, "model", "rajchman");
    if (!raj.is_boolean()) throw ConfigError("model.rajchman", "must be true or false");
    double atom = 0.0;
    if (m.contains("atom")) {
      if (!m.at("atom").is_number() || m.at("atom").get<double>() < 0.0)
        throw ConfigError("model.atom", "must be a nonnegative number");
      atom = m.at("atom").get<double>();
    }
    return CovarianceModel::tabulated(d, spectral, mass, raj.get<bool>(), atom, density);
  }
  throw ConfigError("model.kind", "unknown kind '" + k + "' (white_noise, gaussian, riesz, tabulated)");
}

/// Builds the grid from the "grid" block.  Uniform grids with t0 = 0 start at one step, t_end / J.
inline GridSpec parse_grid(const json& cfg) {
  if (!cfg.contains("grid")) throw ConfigError("grid", "missing required block");
  const json& g = cfg.at("grid");
  detail::only_keys(g, "grid", {"L", "M", "t0", "t_end", "J", "master_seed", "spacing", "auto"});
  GridSpec s;
  s.d = parse_model(cfg).dimension;
  s.L = detail::positive_number(g, "grid", "L");
  s.M = detail::positive_int(g, "grid", "M");
  if (s.M < 4 || s.M % 2) throw ConfigError("grid.M", "must be an even integer >= 4");
  const json& t0 = detail::require(g, "grid", "t0");
  if (!t0.is_number() || t0.get<double>() < 0.0) throw ConfigError("grid.t0", "must be a nonnegative number");
  s.t0 = t0.get<double>();
  s.t_end = detail::positive_number(g, "grid", "t_end");
  if (!(s.t0 < s.t_end)) throw ConfigError("grid.t0", "must be smaller than grid.t_end");
  s.J = detail::positive_int(g, "grid", "J");
  const json& seed = detail::require(g, "grid", "master_seed");
  if (!seed.is_number_integer() || seed.get<long long>() < 0)
    throw ConfigError("grid.master_seed", "must be a nonnegative integer");
  s.master_seed = seed.get<std::uint64_t>();
  const std::string spacing = g.value("spacing", std::string("uniform"));
  if (spacing == "geometric") {
    s.spacing = TimeSpacing::Geometric;
    if (!(s.t0 > 0.0)) throw ConfigError("grid.t0", "geometric spacing needs t0 > 0");
  } else if (spacing != "uniform") {
    throw ConfigError("grid.spacing", "must be 'uniform' or 'geometric'");
  }
  if (s.spacing == TimeSpacing::Uniform && s.t0 == 0.0) s.t0 = s.t_end / s.J;
  return s;
}

/// Whether the grid block asks for the default window grid of stats::default_window_grid.
inline bool auto_grid(const json& cfg) { return cfg.at("grid").value("auto", false); }

/// N list from the experiment block (positive, increasing).
inline std::vector<double> parse_N_list(const json& cfg) {
  const json& e = cfg.at("experiment");
  const json& list = detail::require(e, "experiment", "N_list");
  if (!list.is_array() || list.empty()) throw ConfigError("experiment.N_list", "must be a non-empty array");
  std::vector<double> Ns;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!list[i].is_number() || !(list[i].get<double>() > 0.0))
      throw ConfigError("experiment.N_list[" + std::to_string(i) + "]", "must be a positive number");
    Ns.push_back(list[i].get<double>());
    if (i && !(Ns[i] > Ns[i - 1])) throw ConfigError("experiment.N_list[" + std::to_string(i) + "]", "must increase");
  }
  return Ns;
}

/// Positive list of numbers under experiment.<key>.
inline std::vector<double> parse_positive_list(const json& cfg, const std::string& key) {
  const json& e = cfg.at("experiment");
  const json& list = detail::require(e, "experiment", key);
  if (!list.is_array() || list.empty()) throw ConfigError("experiment." + key, "must be a non-empty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!list[i].is_number() || !(list[i].get<double>() > 0.0))
      throw ConfigError("experiment." + key + "[" + std::to_string(i) + "]", "must be a positive number");
    out.push_back(list[i].get<double>());
  }
  return out;
}

/// Test functions by name: "clip:K" is g(x) = min(x, K) - min(0, x).  Other
/// names are rejected as unsupported; "identity" and "square" are recognized
/// only to report that they are not bounded Lipschitz functions.
inline std::vector<stats::TestFunction> parse_test_functions(const json& cfg) {
  const json& list = detail::require(cfg.at("experiment"), "experiment", "test_functions");
  if (!list.is_array() || list.empty()) throw ConfigError("experiment.test_functions", "must be a non-empty array");
  std::vector<stats::TestFunction> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "experiment.test_functions[" + std::to_string(i) + "]";
    if (!list[i].is_string()) throw ConfigError(path, "must be a string such as \"clip:2\"");
    const std::string s = list[i].get<std::string>();
    if (s.rfind("clip:", 0) == 0) {
      double K = 0.0;
      try {
        K = std::stod(s.substr(5));
      } catch (const std::exception&) {
        throw ConfigError(path, "clip level must be a number");
      }
      if (!(K > 0.0)) throw ConfigError(path, "clip level must be positive");
      out.push_back(stats::clipped_identity(K));
    } else if (s == "identity" || s == "square") {
      throw ConfigError(path, "'" + s + "' is not a bounded Lipschitz function with g(0) = 0");
    } else {
      throw ConfigError(path, "unknown test function '" + s + "'");
    }
  }
  return out;
}

/// Lattice shifts zeta_j in cells, one per test function.
inline std::vector<std::vector<int>> parse_shifts(const json& cfg, std::size_t count, int d) {
  const json& list = detail::require(cfg.at("experiment"), "experiment", "shifts");
  if (!list.is_array() || list.size() != count)
    throw ConfigError("experiment.shifts", "must list one shift per test function");
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "experiment.shifts[" + std::to_string(i) + "]";
    if (!list[i].is_array() || list[i].empty() || static_cast<int>(list[i].size()) > d)
      throw ConfigError(path, "must be an array of at most d integers");
    std::vector<int> z(d, 0);
    for (std::size_t a = 0; a < list[i].size(); ++a) {
      if (!list[i][a].is_number_integer()) throw ConfigError(path, "entries must be integers");
      z[a] = list[i][a].get<int>();
    }
    out.push_back(z);
  }
  return out;
}

/// Replica count from the experiment block.
inline int parse_replicas(const json& cfg) { return detail::positive_int(cfg.at("experiment"), "experiment", "replicas"); }

/// Simulation scheme from experiment.scheme.
inline stats::Scheme parse_scheme(const json& cfg) {
  const std::string s = cfg.at("experiment").value("scheme", std::string("comoving"));
  if (s == "comoving") return stats::Scheme::CoMoving;
  if (s == "physical") return stats::Scheme::Physical;
  if (s == "volterra") return stats::Scheme::Volterra;
  throw ConfigError("experiment.scheme", "must be 'comoving', 'physical' or 'volterra'");
}

/**
 * Schema check of the whole config before any computation: top-level and
 * block keys, model and grid blocks, N list, and the domain rule
 * L >= 8 (N_max + sqrt t_end) for explicit grids.
 */
inline void validate_config(const json& cfg) {
  detail::only_keys(cfg, "config", {"model", "grid", "experiment", "output"});
  parse_model(cfg);
  const GridSpec g = parse_grid(cfg);
  if (!cfg.contains("experiment")) throw ConfigError("experiment", "missing required block");
  const json& e = cfg.at("experiment");
  detail::only_keys(e, "experiment",
                    {"N_list", "replicas", "scheme", "lambda_list", "moment_orders", "chi", "test_functions", "shifts",
                     "dump_fields", "rate_tolerance", "constant_tolerance", "normality_level"});
  const auto Ns = parse_N_list(cfg);
  parse_replicas(cfg);
  parse_scheme(cfg);
  parse_positive_list(cfg, "lambda_list");
  parse_positive_list(cfg, "moment_orders");
  if (e.contains("chi")) {
    const json& c = e.at("chi");
    detail::only_keys(c, "experiment.chi", {"n_time", "n_space", "r_max", "refine"});
    detail::positive_int(c, "experiment.chi", "n_time");
    detail::positive_int(c, "experiment.chi", "n_space");
    if (c.contains("r_max") && (!c.at("r_max").is_number() || c.at("r_max").get<double>() < 0.0))
      throw ConfigError("experiment.chi.r_max", "must be a nonnegative number (0 selects the default)");
  }
  for (const char* key : {"rate_tolerance", "constant_tolerance", "normality_level"})
    if (e.contains(key)) detail::positive_number(e, "experiment", key);
  const auto fns = parse_test_functions(cfg);
  parse_shifts(cfg, fns.size(), g.d);
  if (!auto_grid(cfg) && Ns.back() > g.L / 8.0 - std::sqrt(g.t_end))
    throw ConfigError("experiment.N_list", "largest N exceeds grid.L / 8 - sqrt(t_end) (solver domain rule)");
  if (!cfg.at("output").is_string()) throw ConfigError("output", "must be a directory path string");
}

/// Grid for window experiments: the explicit grid, or the default window grid.
inline GridSpec window_grid(const json& cfg) {
  const GridSpec g = parse_grid(cfg);
  if (!auto_grid(cfg)) return g;
  return stats::default_window_grid(g.d, g.t_end, parse_N_list(cfg).back(), g.master_seed);
}

/// Canonical serialization used for the config hash.
inline std::string canonical(const json& cfg) { return cfg.dump(); }

/// UTC timestamp, ISO 8601.
inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Manifest written next to every run's outputs.
struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  json config;
  json seed_lineage;
  std::string started, finished;
  std::map<std::string, std::string> checksums;  ///< file name -> FNV-1a of its bytes.
  int exit_code = 0;
  json summary = json::object();

  json to_json() const {
    return {{"subcommand", subcommand},
            {"artifact_version", kArtifactVersion},
            {"config_hash", config_hash},
            {"config", config},
            {"seed_lineage", seed_lineage},
            {"started", started},
            {"finished", finished},
            {"checksums", checksums},
            {"exit_code", exit_code},
            {"summary", summary}};
  }
};

/// FNV-1a of a file's bytes.
inline std::string file_checksum(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return hex64(fnv1a64(os.str()));
}

}  // namespace pam::cli
