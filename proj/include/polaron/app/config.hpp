#pragma once

// Flat key = value run configuration with command-line overrides.
//
// Numbers may carry a `pi` suffix ("0.972pi"); lists are comma separated.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polaron/error.hpp"
#include "polaron/model.hpp"

namespace polaron::app {

/// Bad config text, unknown key, or a value outside its range. Maps to the usage exit code.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_number(const std::string& key, std::string_view text) {
  std::string t = trim(text);
  double factor = 1.0;
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    factor = std::numbers::pi;
    t = trim(std::string_view(t).substr(0, t.size() - 2));
    if (!t.empty() && t.back() == '*') t.pop_back();
    if (t.empty()) t = "1";
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not a number: " + std::string(text));
  }
  if (used != t.size()) throw ConfigError("value for '" + key + "' is not a number: " + std::string(text));
  v *= factor;
  if (!std::isfinite(v)) throw ConfigError("value for '" + key + "' is not finite");
  return v;
}

inline long long parse_integer(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not an integer: " + std::string(text));
  }
  if (used != t.size()) throw ConfigError("value for '" + key + "' is not an integer: " + std::string(text));
  return v;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("value for '" + key + "' is not a boolean: " + std::string(text));
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

struct RunConfig {
  // device
  double ej_scaled = 100.0;
  double delta_theta = 3.5e-3;
  double delta_omega_over_2pi = 0.3;
  double phi_dc = 0.972 * std::numbers::pi;
  double tau_phi_dc = 0.972 * std::numbers::pi;  ///< flux that fixes the time unit tau_ec

  // lattice
  int n_sites = 9;
  int max_phonons = 20;         ///< dynamics
  int ground_max_phonons = 10;  ///< ground-state scans and the formation-time reference

  // quench
  int k0_index = 2;
  double t_final = 100.0;  ///< tau_ec units
  double dt = 0.05;        ///< tau_ec units
  std::string nbar_at = "kgs";  ///< formation reference: "kgs" (ground sector) or "k0"

  // solver
  double tail_tol = 1e-12;
  int fixed_order = 0;  ///< Chebyshev order override, 0 = adaptive
  double alpha_c = 1e-3;
  double lanczos_tol = 1e-9;
  int basis_cap = 200;
  int observable_stride = 1;
  std::uint64_t rng_seed = 20240901;
  int workers = 0;  ///< 0 = POLARON_WORKERS or 1

  // ground sweep (phi_steps = 0: single point)
  double phi_min = 0.96 * std::numbers::pi;
  double phi_max = 0.98 * std::numbers::pi;
  int phi_steps = 0;
  bool locate_critical = false;
  double lambda_tol = 1e-3;

  // formation sweep
  std::string sweep_k0 = "1,2,3,4";
  std::string sweep_phi = "0.975pi";

  // output
  std::string output_dir = ".";
  std::string cache_dir;

  DeviceParams device() const {
    DeviceParams d;
    d.ej_scaled = ej_scaled;
    d.delta_theta = delta_theta;
    d.delta_omega_over_2pi = delta_omega_over_2pi;
    d.phi_dc = phi_dc;
    return d;
  }

  std::vector<int> sweep_k0_list() const {
    std::vector<int> out;
    for (const auto& s : split_list(sweep_k0)) out.push_back(static_cast<int>(parse_integer("sweep_k0", s)));
    return out;
  }

  std::vector<double> sweep_phi_list() const {
    std::vector<double> out;
    for (const auto& s : split_list(sweep_phi)) out.push_back(parse_number("sweep_phi", s));
    return out;
  }

  void validate() const;
};

namespace detail {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::ordered_json(const RunConfig&)> get;
};

template <typename T>
Field number_field(std::string key, T RunConfig::* member) {
  return {key,
          [member, key](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              c.*member = parse_number(key, v);
            } else if constexpr (std::is_same_v<T, bool>) {
              c.*member = parse_bool(key, v);
            } else if constexpr (std::is_same_v<T, std::string>) {
              c.*member = trim(v);
            } else {
              const long long x = parse_integer(key, v);
              if (x < static_cast<long long>(std::numeric_limits<T>::min()) ||
                  static_cast<unsigned long long>(x) > static_cast<unsigned long long>(std::numeric_limits<T>::max()))
                throw ConfigError("value for '" + key + "' out of range");
              c.*member = static_cast<T>(x);
            }
          },
          [member](const RunConfig& c) { return nlohmann::ordered_json(c.*member); }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("ej_scaled", &RunConfig::ej_scaled),
      number_field("delta_theta", &RunConfig::delta_theta),
      number_field("delta_omega_over_2pi", &RunConfig::delta_omega_over_2pi),
      number_field("phi_dc", &RunConfig::phi_dc),
      number_field("tau_phi_dc", &RunConfig::tau_phi_dc),
      number_field("n_sites", &RunConfig::n_sites),
      number_field("max_phonons", &RunConfig::max_phonons),
      number_field("ground_max_phonons", &RunConfig::ground_max_phonons),
      number_field("k0_index", &RunConfig::k0_index),
      number_field("t_final", &RunConfig::t_final),
      number_field("dt", &RunConfig::dt),
      number_field("nbar_at", &RunConfig::nbar_at),
      number_field("tail_tol", &RunConfig::tail_tol),
      number_field("fixed_order", &RunConfig::fixed_order),
      number_field("alpha_c", &RunConfig::alpha_c),
      number_field("lanczos_tol", &RunConfig::lanczos_tol),
      number_field("basis_cap", &RunConfig::basis_cap),
      number_field("observable_stride", &RunConfig::observable_stride),
      number_field("rng_seed", &RunConfig::rng_seed),
      number_field("workers", &RunConfig::workers),
      number_field("phi_min", &RunConfig::phi_min),
      number_field("phi_max", &RunConfig::phi_max),
      number_field("phi_steps", &RunConfig::phi_steps),
      number_field("locate_critical", &RunConfig::locate_critical),
      number_field("lambda_tol", &RunConfig::lambda_tol),
      number_field("sweep_k0", &RunConfig::sweep_k0),
      number_field("sweep_phi", &RunConfig::sweep_phi),
      number_field("output_dir", &RunConfig::output_dir),
      number_field("cache_dir", &RunConfig::cache_dir),
  };
  return table;
}

}  // namespace detail

inline bool is_config_key(const std::string& key) {
  for (const auto& f : detail::fields())
    if (f.key == key) return true;
  return false;
}

inline void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::fields())
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies `key = value` lines; '#' starts a comment.
inline void apply_text(RunConfig& cfg, std::istream& in, const std::string& origin = "config") {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    set_value(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
}

inline void apply_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  apply_text(cfg, in, path);
}

inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  for (const auto& f : detail::fields()) j[f.key] = f.get(cfg);
  return j;
}

/// The resolved config as a config file.
inline std::string to_text(const RunConfig& cfg) {
  std::ostringstream os;
  const auto j = to_json(cfg);
  for (const auto& [k, v] : j.items()) {
    os << k << " = ";
    if (v.is_string()) {
      os << v.get<std::string>();
    } else if (v.is_number_float()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      os << buf;
    } else {
      os << v.dump();
    }
    os << '\n';
  }
  return os.str();
}

inline void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  try {
    device().validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (n_sites < 3 || n_sites > 32) fail("n_sites must lie in [3, 32]");
  if (max_phonons < 0 || max_phonons > 64) fail("max_phonons must lie in [0, 64]");
  if (ground_max_phonons < 0 || ground_max_phonons > 64) fail("ground_max_phonons must lie in [0, 64]");
  if (k0_index < 0 || k0_index >= n_sites) fail("k0_index must lie in [0, n_sites)");
  if (!(t_final >= 0.0)) fail("t_final must be non-negative");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (nbar_at != "kgs" && nbar_at != "k0") fail("nbar_at must be 'kgs' or 'k0'");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) fail("tail_tol must lie in (0, 1)");
  if (fixed_order < 0) fail("fixed_order must be non-negative");
  if (!(alpha_c > 0.0 && alpha_c < 1.0)) fail("alpha_c must lie in (0, 1)");
  if (!(lanczos_tol > 0.0)) fail("lanczos_tol must be positive");
  if (basis_cap < 8) fail("basis_cap must be at least 8");
  if (observable_stride < 1) fail("observable_stride must be at least 1");
  if (workers < 0) fail("workers must be non-negative");
  if (phi_steps < 0) fail("phi_steps must be non-negative");
  if (phi_steps > 0 && !(phi_max > phi_min)) fail("phi_max must exceed phi_min");
  if (!(lambda_tol > 0.0)) fail("lambda_tol must be positive");
  for (int k : sweep_k0_list())
    if (k < 0 || k >= n_sites) fail("sweep_k0 entries must lie in [0, n_sites)");
  if (sweep_phi_list().empty()) fail("sweep_phi is empty");
}

}  // namespace polaron::app
