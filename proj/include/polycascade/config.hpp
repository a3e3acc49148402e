#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "environment.hpp"
#include "errors.hpp"

namespace polycascade {

// Plain-text `key = value` configuration shared by every CLI command.
struct StudyConfig {
  std::string family = "gaussian";
  std::vector<double> params{0.0, 1.0};
  int d = 1;
  std::vector<double> betas{1.0};
  std::vector<int> m_list{1, 2, 4, 8, 16, 32};
  std::vector<int> n_list{4, 8, 16, 32, 64};
  double theta_min = 0.01;
  std::size_t theta_grid_size = 100;
  double golden_tolerance = 1e-3;
  std::size_t replicas = 100'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out = ".";

  int beta_c_m = 2;
  double beta_c_lo = 0.1;
  double beta_c_hi = 3.0;
  double beta_c_tolerance = 0.05;

  std::string cascade_law = "rem";  // rem, uniform or polymer
  std::size_t cascade_n = 4;        // branching; ignored for the polymer law
  int cascade_m = 2;                // polymer law horizon
  std::vector<int> cascade_depths{1, 2, 4, 8, 12};
  std::size_t cascade_trees = 1;

  int overlap_n = 256;
  std::size_t overlap_slabs = 100;

  int concentration_n = 16;
  std::vector<double> concentration_lambdas{0.25, 0.5, 1.0};

  EnvironmentModel model() const { return EnvironmentModel::from_name(family, params); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw UsageError("invalid value '" + text + "' for " + key);
  return value;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

template <class T>
void positive(const std::string& key, T value) {
  if (!(value > T{})) throw UsageError(key + " must be positive");
}

}  // namespace detail

// Sets one key; throws UsageError naming the key on unknown keys or bad values.
inline void apply_setting(StudyConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_list;
  using detail::parse_number;
  if (key == "env.family") {
    c.family = value;
  } else if (key == "env.params") {
    c.params = parse_list<double>(key, value);
  } else if (key == "d") {
    c.d = parse_number<int>(key, value);
    if (c.d < 1 || c.d > 3) throw UsageError("d must be 1, 2 or 3");
  } else if (key == "beta" || key == "beta_grid") {
    c.betas = parse_list<double>(key, value);
    if (c.betas.empty()) throw UsageError(key + " must not be empty");
  } else if (key == "m_list") {
    c.m_list = parse_list<int>(key, value);
  } else if (key == "n_list") {
    c.n_list = parse_list<int>(key, value);
  } else if (key == "theta_min") {
    c.theta_min = parse_number<double>(key, value);
    if (!(c.theta_min > 0.0 && c.theta_min < 1.0)) throw UsageError("theta_min must lie in (0, 1)");
  } else if (key == "theta_grid_size") {
    c.theta_grid_size = parse_number<std::size_t>(key, value);
  } else if (key == "golden_tolerance") {
    c.golden_tolerance = parse_number<double>(key, value);
    detail::positive(key, c.golden_tolerance);
  } else if (key == "replicas") {
    c.replicas = parse_number<std::size_t>(key, value);
    detail::positive(key, c.replicas);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "workers") {
    c.workers = parse_number<unsigned>(key, value);
    detail::positive(key, c.workers);
  } else if (key == "out") {
    c.out = value;
  } else if (key == "beta_c.m") {
    c.beta_c_m = parse_number<int>(key, value);
  } else if (key == "beta_c.interval") {
    const auto v = parse_list<double>(key, value);
    if (v.size() != 2) throw UsageError("beta_c.interval takes two values lo,hi");
    c.beta_c_lo = v[0];
    c.beta_c_hi = v[1];
  } else if (key == "beta_c.tolerance") {
    c.beta_c_tolerance = parse_number<double>(key, value);
  } else if (key == "cascade.law") {
    if (value != "rem" && value != "uniform" && value != "polymer") {
      throw UsageError("cascade.law must be rem, uniform or polymer");
    }
    c.cascade_law = value;
  } else if (key == "cascade.N") {
    c.cascade_n = parse_number<std::size_t>(key, value);
    detail::positive(key, c.cascade_n);
  } else if (key == "cascade.m") {
    c.cascade_m = parse_number<int>(key, value);
  } else if (key == "cascade.depths") {
    c.cascade_depths = parse_list<int>(key, value);
  } else if (key == "cascade.trees") {
    c.cascade_trees = parse_number<std::size_t>(key, value);
    detail::positive(key, c.cascade_trees);
  } else if (key == "overlap.n") {
    c.overlap_n = parse_number<int>(key, value);
  } else if (key == "overlap.slabs") {
    c.overlap_slabs = parse_number<std::size_t>(key, value);
    detail::positive(key, c.overlap_slabs);
  } else if (key == "concentration.n") {
    c.concentration_n = parse_number<int>(key, value);
  } else if (key == "concentration.lambdas") {
    c.concentration_lambdas = parse_list<double>(key, value);
  } else {
    throw UsageError("unknown configuration key '" + key + "'");
  }
}

// Applies `key = value` lines on top of `c`. Blank lines and `#` comments are
// skipped; errors carry the 1-based line number.
inline void parse_config(std::istream& in, StudyConfig& c, const std::string& source = "config") {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      apply_setting(c, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw UsageError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

inline StudyConfig parse_config_string(const std::string& text, StudyConfig c = {}) {
  std::istringstream in(text);
  parse_config(in, c);
  return c;
}

inline StudyConfig load_config(const std::string& path, StudyConfig c = {}) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  parse_config(in, c, path);
  return c;
}

// Canonical echo: every setting that affects results, in a fixed order and at
// full precision. `workers` and `out` are left out so the echo (and every
// report embedding it) is identical across worker counts and output paths.
inline std::string echo_config(const StudyConfig& c) {
  using detail::format_double;
  using detail::join;
  std::ostringstream o;
  o << "env.family = " << c.family << '\n'
    << "env.params = " << join(c.params) << '\n'
    << "d = " << c.d << '\n'
    << (c.betas.size() == 1 ? "beta = " : "beta_grid = ") << join(c.betas) << '\n'
    << "m_list = " << join(c.m_list) << '\n'
    << "n_list = " << join(c.n_list) << '\n'
    << "theta_min = " << format_double(c.theta_min) << '\n'
    << "theta_grid_size = " << c.theta_grid_size << '\n'
    << "golden_tolerance = " << format_double(c.golden_tolerance) << '\n'
    << "replicas = " << c.replicas << '\n'
    << "seed = " << c.seed << '\n'
    << "beta_c.m = " << c.beta_c_m << '\n'
    << "beta_c.interval = " << format_double(c.beta_c_lo) << ',' << format_double(c.beta_c_hi) << '\n'
    << "beta_c.tolerance = " << format_double(c.beta_c_tolerance) << '\n'
    << "cascade.law = " << c.cascade_law << '\n'
    << "cascade.N = " << c.cascade_n << '\n'
    << "cascade.m = " << c.cascade_m << '\n'
    << "cascade.depths = " << join(c.cascade_depths) << '\n'
    << "cascade.trees = " << c.cascade_trees << '\n'
    << "overlap.n = " << c.overlap_n << '\n'
    << "overlap.slabs = " << c.overlap_slabs << '\n'
    << "concentration.n = " << c.concentration_n << '\n'
    << "concentration.lambdas = " << join(c.concentration_lambdas) << '\n';
  return o.str();
}

}  // namespace polycascade
