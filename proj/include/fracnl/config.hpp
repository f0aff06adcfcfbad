#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fracnl/errors.hpp"
#include "fracnl/harness.hpp"

namespace fracnl {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidArgument(std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

inline int parse_int(const std::string& s, const char* what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidArgument(std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// "0.4,0.7" -> {0.4, 0.7}
inline std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : detail::split_list(text)) {
    const double a = detail::parse_double(item, "alpha");
    require_fractional_order(a, "alpha");
    out.push_back(a);
  }
  return out;
}

/// "6..9" -> {6, 7, 8, 9}; also accepts "7" and "3,5,6".
inline std::vector<int> parse_levels(const std::string& text) {
  const std::string s = detail::trim(text);
  const auto dots = s.find("..");
  std::vector<int> out;
  if (dots != std::string::npos) {
    const int lo = detail::parse_int(detail::trim(s.substr(0, dots)), "level range");
    const int hi = detail::parse_int(detail::trim(s.substr(dots + 2)), "level range");
    if (lo > hi) throw InvalidArgument("empty level range '" + s + "'");
    for (int l = lo; l <= hi; ++l) out.push_back(l);
  } else {
    for (const auto& item : detail::split_list(s)) out.push_back(detail::parse_int(item, "level"));
  }
  for (int l : out) {
    if (l < 1 || l > 20) throw InvalidArgument("level " + std::to_string(l) + " out of range 1..20");
  }
  return out;
}

inline std::vector<NormKind> parse_norm_list(const std::string& text) {
  std::vector<NormKind> out;
  for (const auto& item : detail::split_list(text)) out.push_back(parse_norm_kind(item));
  return out;
}

inline ForcingSample parse_forcing(const std::string& s) {
  if (s == "average") return ForcingSample::shifted_average;
  if (s == "point") return ForcingSample::shifted_point;
  throw InvalidArgument("unknown forcing sampling '" + s + "' (expected average or point)");
}

/// Sets one RunConfig field from its textual key and value.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "problem") {
    cfg.problem = value;
  } else if (key == "alpha") {
    cfg.alphas = parse_alpha_list(value);
  } else if (key == "levels") {
    cfg.levels = parse_levels(value);
  } else if (key == "norms") {
    cfg.norms = parse_norm_list(value);
  } else if (key == "tol") {
    cfg.tol = detail::parse_double(value, "tol");
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "load_degree") {
    cfg.load_degree = detail::parse_int(value, "load_degree");
  } else if (key == "error_degree") {
    cfg.error_degree = detail::parse_int(value, "error_degree");
  } else if (key == "gradient_degree") {
    cfg.gradient_degree = detail::parse_int(value, "gradient_degree");
  } else if (key == "forcing") {
    cfg.forcing = parse_forcing(value);
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

/// key=value lines grouped by "[section]" headers. Keys before any header
/// belong to the section "". Blank lines and lines starting with '#' or ';'
/// are ignored.
struct ConfigFile {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;

  /// Entries of the unnamed section, then "[common]", then `section`, in file order.
  std::vector<std::pair<std::string, std::string>> entries_for(const std::string& section) const {
    std::vector<std::pair<std::string, std::string>> out;
    std::vector<std::string> names{"", "common"};
    if (section != "" && section != "common") names.push_back(section);
    for (const auto& name : names) {
      const auto it = sections.find(name);
      if (it != sections.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
  }
};

inline ConfigFile parse_config(std::istream& in) {
  ConfigFile cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  cfg.sections[section];
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw InvalidArgument("config line " + std::to_string(lineno) + ": malformed section header");
      }
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      cfg.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    cfg.sections[section].emplace_back(key, value);
  }
  return cfg;
}

inline ConfigFile parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ConfigFile load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
  return parse_config(in);
}

/// Applies the entries relevant to `section` on top of `cfg`.
inline void apply_config(RunConfig& cfg, const ConfigFile& file, const std::string& section) {
  for (const auto& [key, value] : file.entries_for(section)) apply_setting(cfg, key, value);
}

}  // namespace fracnl
