#include "spreaddiv/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace spreaddiv {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

}  // namespace

bool ExperimentSpec::has_param(const std::string& key) const {
  return std::any_of(params.begin(), params.end(),
                     [&](const auto& kv) { return kv.first == key; });
}

std::string ExperimentSpec::param(const std::string& key, const std::string& fallback) const {
  for (const auto& kv : params)
    if (kv.first == key) return kv.second;
  return fallback;
}

double ExperimentSpec::param_double(const std::string& key, double fallback) const {
  for (const auto& kv : params) {
    if (kv.first != key) continue;
    char* end = nullptr;
    const double v = std::strtod(kv.second.c_str(), &end);
    if (end == kv.second.c_str() || *end != '\0')
      throw ConfigError("param '" + key + "': expected a number, got '" + kv.second + "'");
    return v;
  }
  return fallback;
}

long ExperimentSpec::param_long(const std::string& key, long fallback) const {
  for (const auto& kv : params) {
    if (kv.first != key) continue;
    char* end = nullptr;
    const long v = std::strtol(kv.second.c_str(), &end, 10);
    if (end == kv.second.c_str() || *end != '\0')
      throw ConfigError("param '" + key + "': expected an integer, got '" + kv.second + "'");
    return v;
  }
  return fallback;
}

ExperimentSpec parse_config(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  enum class Section { None, Experiment, Params } section = Section::None;
  bool saw_name = false, saw_seed = false, saw_out = false;

  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      const std::string name = s.substr(1, s.size() - 2);
      if (name == "experiment")
        section = Section::Experiment;
      else if (name == "params")
        section = Section::Params;
      else
        fail(line, "unknown section [" + name + "]");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key=value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    switch (section) {
      case Section::None:
        fail(line, "key '" + key + "' outside any section");
      case Section::Experiment:
        if (key == "name") {
          if (saw_name) fail(line, "duplicate key 'name'");
          saw_name = true;
          spec.name = value;
        } else if (key == "seed") {
          if (saw_seed) fail(line, "duplicate key 'seed'");
          saw_seed = true;
          char* end = nullptr;
          spec.seed = std::strtoull(value.c_str(), &end, 10);
          if (end == value.c_str() || *end != '\0')
            fail(line, "key 'seed': expected an unsigned integer");
        } else if (key == "out") {
          if (saw_out) fail(line, "duplicate key 'out'");
          saw_out = true;
          spec.out_dir = value;
        } else {
          fail(line, "unknown key '" + key + "' in [experiment]");
        }
        break;
      case Section::Params:
        if (spec.has_param(key)) fail(line, "duplicate key '" + key + "'");
        spec.params.emplace_back(key, value);
        break;
    }
  }
  if (!saw_name) throw ConfigError("config: missing required key 'name' in [experiment]");
  return spec;
}

std::string serialize_config(const ExperimentSpec& spec) {
  std::string out = "[experiment]\n";
  out += "name=" + spec.name + "\n";
  out += "seed=" + std::to_string(spec.seed) + "\n";
  if (!spec.out_dir.empty()) out += "out=" + spec.out_dir + "\n";
  if (!spec.params.empty()) {
    out += "\n[params]\n";
    for (const auto& kv : spec.params) out += kv.first + "=" + kv.second + "\n";
  }
  return out;
}

}  // namespace spreaddiv
