#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spreaddiv {

/// Experiment description in a diff-friendly key=value format:
///
///   [experiment]
///   name=fig2c
///   seed=7
///   out=results/fig2c
///
///   [params]
///   sigma2=0.5
///
/// Unknown sections, unknown [experiment] keys, duplicate keys and type
/// mismatches are parse errors naming the key and line. Parameter keys are
/// validated later against the experiment's schema.
struct ExperimentSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> params;  // insertion order

  bool has_param(const std::string& key) const;
  std::string param(const std::string& key, const std::string& fallback) const;
  double param_double(const std::string& key, double fallback) const;
  long param_long(const std::string& key, long fallback) const;

  bool operator==(const ExperimentSpec& other) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

ExperimentSpec parse_config(const std::string& text);
std::string serialize_config(const ExperimentSpec& spec);

}  // namespace spreaddiv
