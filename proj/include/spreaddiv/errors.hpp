#pragma once

#include <stdexcept>
#include <string>

namespace spreaddiv {

/// Iterative routine hit its iteration cap before reaching tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spreaddiv
