#pragma once

#include <stdexcept>
#include <string>

namespace deltarl {

// Malformed config, unknown option, or a violated constructor contract.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A learner left the admissible value range mid-run.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// A direct solve failed its residual check.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// x^n by repeated multiplication; exact for n = 0 and n = 1.
inline double pow_int(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace deltarl
