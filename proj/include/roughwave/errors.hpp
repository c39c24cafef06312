#pragma once

#include <stdexcept>
#include <string>

namespace roughwave {

// Bad argument or precondition violation. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment configuration. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature or embedding failure; carries the tolerance actually reached.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace roughwave
