#pragma once

#include <stdexcept>
#include <string>

namespace ctxbandit {

// Caller broke a precondition (dimension mismatch, missing argument, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Factorization failed or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad config keys/values or malformed data files. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace detail
}  // namespace ctxbandit
