#pragma once

#include <stdexcept>
#include <string>

namespace viana {

// Invalid user input or configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not deliver its contract.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition of a library call.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

}  // namespace viana
