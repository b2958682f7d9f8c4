#pragma once

#include <stdexcept>
#include <string>

namespace areagp {

// Invalid inputs, config, or file schemas. Mapped to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Factorization failures and other numerical breakdowns. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace areagp
