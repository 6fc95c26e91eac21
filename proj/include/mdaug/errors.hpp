#ifndef MDAUG_ERRORS_HPP
#define MDAUG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mdaug {

// Error categories map 1:1 onto CLI exit codes (1/2/3).

// Bad invocation, bad configuration, inconsistent options.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or out-of-contract input data (files, records, sample sizes).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown (non-finite results, factorization failures).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mdaug

#endif  // MDAUG_ERRORS_HPP
