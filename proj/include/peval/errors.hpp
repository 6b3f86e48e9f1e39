#ifndef PEVAL_ERRORS_HPP
#define PEVAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace peval {

// Error categories map 1:1 onto CLI exit codes (1/2/3).

/// Bad user input: malformed model, invalid parameter range, dimension mismatch.
class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure: non-convergence, enumeration cap exceeded, overflow.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem or serialization failure.
class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace peval

#endif
