#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calib {

/// Bad input data: malformed log lines, out-of-range labels, empty record
/// sets handed to a metric. `line()` is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A mathematical invariant that must hold by construction was observed to
/// fail (e.g. a violated logit-distance bound). Always an implementation bug.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace calib
