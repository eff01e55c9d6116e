#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace mnarsens {

// Error taxonomy shared by the library and the CLI exit codes:
//   io_error -> 1, validation_error -> 2, convergence_error -> 3,
//   anything else -> 4 (internal).
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File was readable but a cell could not be parsed as the declared type.
class parse_error : public io_error {
 public:
  parse_error(const std::string& msg, long row, const std::string& column)
      : io_error(msg), row(row), column(column) {}
  long row;
  std::string column;
};

class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  validation_error(const std::string& msg, long row)
      : std::runtime_error(msg + " (row " + std::to_string(row) + ")"), row(row) {}
  long row = -1;
};

// Iterative solver failed; carries the last iterate for post-mortems.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& msg, Eigen::VectorXd last)
      : std::runtime_error(msg), last_iterate(std::move(last)) {}
  explicit convergence_error(const std::string& msg) : std::runtime_error(msg) {}
  Eigen::VectorXd last_iterate;
};

class internal_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mnarsens
