#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace bsdtq {

// Precondition or shape violation (bad index, dimension mismatch, empty input).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Numerical failure during an iterative fit. `index` is the step, round, or
// run at which the failure was detected (meaning depends on the thrower).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Malformed input file. `line` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid run configuration. `field` is the JSON path or flag at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string field)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Finite-difference oracle could not evaluate the function at a coordinate.
class OracleError : public std::runtime_error {
 public:
  OracleError(const std::string& what, std::size_t coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

}  // namespace bsdtq
