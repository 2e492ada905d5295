#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roughfut {

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvariantError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class InvalidParam : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
  using std::out_of_range::out_of_range;
};

class EmptyOutput : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class GridMismatch : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Option price outside the no-arbitrage band, so no implied volatility exists.
class OutOfBand : public std::domain_error {
  using std::domain_error::domain_error;
};

class AlignmentError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class InsufficientData : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DegenerateRegression : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace roughfut
