// Error taxonomy shared by all umarkov modules.
#pragma once

#include <stdexcept>
#include <string>

namespace umarkov {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension out of the supported range (e.g. site count outside [1,12]),
// or an enumeration budget exceeded.
struct SizeError : Error {
  using Error::Error;
};

// Site index outside the graph.
struct SiteError : Error {
  using Error::Error;
};

// Container whose length or nesting does not match the state space / grid.
struct ShapeError : Error {
  using Error::Error;
};

// Value out of its admissible range (negative rate, lambda <= 0, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Precondition on how an operation is used (wrong grid size, policy that
// does not cover the horizon, non-increasing test function, ...).
struct UsageError : Error {
  using Error::Error;
};

// A numeric routine failed to reach its tolerance (singular solve, ...).
struct NumericalError : Error {
  using Error::Error;
};

// Malformed input text. line/column are 1-based; 0 means unknown.
struct ParseError : Error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line_, int column_)
      : Error(msg), line(line_), column(column_) {}
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace umarkov
