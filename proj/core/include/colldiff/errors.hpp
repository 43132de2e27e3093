#pragma once

#include <stdexcept>
#include <string>

namespace colldiff {

// Base of every error the library throws. The CLI maps the concrete type to
// an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; the message carries line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose contents are inconsistent (capacity overflow,
// activation without parents, week gaps, infeasible flow margins, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// A state space that is too large to enumerate.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// A metric that is undefined on its inputs (e.g. no true positives).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace colldiff
