#pragma once

#include <stdexcept>
#include <string>

namespace entroflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// numerics
struct InvalidMatrix : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct EmptyProblem : Error { using Error::Error; };
struct DivergedDerivative : Error { using Error::Error; };

// features
struct RangeViolation : Error { using Error::Error; };
struct RedundantMode : Error { using Error::Error; };
struct ZeroMode : Error { using Error::Error; };
struct DegenerateDirection : Error { using Error::Error; };
struct BadGrid : Error { using Error::Error; };

// mdp
struct NotSimplex : Error { using Error::Error; };
struct CostOutOfRange : Error { using Error::Error; };

// evaluation / gradflow
struct NotConverged : Error {
  double residual;
  NotConverged(const std::string& msg, double r) : Error(msg), residual(r) {}
};
struct NotRealizable : Error {
  double residual;
  NotRealizable(const std::string& msg, double r) : Error(msg), residual(r) {}
};
struct DegenerateGeometry : Error { using Error::Error; };
struct StepFailure : Error { using Error::Error; };
struct DivergedFlow : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };

// cli
struct ConfigError : Error {
  int line;
  std::string field;
  ConfigError(const std::string& msg, int line_no = 0, std::string fld = {})
      : Error(msg), line(line_no), field(std::move(fld)) {}
};
struct IoError : Error { using Error::Error; };

}  // namespace entroflow
