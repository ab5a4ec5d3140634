#pragma once

#include <stdexcept>
#include <string>

namespace robsel {

// All failures that callers are expected to handle carry one of these types.
// Non-convergence of an iterative fit is NOT an error; it is reported as a
// value (FitResult::converged == false).

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// malformed config document, unknown key, bad CLI usage -> exit code 2
struct ConfigError : Error {
  using Error::Error;
};

// unreadable/malformed data file, missing column, non-numeric cell
struct DataError : Error {
  using Error::Error;
};

// invalid argument combinations detected at a contract boundary
struct ContractError : Error {
  using Error::Error;
};

// linear predictor outside the family's admissible domain
struct DomainError : Error {
  using Error::Error;
};

// rank-deficient (weighted) design matrix
struct SingularDesignError : Error {
  using Error::Error;
};

// non-finite intermediate where the contract demands finite values
struct NumericError : Error {
  using Error::Error;
};

// scale estimate collapsed to zero (all residuals identical, ...)
struct DegenerateScaleError : Error {
  using Error::Error;
};

// too many bootstrap replicates had to be skipped
struct BootstrapDegeneracyError : Error {
  using Error::Error;
};

// operation not defined for the given estimator kind
struct UnsupportedError : Error {
  using Error::Error;
};

// no row permutation yields a nonsingular leading block
struct ReorderingError : Error {
  using Error::Error;
};

}  // namespace robsel
