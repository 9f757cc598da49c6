#pragma once

#include <stdexcept>
#include <string>

namespace growthiv {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input data or configuration that violates a documented contract.
class ValidationError : public Error {
public:
  using Error::Error;
};

// A design matrix or cross-product that is not of full rank.
class RankError : public Error {
public:
  using Error::Error;
};

// Numerical failure (non-convergence, degenerate eigenproblem, non-finite values).
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace growthiv
