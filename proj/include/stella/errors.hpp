#pragma once

#include <stdexcept>
#include <string>

namespace stella {

// Violated precondition or API misuse (shape mismatch, bad rank, ...).
class ContractError : public std::invalid_argument {
public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure: solver non-convergence, rank deficiency, non-finite data.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stella
