#pragma once

#include <stdexcept>
#include <string>

namespace qst {

// Input data violates a contract: unreadable file, malformed table,
// inconsistent dimensions. Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical procedure failed: estimation breakdown, overflow,
// non-convergence past the refinement cap. Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qst
