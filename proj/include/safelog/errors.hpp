#pragma once

#include <stdexcept>
#include <string>

namespace safelog {

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

// Simplex hit its pivot cap or lost numerical footing.
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleProblem : std::runtime_error {
  explicit InfeasibleProblem(const std::string& what) : std::runtime_error(what) {}
};

struct CutLimitExceeded : std::runtime_error {
  explicit CutLimitExceeded(const std::string& what) : std::runtime_error(what) {}
};

// Production policy violates the safety constraint and no safe point exists.
struct InfeasibleStart : std::runtime_error {
  explicit InfeasibleStart(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::invalid_argument {
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// IDX input errors.
struct BadMagic : std::runtime_error {
  explicit BadMagic(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct TruncatedFile : std::runtime_error {
  explicit TruncatedFile(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace safelog
