#pragma once

#include <stdexcept>
#include <string>

namespace snpirt {

// all library failures derive from this so callers can catch one type
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// invalid parameter values or dimensions
class DomainError : public Error {
public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// fitting failures that cannot be expressed as a flagged result
class EstimationError : public Error {
public:
  explicit EstimationError(const std::string& msg) : Error(msg) {}
};

// covariance assembly / test statistic failures
class InferenceError : public Error {
public:
  explicit InferenceError(const std::string& msg) : Error(msg) {}
};

// malformed input data
class IngestionError : public Error {
public:
  explicit IngestionError(const std::string& msg) : Error(msg) {}
};

// simulation study level failures
class StudyError : public Error {
public:
  explicit StudyError(const std::string& msg) : Error(msg) {}
};

} // namespace snpirt
