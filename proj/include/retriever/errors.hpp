#pragma once

#include <stdexcept>
#include <string>

namespace retriever {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Carries the offending field path, e.g. "objects[1].id".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnknownEntity : public Error {
 public:
  explicit UnknownEntity(const std::string& id) : Error("unknown entity '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class EmptyTarget : public Error {
 public:
  EmptyTarget() : Error("target point set is empty") {}
};

class NoFeasibleCandidate : public Error {
 public:
  NoFeasibleCandidate() : Error("all view candidates were culled") {}
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

class ReasonerError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public ReasonerError {
 public:
  using ReasonerError::ReasonerError;
};

class SchemaError : public ReasonerError {
 public:
  using ReasonerError::ReasonerError;
};

class OutOfRange : public ReasonerError {
 public:
  using ReasonerError::ReasonerError;
};

/// Per-instruction reasoner call budget used up; not a reasoner fault.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded() : Error("reasoner call budget exhausted") {}
};

}  // namespace retriever
