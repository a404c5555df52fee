#pragma once

#include <stdexcept>
#include <string>

namespace ubna {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something that violates an operation precondition.
class InvalidInput : public Error {
public:
  using Error::Error;
};

// Internal state broke an invariant the library itself maintains.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

// A protocol constraint was violated (ordering, clock, frame accounting).
class ProtocolViolation : public Error {
public:
  using Error::Error;
};

class TrainingFailure : public Error {
public:
  TrainingFailure(int step, const std::string& what)
      : Error("training failed at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

// Every subset class has an empty IoU denominator.
class UndefinedMetric : public Error {
public:
  using Error::Error;
};

class LoadError : public Error {
public:
  enum class Kind { VersionMismatch, CorruptHeader, TruncatedTensors, InvalidState };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

}  // namespace ubna
