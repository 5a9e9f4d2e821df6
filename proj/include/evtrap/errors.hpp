#pragma once

#include <stdexcept>
#include <string>

namespace evtrap {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Argument outside an operation's precondition domain.
class DomainError : public Error {
public:
  using Error::Error;
};

class NoMinimum : public Error {
public:
  using Error::Error;
};

class CalibrationFailed : public Error {
public:
  CalibrationFailed(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

class StepTooLarge : public Error {
public:
  using Error::Error;
};

class NoBarrier : public Error {
public:
  using Error::Error;
};

class FitDegenerate : public Error {
public:
  using Error::Error;
};

class BadWindow : public Error {
public:
  using Error::Error;
};

class NonPhysical : public Error {
public:
  using Error::Error;
};

class EmptyCondition : public Error {
public:
  using Error::Error;
};

class NoCrossing : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  ConfigError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace evtrap
