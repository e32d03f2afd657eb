#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch, out-of-box coordinate, invalid parameter value.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Radius too small for the regularized dual to be well posed, empty
/// families, degenerate certificates.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective values or solver breakdown.
class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace wdro
