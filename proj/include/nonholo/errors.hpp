#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace nonholo {

/// Shortest round-trip decimal text of v, for messages.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Function evaluated outside its domain (sqrt of a negative, log of a
/// non-positive number, division by zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownFunction : public ParseError {
 public:
  UnknownFunction(const std::string& name, std::size_t offset)
      : ParseError("unknown function '" + name + "'", offset), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class UnboundName : public Error {
 public:
  explicit UnboundName(const std::string& name)
      : Error("unbound name '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Leaf-velocity Jacobian of an implicit constraint is (numerically) singular.
class SingularJacobian : public Error {
 public:
  SingularJacobian(const std::string& what, double cond) : Error(what), cond_(cond) {}
  double cond() const { return cond_; }

 private:
  double cond_;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// The bilinear form h is degenerate (the Lagrangian is not C-regular).
class Degenerate : public Error {
 public:
  Degenerate(const std::string& what, double cond) : Error(what), cond_(cond) {}
  double cond() const { return cond_; }

 private:
  double cond_;
};

class WrongKind : public Error {
 public:
  using Error::Error;
};

class TimeDependentInput : public Error {
 public:
  using Error::Error;
};

class WrongTimeFlags : public Error {
 public:
  using Error::Error;
};

class SingularityReached : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class ChartError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nonholo
