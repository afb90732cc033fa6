#pragma once

#include <stdexcept>
#include <string>

namespace benchsynth {

// Exit-code classes used by the CLI: usage 1, data 2, external service 3.
enum class ErrorClass { kUsage = 1, kData = 2, kExternal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorClass::kUsage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::kUsage, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorClass::kData, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error(ErrorClass::kData, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorClass::kData, what) {}
};

// A zero vector or other input that makes an operation undefined.
class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : Error(ErrorClass::kData, what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error(ErrorClass::kData, what) {}
};

class InsufficientPoints : public Error {
 public:
  explicit InsufficientPoints(const std::string& what)
      : Error(ErrorClass::kData, what) {}
};

class ExternalError : public Error {
 public:
  explicit ExternalError(const std::string& what)
      : Error(ErrorClass::kExternal, what) {}
};

std::string describe(ErrorClass cls);

}  // namespace benchsynth
