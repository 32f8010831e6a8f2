#pragma once

#include <stdexcept>
#include <string>

namespace ctlp {

enum class ErrorCategory {
  kParse,
  kValidation,
  kIo,
  kConfig,
  kLlm,
  kNumeric,
};

const char* to_string(ErrorCategory category);

// Exit code used by the CLI for a given category. 0 is reserved for success.
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error(ErrorCategory::kParse, message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCategory::kValidation, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCategory::kIo, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorCategory::kConfig, message) {}
};

class LlmError : public Error {
 public:
  explicit LlmError(const std::string& message) : Error(ErrorCategory::kLlm, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error(ErrorCategory::kNumeric, message) {}
};

}  // namespace ctlp
