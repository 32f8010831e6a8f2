#include "ctlp/error.hpp"

namespace ctlp {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParse:
      return "parse";
    case ErrorCategory::kValidation:
      return "validation";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kLlm:
      return "llm";
    case ErrorCategory::kNumeric:
      return "numeric";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParse:
      return 2;
    case ErrorCategory::kValidation:
      return 3;
    case ErrorCategory::kIo:
      return 4;
    case ErrorCategory::kConfig:
      return 5;
    case ErrorCategory::kLlm:
      return 6;
    case ErrorCategory::kNumeric:
      return 7;
  }
  return 1;
}

}  // namespace ctlp
