#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ruleflow {

enum class ErrorCode {
  kSyntax,
  kUndeclaredSymbol,
  kDuplicateSymbol,
  kUnknownDatasource,
  kUnknownRule,
  kInvalidStateTransition,
  kPastTimestamp,
  kDuplicateConditionType,
  kReservedConditionType,
  kUnknownConditionType,
  kDuplicateActionType,
  kUnknownActionType,
  kTypeMismatch,
  kDivisionByZero,
  kUnresolvedVariable,
  kNonBooleanCondition,
  kArity,
  kValueParse,
  kConnectionFailed,
  kPublishFailed,
  kShutdown,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure carrying the originating rule field and character offset.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::string field, std::size_t offset,
             const std::string& message)
      : Error(code, field + ":" + std::to_string(offset) + ": " + message),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const { return field_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

[[noreturn]] inline void throw_syntax(const std::string& field,
                                      std::size_t offset,
                                      const std::string& what) {
  throw ParseError(ErrorCode::kSyntax, field, offset, what);
}

}  // namespace ruleflow
