#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lincqa {

enum class ErrorCode {
  kSyntaxError,
  kUnknownRelation,
  kArityMismatch,
  kUnsafeHead,
  kUnknownVariable,
  kSelfJoin,
  kNotAcyclic,
  kTooManyAtoms,
  kNoPpjt,
  kInvalidCertificate,
  kUnboundPredicate,
  kMissingFile,
  kHeaderMismatch,
  kRaggedRow,
  kTooManyRepairs,
  kInvalidSpec,
  kDisconnectedQuery,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this type; `code()` distinguishes them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lincqa
