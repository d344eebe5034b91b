#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evstore {

enum class ErrorCode {
  // core model
  kDuplicateEntry,
  kIllegalCharacter,
  kInvalidName,
  kMalformedLayout,
  // tags
  kDuplicateAttributeName,
  kHashCollision,
  kUnknownAttribute,
  kKindMismatch,
  kUnknownDescriptor,
  kKindConflict,
  // commons / events
  kUnknownCommonObject,
  kTransactionRequired,
  kDuplicateEventId,
  kUnknownRef,
  kCorruptRecord,
  // storage
  kWriterBusy,
  kIoFailure,
  kCorruptJournal,
  kStoreExists,
  kNotAStore,
  // collections
  kNameExists,
  kAccessDenied,
  kBadName,
  kAlreadyOwned,
  kSyntaxError,
  kUnknownCollection,
  kUnknownPath,
  kBadPattern,
  // workloads
  kBadSpec,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// True for codes that signal damaged or inconsistent on-disk data rather
/// than a bad request.
bool is_data_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace evstore
