#include "evstore/error.hpp"

namespace evstore {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateEntry: return "DuplicateEntry";
    case ErrorCode::kIllegalCharacter: return "IllegalCharacter";
    case ErrorCode::kInvalidName: return "InvalidName";
    case ErrorCode::kMalformedLayout: return "MalformedLayout";
    case ErrorCode::kDuplicateAttributeName: return "DuplicateAttributeName";
    case ErrorCode::kHashCollision: return "HashCollision";
    case ErrorCode::kUnknownAttribute: return "UnknownAttribute";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kUnknownDescriptor: return "UnknownDescriptor";
    case ErrorCode::kKindConflict: return "KindConflict";
    case ErrorCode::kUnknownCommonObject: return "UnknownCommonObject";
    case ErrorCode::kTransactionRequired: return "TransactionRequired";
    case ErrorCode::kDuplicateEventId: return "DuplicateEventId";
    case ErrorCode::kUnknownRef: return "UnknownRef";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kWriterBusy: return "WriterBusy";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kCorruptJournal: return "CorruptJournal";
    case ErrorCode::kStoreExists: return "StoreExists";
    case ErrorCode::kNotAStore: return "NotAStore";
    case ErrorCode::kNameExists: return "NameExists";
    case ErrorCode::kAccessDenied: return "AccessDenied";
    case ErrorCode::kBadName: return "BadName";
    case ErrorCode::kAlreadyOwned: return "AlreadyOwned";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownCollection: return "UnknownCollection";
    case ErrorCode::kUnknownPath: return "UnknownPath";
    case ErrorCode::kBadPattern: return "BadPattern";
    case ErrorCode::kBadSpec: return "BadSpec";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kHashCollision:
    case ErrorCode::kCorruptRecord:
    case ErrorCode::kIoFailure:
    case ErrorCode::kCorruptJournal:
      return true;
    default:
      return false;
  }
}

}  // namespace evstore
