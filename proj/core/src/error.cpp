#include "designbridge/error.hpp"

namespace designbridge {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::ValidationFailed: return "VALIDATION_FAILED";
    case ErrorCode::MissingDetail: return "MISSING_DETAIL";
    case ErrorCode::BackendUnavailable: return "BACKEND_UNAVAILABLE";
    case ErrorCode::UnknownProject: return "UNKNOWN_PROJECT";
    case ErrorCode::UnknownSession: return "UNKNOWN_SESSION";
    case ErrorCode::UnknownItem: return "UNKNOWN_ITEM";
    case ErrorCode::UnknownNode: return "UNKNOWN_NODE";
    case ErrorCode::AlreadyDeleted: return "ALREADY_DELETED";
    case ErrorCode::AlreadyPruned: return "ALREADY_PRUNED";
    case ErrorCode::SessionClosed: return "SESSION_CLOSED";
    case ErrorCode::InvalidRegion: return "INVALID_REGION";
    case ErrorCode::EmptyBatch: return "EMPTY_BATCH";
    case ErrorCode::NoCandidates: return "NO_CANDIDATES";
    case ErrorCode::IncompleteSelection: return "INCOMPLETE_SELECTION";
    case ErrorCode::StaleSnapshot: return "STALE_SNAPSHOT";
    case ErrorCode::Conflict: return "CONFLICT";
    case ErrorCode::StorageFull: return "STORAGE_FULL";
    case ErrorCode::CorruptLog: return "CORRUPT_LOG";
    case ErrorCode::Unauthorized: return "UNAUTHORIZED";
    case ErrorCode::NotFound: return "NOT_FOUND";
  }
  return "UNKNOWN";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ValidationFailed:
    case ErrorCode::MissingDetail:
    case ErrorCode::InvalidRegion:
    case ErrorCode::EmptyBatch:
    case ErrorCode::IncompleteSelection:
      return 400;
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::UnknownProject:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownItem:
    case ErrorCode::UnknownNode:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyDeleted:
    case ErrorCode::AlreadyPruned:
    case ErrorCode::SessionClosed:
    case ErrorCode::StaleSnapshot:
    case ErrorCode::Conflict:
    case ErrorCode::NoCandidates:
      return 409;
    case ErrorCode::BackendUnavailable:
      return 503;
    case ErrorCode::StorageFull:
      return 507;
    case ErrorCode::CorruptLog:
      return 500;
  }
  return 500;
}

nlohmann::json Error::to_json() const {
  return {{"code", code_name(code_)}, {"message", what()}, {"details", details_}};
}

}  // namespace designbridge
