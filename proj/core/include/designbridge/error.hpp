#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace designbridge {

enum class ErrorCode {
  InvalidArgument,
  ValidationFailed,
  MissingDetail,
  BackendUnavailable,
  UnknownProject,
  UnknownSession,
  UnknownItem,
  UnknownNode,
  AlreadyDeleted,
  AlreadyPruned,
  SessionClosed,
  InvalidRegion,
  EmptyBatch,
  NoCandidates,
  IncompleteSelection,
  StaleSnapshot,
  Conflict,
  StorageFull,
  CorruptLog,
  Unauthorized,
  NotFound,
};

/// Stable upper-snake-case name used on the wire, e.g. "UNKNOWN_PROJECT".
std::string_view code_name(ErrorCode code);

/// HTTP status the gateway reports for an error code.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  /// {code, message, details}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace designbridge
