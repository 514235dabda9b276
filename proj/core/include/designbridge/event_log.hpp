#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace designbridge {

enum class EventKind {
  ProjectCreated,
  FilterApplied,
  ItemsIngested,
  Curated,
  SessionOpened,
  InteractionSubmitted,
  RoundIssued,
  ModelTrained,
  TreePruned,
  ManifestExported,
  ItemSaved,
};

std::string_view event_kind_name(EventKind kind);
EventKind event_kind_from_name(std::string_view name);

inline constexpr int kEventSchemaVersion = 1;

struct Event {
  std::int64_t seq = 0;
  std::string timestamp;
  EventKind kind = EventKind::ProjectCreated;
  nlohmann::json payload;
  std::optional<std::string> dedup_key;
  int schema_version = kEventSchemaVersion;

  /// One JSON-lines record. Timestamps are included; hashing excludes them.
  std::string to_line() const;
  static Event from_line(const std::string& line);
  /// Canonical JSON without the timestamp.
  nlohmann::json content() const;
};

/// Parsed log plus the byte length of its intact prefix.
struct LogScan {
  std::vector<Event> events;
  std::uintmax_t intact_bytes = 0;
  bool torn_tail = false;
};

/// Reads a JSON-lines log. A final line without its newline is a torn write
/// and is reported, not parsed; anything else malformed (bad JSON, seq gap)
/// throws CorruptLog naming the offending seq.
LogScan scan_log(const std::filesystem::path& path);
LogScan scan_log_text(const std::string& text);

/// Append-only, single-writer event log. With a file, every append is
/// written and fsync'd before seq is returned.
class EventLog {
 public:
  EventLog() = default;
  /// Opens or creates the file, truncating a torn tail left by a crash.
  static EventLog open(const std::filesystem::path& path);

  EventLog(EventLog&& other) noexcept;
  EventLog& operator=(EventLog&& other) noexcept;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  ~EventLog();

  /// Appends and returns the new seq (1-based). A repeated dedup key returns
  /// the seq of the original event and writes nothing. Throws StorageFull.
  std::int64_t append(EventKind kind, nlohmann::json payload, std::optional<std::string> dedup_key,
                      std::string timestamp);

  std::optional<std::int64_t> find_dedup(const std::string& key) const;
  const std::vector<Event>& events() const { return events_; }
  std::int64_t size() const { return static_cast<std::int64_t>(events_.size()); }
  const std::optional<std::filesystem::path>& path() const { return path_; }
  bool recovered_torn_tail() const { return recovered_; }

 private:
  std::vector<Event> events_;
  std::map<std::string, std::int64_t> dedup_;
  std::optional<std::filesystem::path> path_;
  int fd_ = -1;
  bool recovered_ = false;
};

}  // namespace designbridge
