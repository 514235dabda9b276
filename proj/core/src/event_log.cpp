#include "designbridge/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "designbridge/error.hpp"

namespace designbridge {

namespace {

constexpr std::array<std::string_view, 11> kKindNames = {
    "ProjectCreated",       "FilterApplied", "ItemsIngested", "Curated",          "SessionOpened", "InteractionSubmitted",
    "RoundIssued",          "ModelTrained",  "TreePruned",    "ManifestExported", "ItemSaved",
};

Error corrupt(std::int64_t seq, const std::string& why) {
  return Error(ErrorCode::CorruptLog, fmt::format("event log is corrupt at seq {}: {}", seq, why), {{"seq", seq}});
}

}  // namespace

std::string_view event_kind_name(EventKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

EventKind event_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  throw Error(ErrorCode::ValidationFailed, "unknown event kind " + std::string(name));
}

nlohmann::json Event::content() const {
  return {{"seq", seq},
          {"kind", event_kind_name(kind)},
          {"payload", payload},
          {"dedup_key", dedup_key ? nlohmann::json(*dedup_key) : nlohmann::json()},
          {"schema_version", schema_version}};
}

std::string Event::to_line() const {
  auto doc = content();
  doc["timestamp"] = timestamp;
  return doc.dump() + "\n";
}

Event Event::from_line(const std::string& line) {
  const auto doc = nlohmann::json::parse(line);
  Event e;
  e.seq = doc.at("seq").get<std::int64_t>();
  e.timestamp = doc.value("timestamp", "");
  e.kind = event_kind_from_name(doc.at("kind").get<std::string>());
  e.payload = doc.at("payload");
  if (doc.contains("dedup_key") && !doc["dedup_key"].is_null()) e.dedup_key = doc["dedup_key"].get<std::string>();
  e.schema_version = doc.value("schema_version", kEventSchemaVersion);
  if (e.schema_version != kEventSchemaVersion) {
    throw Error(ErrorCode::ValidationFailed, fmt::format("unsupported event schema version {}", e.schema_version));
  }
  return e;
}

LogScan scan_log_text(const std::string& text) {
  LogScan scan;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::int64_t expected = static_cast<std::int64_t>(scan.events.size()) + 1;
    if (nl == std::string::npos) {
      scan.torn_tail = true;
      break;
    }
    const std::string line = text.substr(pos, nl - pos);
    Event e;
    try {
      e = Event::from_line(line);
    } catch (const std::exception& ex) {
      throw corrupt(expected, ex.what());
    }
    if (e.seq != expected) throw corrupt(expected, fmt::format("found seq {}", e.seq));
    scan.events.push_back(std::move(e));
    pos = nl + 1;
    scan.intact_bytes = pos;
  }
  return scan;
}

LogScan scan_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return scan_log_text(buf.str());
}

EventLog EventLog::open(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  EventLog log;
  auto scan = scan_log(path);
  log.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (log.fd_ < 0) throw Error(ErrorCode::StorageFull, fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
  if (scan.torn_tail) {
    if (::ftruncate(log.fd_, static_cast<off_t>(scan.intact_bytes)) != 0 || ::fsync(log.fd_) != 0) {
      throw Error(ErrorCode::StorageFull, "cannot truncate torn log tail");
    }
    log.recovered_ = true;
  }
  if (::lseek(log.fd_, 0, SEEK_END) < 0) throw Error(ErrorCode::StorageFull, "cannot seek event log");
  log.path_ = path;
  log.events_ = std::move(scan.events);
  for (const auto& e : log.events_) {
    if (e.dedup_key) log.dedup_.emplace(*e.dedup_key, e.seq);
  }
  return log;
}

EventLog::EventLog(EventLog&& other) noexcept
    : events_(std::move(other.events_)),
      dedup_(std::move(other.dedup_)),
      path_(std::move(other.path_)),
      fd_(other.fd_),
      recovered_(other.recovered_) {
  other.fd_ = -1;
}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    events_ = std::move(other.events_);
    dedup_ = std::move(other.dedup_);
    path_ = std::move(other.path_);
    fd_ = other.fd_;
    recovered_ = other.recovered_;
    other.fd_ = -1;
  }
  return *this;
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::int64_t EventLog::append(EventKind kind, nlohmann::json payload, std::optional<std::string> dedup_key,
                              std::string timestamp) {
  if (dedup_key) {
    if (auto seq = find_dedup(*dedup_key)) return *seq;
  }
  if (!payload.is_object()) throw Error(ErrorCode::ValidationFailed, "event payload must be an object");
  Event e;
  e.seq = size() + 1;
  e.timestamp = std::move(timestamp);
  e.kind = kind;
  e.payload = std::move(payload);
  e.dedup_key = std::move(dedup_key);
  if (fd_ >= 0) {
    const std::string line = e.to_line();
    const off_t start = ::lseek(fd_, 0, SEEK_END);
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        const int err = errno;
        // Best effort: drop the partial line so the file stays parseable.
        if (start >= 0 && ::ftruncate(fd_, start) != 0) errno = err;
        throw Error(ErrorCode::StorageFull,
                    fmt::format("event log write failed: {}", std::strerror(err)));
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(ErrorCode::StorageFull, "event log fsync failed");
  }
  if (e.dedup_key) dedup_.emplace(*e.dedup_key, e.seq);
  events_.push_back(std::move(e));
  return size();
}

std::optional<std::int64_t> EventLog::find_dedup(const std::string& key) const {
  auto it = dedup_.find(key);
  if (it == dedup_.end()) return std::nullopt;
  return it->second;
}

}  // namespace designbridge
