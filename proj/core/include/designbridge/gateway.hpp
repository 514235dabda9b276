#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "designbridge/backends.hpp"
#include "designbridge/event_log.hpp"
#include "designbridge/filter.hpp"
#include "designbridge/project.hpp"

namespace designbridge {

enum class BackendMode { Mock, External };
std::string_view backend_mode_name(BackendMode mode);
BackendMode backend_mode_from_name(std::string_view name);

/// The external-service seams of one project.
struct BackendSuite {
  BackendMode mode = BackendMode::Mock;
  std::unique_ptr<GenerationBackend> generation;
  std::unique_ptr<EmbeddingBackend> embedding;
  std::unique_ptr<TryOnBackend> tryon;
  std::unique_ptr<RegionBackend> region;
  std::unique_ptr<FramingBackend> framing;
  std::unique_ptr<FramingBackend> framing_fallback;

  /// Mock: deterministic under `seed`. External: clients with no endpoint,
  /// which report BackendUnavailable (framing falls back to the rule table).
  static BackendSuite make(BackendMode mode, const DesignSpace& space, BlobStore& blobs, std::uint64_t seed);
};

struct GatewayConfig {
  /// Without a data directory everything stays in memory.
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t default_seed = 7;
  int max_rounds = kDefaultMaxRounds;
  BackendMode mode = BackendMode::Mock;
  /// Bearer token required by the HTTP layer when set.
  std::optional<std::string> token;
  /// Event timestamps; defaults to UTC wall clock.
  std::function<std::string()> clock;
  /// Derived snapshot files are rewritten every this many events (0 = never).
  int snapshot_interval = 50;
  TrainingConfig training;
  /// Overrides backend construction (tests inject failing backends).
  std::function<BackendSuite(const ProjectConfig&, BlobStore&)> backend_factory;
};

/// JSON service behind the HTTP API. Every method takes and returns JSON
/// documents and throws Error; one writer per project, readers share.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config, const DesignSpace& space = DesignSpace::canonical());
  ~Gateway();

  nlohmann::json create_project(const nlohmann::json& body);
  nlohmann::json list_projects() const;
  nlohmann::json project_summary(const std::string& project_id) const;

  nlohmann::json framing(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json generate_library(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json curate(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json library(const std::string& project_id) const;

  nlohmann::json open_session(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json current_round(const std::string& session_id) const;
  nlohmann::json hypothesize(const std::string& session_id, const nlohmann::json& body) const;
  nlohmann::json submit_interaction(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json submit_vote(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json tryon(const std::string& session_id, const nlohmann::json& body);

  nlohmann::json consensus(const std::string& project_id) const;
  nlohmann::json palette(const std::string& project_id) const;
  nlohmann::json tree(const std::string& project_id, const std::string& attribute) const;
  nlohmann::json prune(const std::string& project_id, const std::string& attribute, const nlohmann::json& body);
  nlohmann::json export_manifest(const std::string& project_id, const std::string& attribute,
                                 const nlohmann::json& body);
  nlohmann::json informed(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json save_item(const std::string& project_id, const std::string& item_id, const nlohmann::json& body);
  nlohmann::json attribution(const std::string& project_id, const std::string& item_id) const;

  std::string state_hash(const std::string& project_id) const;
  /// Copy of a project's events.
  std::vector<Event> events(const std::string& project_id) const;
  /// Runs fn on a project's state under a shared lock.
  void inspect(const std::string& project_id, const std::function<void(const Project&)>& fn) const;

  const GatewayConfig& config() const { return config_; }
  const DesignSpace& space() const { return *space_; }
  BlobStore& blobs() { return *blobs_; }

 private:
  struct ProjectSlot;

  ProjectSlot& slot(const std::string& project_id) const;
  std::string project_of_session(const std::string& session_id) const;
  std::int64_t commit(ProjectSlot& slot, EventKind kind, nlohmann::json payload,
                      std::optional<std::string> dedup_key = std::nullopt, const PreferenceModel* trained = nullptr);
  void check_expected_offset(const ProjectSlot& slot, const nlohmann::json& body) const;
  void maybe_snapshot(ProjectSlot& slot);
  void write_snapshot(ProjectSlot& slot);
  /// Rewrite derived files that a replayed event originally produced.
  void restore_mask(ProjectSlot& slot, const Event& event);
  void restore_manifest(ProjectSlot& slot, const Event& event);
  void load_existing();
  std::unique_ptr<ProjectSlot> make_slot(const ProjectConfig& config, EventLog log);
  nlohmann::json round_json(const ProjectSlot& slot, const SessionState& session) const;
  void after_vote(ProjectSlot& slot, const std::string& session_id, nlohmann::json& response);
  std::string now() const;

  GatewayConfig config_;
  const DesignSpace* space_;
  std::unique_ptr<BlobStore> blobs_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<ProjectSlot>> projects_;
  std::map<std::string, std::string> session_index_;
  int project_counter_ = 0;
};

/// HTTP/JSON front end over a Gateway.
class HttpServer {
 public:
  explicit HttpServer(Gateway& gateway);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to an ephemeral port and returns it; -1 on failure.
  int bind_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace designbridge
