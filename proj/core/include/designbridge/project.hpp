#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "designbridge/catalog.hpp"
#include "designbridge/consensus.hpp"
#include "designbridge/elicitation.hpp"
#include "designbridge/event_log.hpp"
#include "designbridge/palette.hpp"
#include "designbridge/preference_model.hpp"

namespace designbridge {

inline constexpr int kDefaultMaxRounds = 6;

struct ProjectConfig {
  std::string project_id;
  std::string name;
  std::uint64_t seed = 0;
  int max_rounds = kDefaultMaxRounds;
  /// Entropy or Random for rounds after the cold start.
  Strategy strategy = Strategy::Entropy;

  nlohmann::json to_json() const;
  static ProjectConfig from_json(const nlohmann::json& doc);
};

struct SessionState {
  std::string session_id;
  UserProfile profile;
  std::vector<RecommendationRound> rounds;
  std::set<std::string> shown;
  /// Items with an overall vote, per round index.
  std::map<int, std::set<std::string>> voted;
  PreferenceModel model;
  bool closed = false;

  const RecommendationRound* current_round() const { return rounds.empty() ? nullptr : &rounds.back(); }
  bool round_complete() const;
  int label_count() const;
};

struct ExportedManifest {
  AttributeId attribute;
  std::int64_t log_offset = 0;
  std::string prune_set_hash;
  std::string manifest_sha256;
  int entries = 0;
};

/// Aggregate project state. Every mutation arrives as an Event through
/// apply(); replaying a log reproduces the live state exactly.
class Project {
 public:
  explicit Project(const DesignSpace& space, TrainingConfig training = {});

  /// Applies the next event. `trained` may carry a model the caller already
  /// fitted for a ModelTrained event; otherwise the model is refit from
  /// history. Throws CorruptLog on any inconsistency.
  void apply(const Event& event, const PreferenceModel* trained = nullptr);

  const DesignSpace& space() const { return *space_; }
  bool created() const { return created_; }
  const ProjectConfig& config() const { return config_; }
  std::int64_t log_offset() const { return offset_; }

  const std::optional<SceneContext>& scene() const { return scene_; }
  FilterResult active_filter() const;
  const Catalog& catalog() const { return catalog_; }
  const InteractionLog& interactions() const { return interactions_; }
  const std::map<std::string, SessionState>& sessions() const { return sessions_; }
  const SessionState* session(const std::string& session_id) const;
  /// Distinct user ids in session-open order.
  std::vector<std::string> users() const;
  const std::map<std::string, DesignItem>& staged() const { return staged_; }
  const PruneSet& prune_set(AttributeId attribute) const;
  const std::map<AttributeId, PruneSet>& prune_sets() const { return prune_sets_; }
  const std::vector<ExportedManifest>& manifests() const { return manifests_; }

  /// Live catalog item or staged informed item.
  const DesignItem* find_item(const std::string& item_id) const;
  std::string next_item_id(std::size_t offset = 0) const;
  std::string next_session_id() const;

  /// Training examples of a session's votes in one round, in vote order.
  std::vector<TrainingExample> round_examples(const SessionState& session, int round_index) const;

  /// Canonical state document (no timestamps).
  nlohmann::json to_json() const;
  /// SHA-256 of to_json().dump().
  std::string state_hash() const;

 private:
  void apply_payload(const Event& event, const PreferenceModel* trained);
  SessionState& session_mut(const std::string& session_id);

  const DesignSpace* space_;
  TrainingConfig training_;
  bool created_ = false;
  ProjectConfig config_;
  std::int64_t offset_ = 0;
  std::optional<SceneContext> scene_;
  Catalog catalog_;
  std::uint64_t item_counter_ = 0;
  InteractionLog interactions_;
  std::map<std::string, SessionState> sessions_;
  std::vector<std::string> session_order_;
  std::map<std::string, DesignItem> staged_;
  std::map<AttributeId, PruneSet> prune_sets_;
  std::vector<ExportedManifest> manifests_;
};

/// Rebuilds project state from events. Throws CorruptLog with the seq.
Project replay(const DesignSpace& space, std::span<const Event> events, TrainingConfig training = {});

}  // namespace designbridge
