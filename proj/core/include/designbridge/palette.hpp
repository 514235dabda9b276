#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "designbridge/attribution.hpp"
#include "designbridge/catalog.hpp"
#include "designbridge/consensus.hpp"
#include "designbridge/elicitation.hpp"
#include "designbridge/prompts.hpp"

namespace designbridge {

enum class Classification { Liked, Disliked };
std::string_view classification_name(Classification c);

struct TreeLeaf {
  std::string record_id;
  std::string user_id;
  InteractionKind kind = InteractionKind::OverallVote;
  Polarity polarity = Polarity::Like;
  std::optional<BrushRegion> region;
  std::optional<std::string> comment;
  bool pruned = false;
  bool operator==(const TreeLeaf&) const = default;
};

struct GarmentNode {
  std::string item_id;
  int likes = 0;
  int dislikes = 0;
  double like_ratio = 0.5;
  int comment_count = 0;
  Classification classification = Classification::Disliked;
  bool pruned = false;
  std::vector<TreeLeaf> leaves;
  bool operator==(const GarmentNode&) const = default;
};

/// Attribute-rooted view of the garments that carry the attribute and the
/// interactions on them: overall votes plus brushes confirming the root's
/// dimension.
struct PreferenceTree {
  AttributeId root;
  std::vector<GarmentNode> garment_nodes;

  const GarmentNode* find_garment(const std::string& item_id) const;
  bool operator==(const PreferenceTree&) const = default;
  nlohmann::json to_json(const DesignSpace& space) const;
};

/// Explicit exclusions for one attribute tree.
struct PruneSet {
  std::set<std::string> garments;
  std::set<std::string> records;

  bool empty() const { return garments.empty() && records.empty(); }
  std::string hash() const;
  bool operator==(const PruneSet&) const = default;
  nlohmann::json to_json() const;
  static PruneSet from_json(const nlohmann::json& doc);
};

struct PruneTarget {
  enum class Kind { Garment, Record } kind = Kind::Garment;
  std::string id;

  nlohmann::json to_json() const;
  static PruneTarget from_json(const nlohmann::json& doc);
};

/// like_ratio = likes / (likes + dislikes) over unpruned overall votes, 0.5
/// without votes. Liked iff ratio > 0.5. Liked nodes first, then by
/// descending ratio, then ascending item id.
PreferenceTree build_tree(const DesignSpace& space, AttributeId root, std::span<const DesignItem* const> items,
                          const std::vector<InteractionRecord>& records, const PruneSet& prune_set = {});

/// Marks a garment (and its leaves) or a single leaf pruned and recomputes
/// ratios and ordering. Throws UnknownNode / AlreadyPruned.
PreferenceTree prune(const PreferenceTree& tree, const PruneTarget& target);
/// Reverses prune. Throws UnknownNode, or InvalidArgument if not pruned.
PreferenceTree unprune(const PreferenceTree& tree, const PruneTarget& target);

/// Validates a target against a tree and adds/removes it from a prune set.
void apply_prune(PruneSet& set, const PreferenceTree& tree, const PruneTarget& target, bool undo);

struct LossWeights {
  double clip = 0.6;
  double local = 0.4;
};

struct Stage1Config {
  int lora_rank = 64;
  double learning_rate = 4e-4;
  int steps = 1500;
  int resolution = 768;
  std::string trigger = "real garment";
};

struct ManifestEntry {
  std::string item_id;
  std::string image_ref;
  std::string mask_ref;
  std::string mask_sha256;
  BrushRegion region;
  std::string prompt;
  std::vector<std::string> record_ids;
  std::string user_id;
  std::optional<std::string> comment;
};

struct FineTuneManifest {
  AttributeId attribute;
  std::vector<ManifestEntry> entries;
  LossWeights loss_weights;
  Stage1Config stage1_config;
  std::int64_t log_offset = 0;
  std::string prune_set_hash;

  nlohmann::json to_json(const DesignSpace& space) const;
};

struct EmptyManifest {
  AttributeId attribute;
  std::string reason;
};

struct ManifestBundle {
  FineTuneManifest manifest;
  /// Mask PNG bytes keyed by mask_ref.
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> masks;
};

using ManifestResult = std::variant<ManifestBundle, EmptyManifest>;

/// Trainer-facing documentation block embedded in every manifest.
std::string manifest_readme();

/// One entry per unpruned Like brush confirming the root dimension on an
/// unpruned garment with like_ratio strictly above 0.5.
ManifestResult export_manifest(const DesignSpace& space, const PreferenceTree& tree,
                               const std::function<const DesignItem*(const std::string&)>& lookup,
                               const std::vector<InteractionRecord>& records, std::int64_t log_offset,
                               const PruneSet& prune_set);

/// Writes manifest.json, masks/<record>.png and masks/<record>.json under dir.
void write_manifest(const std::filesystem::path& dir, const DesignSpace& space, const ManifestBundle& bundle);

/// Puzzle area: at most one attribute per dimension.
struct PuzzleSelection {
  PartialSelection slots{};

  bool complete() const;
  DesignVector to_vector() const;
  std::string prompt_text(const DesignSpace& space) const { return render_template(space, slots); }
  static PuzzleSelection from_json(const DesignSpace& space, const nlohmann::json& doc);
};

struct PaletteEntry {
  int attribute = 0;
  double acs_norm = 0.5;
  double acs_raw = 0.5;
};

/// Per-dimension puzzle columns ordered by consensus.
std::vector<std::vector<PaletteEntry>> palette_columns(const DesignSpace& space, const ConsensusReport& report);

struct UserModelRef {
  std::string user_id;
  const Ppnn* net = nullptr;
};

struct InformedItem {
  DesignItem item;
  std::string prompt;
  ShapleyReport attribution;
};

/// Generates n informed items from a complete selection and attributes each
/// user's predicted reaction. Throws IncompleteSelection / MissingDetail /
/// BackendUnavailable.
std::vector<InformedItem> informed_generate(const DesignSpace& space, const PuzzleSelection& selection,
                                            const DetailMap& detail, const std::vector<std::string>& adapters, int n,
                                            GenerationBackend& generator, EmbeddingBackend& embedder,
                                            const std::vector<UserModelRef>& users, const AttributionConfig& config,
                                            const std::function<std::string()>& next_id);

}  // namespace designbridge
