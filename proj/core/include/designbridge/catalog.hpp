#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "designbridge/backends.hpp"
#include "designbridge/design_space.hpp"
#include "designbridge/filter.hpp"

namespace designbridge {

enum class Origin { Framing, Informed };

std::string_view origin_name(Origin origin);
Origin origin_from_name(std::string_view name);

struct DesignItem {
  std::string item_id;
  DesignVector design_vector;
  /// Full color list; colors[0] is the dominant color encoded in design_vector.
  std::vector<int> colors;
  std::string image_ref;
  int image_width = 0;
  int image_height = 0;
  VisualEmbedding visual_embedding{};
  Origin origin = Origin::Framing;
  int display_rank = 0;
  bool deleted = false;

  nlohmann::json to_json(const DesignSpace& space) const;
  static DesignItem from_json(const DesignSpace& space, const nlohmann::json& doc);
};

struct SceneContext {
  std::string scene_text;
  std::string scene_image_ref;
  std::string garment_type;
  std::string principle;
  FilterResult filter;
};

/// Largest library generation request honored; larger counts are clamped.
inline constexpr int kMaxGenerationPerRequest = 500;

/// Draws n design vectors uniformly per dimension over the included
/// attributes. Vectors are distinct unless the included space has fewer than
/// n combinations, in which case every combination appears before any repeats.
std::vector<DesignVector> sample_design_vectors(const DesignSpace& space, const FilterResult& filter, int n,
                                                std::uint64_t seed);

/// Generates an image and embedding per vector. Items get ids from `next_id`
/// in order. A backend failure aborts the whole batch before anything is
/// returned.
std::vector<DesignItem> ingest_generated(const DesignSpace& space, const std::vector<DesignVector>& vectors,
                                         GenerationBackend& generator, EmbeddingBackend& embedder, Origin origin,
                                         const std::function<std::string()>& next_id);

struct RemoveOp {
  std::string item_id;
};
struct ReorderOp {
  std::string item_id;
  int new_rank = 0;
};
using CurateOp = std::variant<RemoveOp, ReorderOp>;

nlohmann::json curate_op_to_json(const CurateOp& op);
CurateOp curate_op_from_json(const nlohmann::json& doc);

/// Design library. Non-deleted items always hold ranks 0..k-1.
class Catalog {
 public:
  /// Appends items at the end of the display order (ranks are reassigned).
  void add(std::vector<DesignItem> items);

  /// Throws UnknownItem / AlreadyDeleted / InvalidArgument.
  void curate(const CurateOp& op);

  const DesignItem* find(const std::string& item_id) const;
  /// Non-deleted item or nullptr.
  const DesignItem* find_live(const std::string& item_id) const;

  /// Non-deleted items ordered by display rank.
  std::vector<const DesignItem*> view() const;
  /// Non-deleted item ids ordered by display rank.
  std::vector<std::string> ranking() const;
  /// All items including deleted ones, in insertion order.
  const std::vector<DesignItem>& all() const { return items_; }
  std::size_t live_count() const;

  /// Curation operations applied so far, in order.
  const std::vector<CurateOp>& history() const { return history_; }

  nlohmann::json to_json(const DesignSpace& space) const;

 private:
  void renumber(std::vector<std::size_t> order);

  std::vector<DesignItem> items_;
  std::map<std::string, std::size_t> index_;
  std::vector<CurateOp> history_;
};

}  // namespace designbridge
