#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "designbridge/backends.hpp"
#include "designbridge/catalog.hpp"
#include "designbridge/prompts.hpp"

namespace designbridge {

struct UserProfile {
  std::string user_id;
  Gender gender = Gender::Unspecified;
  double height_cm = 170;
  double weight_kg = 65;

  /// Throws InvalidArgument when height/weight are out of range.
  void validate() const;

  nlohmann::json to_json() const;
  static UserProfile from_json(const nlohmann::json& doc);
};

std::string_view gender_name(Gender gender);
Gender gender_from_name(std::string_view name);

/// Replaces an unspecified gender with a seeded random mannequin
/// (gender, height, weight). Specified profiles are returned unchanged.
UserProfile resolve_profile(const UserProfile& profile, std::uint64_t seed);

/// Pixel rectangle [x_min, x_max) x [y_min, y_max) on an image_w x image_h image.
struct BrushRegion {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  int image_w = 0, image_h = 0;

  bool valid() const;
  std::int64_t area() const { return static_cast<std::int64_t>(x_max - x_min) * (y_max - y_min); }
  bool operator==(const BrushRegion&) const = default;

  nlohmann::json to_json() const;
  static BrushRegion from_json(const nlohmann::json& doc);
};

struct Point {
  double x = 0, y = 0;
};

/// Bounding box of a freeform stroke grown by the brush radius and clamped
/// to the image. Throws InvalidRegion for empty paths or degenerate boxes.
BrushRegion bounding_region(const std::vector<Point>& path, double radius, int image_w, int image_h);

/// Row-major bit image, MSB-first within each byte, rows padded to whole bytes.
class BinaryMask {
 public:
  BinaryMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int stride() const { return stride_; }
  bool at(int x, int y) const;
  void set(int x, int y);
  std::int64_t popcount() const;
  const std::vector<std::uint8_t>& packed() const { return packed_; }
  std::uint8_t* row(int y) { return packed_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(stride_); }

  /// 1-bit grayscale PNG; set bits are white.
  std::vector<std::uint8_t> to_png() const;

 private:
  int width_, height_, stride_;
  std::vector<std::uint8_t> packed_;
};

/// mask(x, y) = 1 iff x in [x_min, x_max) and y in [y_min, y_max).
BinaryMask rasterize_mask(const BrushRegion& region);

/// Sidecar document written next to a mask PNG.
nlohmann::json mask_sidecar(const std::string& item_id, const std::string& record_id, const BrushRegion& region);

enum class InteractionKind { Brush, OverallVote };
enum class Polarity { Like, Dislike };

std::string_view kind_name(InteractionKind kind);
InteractionKind kind_from_name(std::string_view name);
std::string_view polarity_name(Polarity polarity);
Polarity polarity_from_name(std::string_view name);

struct DimensionScore {
  int dimension = 0;
  double confidence = 0;
  bool operator==(const DimensionScore&) const = default;
};

struct InteractionRecord {
  std::string record_id;
  std::string user_id;
  std::string session_id;
  std::string item_id;
  InteractionKind kind = InteractionKind::OverallVote;
  Polarity polarity = Polarity::Like;
  std::optional<BrushRegion> region;
  /// Sorted, unique dimension indices (Brush only).
  std::vector<int> confirmed_dimensions;
  /// All 9 dimensions, descending confidence (Brush only).
  std::vector<DimensionScore> hypothesis;
  std::optional<std::string> comment;
  int round_index = 0;

  /// Throws InvalidRegion / InvalidArgument on shape violations.
  void validate() const;
  bool operator==(const InteractionRecord&) const = default;

  nlohmann::json to_json() const;
  static InteractionRecord from_json(const nlohmann::json& doc);
};

/// Brush-region to dimension mapping seam.
class RegionBackend {
 public:
  virtual ~RegionBackend() = default;
  /// Must return all 9 dimensions with confidences in [0, 1].
  virtual std::vector<DimensionScore> score(const DesignItem& item, const BrushRegion& region) = 0;
};

/// Scores each dimension by weight * sqrt(precision * recall) of the brushed
/// rectangle against the dimension's layout zones.
class HeuristicRegionBackend final : public RegionBackend {
 public:
  explicit HeuristicRegionBackend(const DesignSpace& space) : space_(&space) {}
  std::vector<DimensionScore> score(const DesignItem& item, const BrushRegion& region) override;

 private:
  const DesignSpace* space_;
};

/// Full 9-dimension ranking, descending confidence, ties by dimension index.
/// Throws InvalidRegion if the region does not match the item's image.
std::vector<DimensionScore> hypothesize_dimensions(const DesignItem& item, const BrushRegion& region,
                                                   RegionBackend& backend);

struct TryOnResult {
  std::string blob_id;
  std::string avatar_prompt;
};

class TryOnBackend {
 public:
  virtual ~TryOnBackend() = default;
  virtual std::string compose(const UserProfile& user, const DesignItem& item, const std::string& scene_image_ref,
                              const std::string& avatar_prompt) = 0;
};

/// Draws the garment color block onto a gray silhouette whose proportions
/// follow height/weight, over a background keyed on the scene image.
class MockTryOnBackend final : public TryOnBackend {
 public:
  MockTryOnBackend(const DesignSpace& space, BlobStore& blobs) : space_(&space), blobs_(&blobs) {}
  std::string compose(const UserProfile& user, const DesignItem& item, const std::string& scene_image_ref,
                      const std::string& avatar_prompt) override;

 private:
  const DesignSpace* space_;
  BlobStore* blobs_;
};

class UnavailableTryOnBackend final : public TryOnBackend {
 public:
  std::string compose(const UserProfile&, const DesignItem&, const std::string&, const std::string&) override;
};

/// Renders the avatar prompt and asks the backend for a composite. The
/// profile must already be resolved (no Unspecified gender).
TryOnResult request_tryon(const UserProfile& user, const DesignItem& item, const SceneContext& scene,
                          TryOnBackend& backend);

struct SubmitAck {
  std::string record_id;
  bool duplicate = false;
};

/// Append-only interaction store shared by all sessions of a project.
/// Record ids are assigned in submission order ("rec-000001", ...).
class InteractionLog {
 public:
  /// Checks the dedup key, validates and appends. `item_known` decides
  /// UnknownItem; `session_open` decides SessionClosed.
  SubmitAck submit(InteractionRecord record, const std::optional<std::string>& dedup_key, bool item_known,
                   bool session_open);

  /// Appends a record that already carries its id (replay path).
  void restore(InteractionRecord record, const std::optional<std::string>& dedup_key);

  std::optional<std::string> find_dedup(const std::string& key) const;
  const std::vector<InteractionRecord>& records() const { return records_; }
  const InteractionRecord* find(const std::string& record_id) const;
  std::string next_record_id() const;

  /// Overall-vote counts per item.
  int likes(const std::string& item_id) const;
  int dislikes(const std::string& item_id) const;

 private:
  std::vector<InteractionRecord> records_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::string> dedup_;
  std::map<std::string, std::pair<int, int>> votes_;
};

/// JSON-lines export, one schema-versioned record per line.
std::string export_interactions_jsonl(const std::vector<InteractionRecord>& records);

}  // namespace designbridge
