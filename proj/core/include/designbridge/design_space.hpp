#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace designbridge {

inline constexpr int kDimensionCount = 9;
inline constexpr int kAttributeCount = 51;
inline constexpr int kVisualSize = 50;
inline constexpr int kFeatureSize = kAttributeCount + kVisualSize;

/// Canonical dimension indices.
enum Dim : int {
  kType = 0,
  kSleeveLength = 1,
  kCollarShape = 2,
  kWearingStyle = 3,
  kPatternStyle = 4,
  kPatternArrangement = 5,
  kMaterial = 6,
  kColorCategory = 7,
  kSpecificColors = 8,
};

/// Axis-aligned rectangle in normalized image coordinates, [x0, x1) x [y0, y1).
struct Zone {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const { return (x1 - x0) * (y1 - y0); }
};

/// Where on a garment image a dimension is usually visible; feeds the
/// heuristic brush-region scorer.
struct LayoutPrior {
  double weight = 1.0;
  std::vector<Zone> zones;
};

struct Attribute {
  std::string name;
  std::vector<std::string> tags;
  std::optional<std::array<std::uint8_t, 3>> rgb;
};

struct Dimension {
  std::string name;
  std::vector<Attribute> attributes;
  LayoutPrior layout;
};

struct AttributeId {
  int dimension = 0;
  int attribute = 0;
  auto operator<=>(const AttributeId&) const = default;
};

/// One attribute chosen per dimension. Entry d always belongs to dimension d.
class DesignVector {
 public:
  DesignVector() { choice_.fill(0); }
  explicit DesignVector(std::array<int, kDimensionCount> choice) : choice_(choice) {}

  int operator[](int dimension) const { return choice_[static_cast<std::size_t>(dimension)]; }
  AttributeId at(int dimension) const { return {dimension, (*this)[dimension]}; }
  void set(int dimension, int attribute) { choice_[static_cast<std::size_t>(dimension)] = attribute; }
  const std::array<int, kDimensionCount>& choices() const { return choice_; }

  bool operator==(const DesignVector&) const = default;
  auto operator<=>(const DesignVector&) const = default;

 private:
  std::array<int, kDimensionCount> choice_;
};

struct OneHot51 {
  std::array<std::uint8_t, kAttributeCount> bits{};
  bool operator==(const OneHot51&) const = default;
};

/// The garment design space: 9 ordered dimensions, 51 attributes.
/// Immutable after construction.
class DesignSpace {
 public:
  /// Parses and validates a schema document (see core/data/design_space.json).
  static DesignSpace from_json(const nlohmann::json& doc);

  /// The shipped upper-body garment schema.
  static const DesignSpace& canonical();

  nlohmann::json to_json() const;

  int schema_version() const { return schema_version_; }
  std::span<const Dimension> dimensions() const { return dimensions_; }
  const Dimension& dimension(int d) const { return dimensions_.at(static_cast<std::size_t>(d)); }
  int attribute_count(int d) const { return static_cast<int>(dimension(d).attributes.size()); }

  /// Start of dimension d's block in the 51-wide one-hot layout.
  int block_offset(int d) const { return offsets_.at(static_cast<std::size_t>(d)); }
  int flat_index(AttributeId id) const { return block_offset(id.dimension) + id.attribute; }
  AttributeId from_flat(int index) const;

  const std::string& attribute_name(AttributeId id) const;
  /// "Dimension:Attribute", globally unique.
  std::string qualified_name(AttributeId id) const;
  /// "d.a", used in URLs.
  static std::string key(AttributeId id);

  std::optional<int> find_dimension(std::string_view name) const;
  std::optional<AttributeId> find_attribute(int dimension, std::string_view name) const;
  /// Accepts "Dimension:Attribute" or "d.a".
  std::optional<AttributeId> parse_attribute(std::string_view text) const;

  bool valid(AttributeId id) const;
  bool valid(const DesignVector& v) const;

  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }

 private:
  int schema_version_ = 1;
  std::string name_;
  int image_width_ = 768;
  int image_height_ = 768;
  std::vector<Dimension> dimensions_;
  std::array<int, kDimensionCount> offsets_{};
};

OneHot51 encode_one_hot(const DesignSpace& space, const DesignVector& v);

/// Inverse of encode_one_hot; nullopt unless every block has exactly one set bit.
std::optional<DesignVector> decode_one_hot(const DesignSpace& space, const OneHot51& bits);

/// Hamming distance between two one-hot encodings.
int hamming(const OneHot51& a, const OneHot51& b);

nlohmann::json vector_to_json(const DesignSpace& space, const DesignVector& v);
DesignVector vector_from_json(const DesignSpace& space, const nlohmann::json& doc);

}  // namespace designbridge
