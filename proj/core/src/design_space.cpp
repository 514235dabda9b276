#include "designbridge/design_space.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "designbridge/error.hpp"

namespace designbridge {

namespace embedded {
std::string_view design_space_json();
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

Zone zone_from_json(const nlohmann::json& z) {
  if (!z.is_array() || z.size() != 4) throw Error(ErrorCode::ValidationFailed, "layout zone must be [x0,y0,x1,y1]");
  Zone zone{z[0].get<double>(), z[1].get<double>(), z[2].get<double>(), z[3].get<double>()};
  if (!(0 <= zone.x0 && zone.x0 < zone.x1 && zone.x1 <= 1 && 0 <= zone.y0 && zone.y0 < zone.y1 && zone.y1 <= 1)) {
    throw Error(ErrorCode::ValidationFailed, "layout zone outside the unit square");
  }
  return zone;
}

}  // namespace

DesignSpace DesignSpace::from_json(const nlohmann::json& doc) {
  DesignSpace space;
  space.schema_version_ = doc.value("schema_version", 0);
  if (space.schema_version_ != 1) {
    throw Error(ErrorCode::ValidationFailed, fmt::format("unsupported schema_version {}", space.schema_version_));
  }
  space.name_ = doc.value("name", "");
  if (doc.contains("image")) {
    space.image_width_ = doc["image"].value("width", 768);
    space.image_height_ = doc["image"].value("height", 768);
  }
  const auto& dims = doc.at("dimensions");
  if (!dims.is_array() || dims.size() != kDimensionCount) {
    throw Error(ErrorCode::ValidationFailed, fmt::format("design space needs exactly {} dimensions", kDimensionCount));
  }
  std::set<std::string> dim_names;
  int offset = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    Dimension dim;
    dim.name = dims[d].at("name").get<std::string>();
    if (!dim_names.insert(lower(dim.name)).second) {
      throw Error(ErrorCode::ValidationFailed, "duplicate dimension name " + dim.name);
    }
    std::set<std::string> attr_names;
    for (const auto& a : dims[d].at("attributes")) {
      Attribute attr;
      attr.name = a.at("name").get<std::string>();
      if (attr.name.empty() || attr.name.find(':') != std::string::npos) {
        throw Error(ErrorCode::ValidationFailed, "bad attribute name '" + attr.name + "'");
      }
      if (!attr_names.insert(lower(attr.name)).second) {
        throw Error(ErrorCode::ValidationFailed, "duplicate attribute " + attr.name + " in " + dim.name);
      }
      if (a.contains("tags")) attr.tags = a["tags"].get<std::vector<std::string>>();
      if (a.contains("rgb")) {
        auto rgb = a["rgb"].get<std::vector<int>>();
        if (rgb.size() != 3) throw Error(ErrorCode::ValidationFailed, "rgb needs 3 channels");
        attr.rgb = std::array<std::uint8_t, 3>{static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                                               static_cast<std::uint8_t>(rgb[2])};
      }
      dim.attributes.push_back(std::move(attr));
    }
    if (dim.attributes.empty()) throw Error(ErrorCode::ValidationFailed, "dimension without attributes: " + dim.name);
    if (dims[d].contains("layout")) {
      const auto& layout = dims[d]["layout"];
      dim.layout.weight = layout.value("weight", 1.0);
      for (const auto& z : layout.value("zones", nlohmann::json::array())) dim.layout.zones.push_back(zone_from_json(z));
    }
    space.offsets_[d] = offset;
    offset += static_cast<int>(dim.attributes.size());
    space.dimensions_.push_back(std::move(dim));
  }
  if (offset != kAttributeCount) {
    throw Error(ErrorCode::ValidationFailed, fmt::format("attribute counts sum to {}, expected {}", offset, kAttributeCount));
  }
  return space;
}

const DesignSpace& DesignSpace::canonical() {
  static const DesignSpace space = from_json(nlohmann::json::parse(embedded::design_space_json()));
  return space;
}

nlohmann::json DesignSpace::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& dim : dimensions_) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : dim.attributes) {
      nlohmann::json j{{"name", a.name}, {"tags", a.tags}};
      if (a.rgb) j["rgb"] = {(*a.rgb)[0], (*a.rgb)[1], (*a.rgb)[2]};
      attrs.push_back(std::move(j));
    }
    nlohmann::json zones = nlohmann::json::array();
    for (const auto& z : dim.layout.zones) zones.push_back({z.x0, z.y0, z.x1, z.y1});
    dims.push_back({{"name", dim.name},
                    {"attributes", std::move(attrs)},
                    {"layout", {{"weight", dim.layout.weight}, {"zones", std::move(zones)}}}});
  }
  return {{"schema_version", schema_version_},
          {"name", name_},
          {"image", {{"width", image_width_}, {"height", image_height_}}},
          {"dimensions", std::move(dims)}};
}

AttributeId DesignSpace::from_flat(int index) const {
  if (index < 0 || index >= kAttributeCount) throw Error(ErrorCode::InvalidArgument, "flat index out of range");
  int d = kDimensionCount - 1;
  while (offsets_[static_cast<std::size_t>(d)] > index) --d;
  return {d, index - offsets_[static_cast<std::size_t>(d)]};
}

const std::string& DesignSpace::attribute_name(AttributeId id) const {
  if (!valid(id)) throw Error(ErrorCode::InvalidArgument, "attribute id out of range");
  return dimension(id.dimension).attributes[static_cast<std::size_t>(id.attribute)].name;
}

std::string DesignSpace::qualified_name(AttributeId id) const {
  return dimension(id.dimension).name + ":" + attribute_name(id);
}

std::string DesignSpace::key(AttributeId id) { return fmt::format("{}.{}", id.dimension, id.attribute); }

std::optional<int> DesignSpace::find_dimension(std::string_view name) const {
  const std::string needle = lower(name);
  for (int d = 0; d < kDimensionCount; ++d) {
    if (lower(dimensions_[static_cast<std::size_t>(d)].name) == needle) return d;
  }
  return std::nullopt;
}

std::optional<AttributeId> DesignSpace::find_attribute(int dimension, std::string_view name) const {
  if (dimension < 0 || dimension >= kDimensionCount) return std::nullopt;
  const std::string needle = lower(name);
  const auto& attrs = dimensions_[static_cast<std::size_t>(dimension)].attributes;
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    if (lower(attrs[a].name) == needle) return AttributeId{dimension, static_cast<int>(a)};
  }
  return std::nullopt;
}

std::optional<AttributeId> DesignSpace::parse_attribute(std::string_view text) const {
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    auto d = find_dimension(text.substr(0, colon));
    if (!d) return std::nullopt;
    return find_attribute(*d, text.substr(colon + 1));
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    int d = -1, a = -1;
    auto head = text.substr(0, dot), tail = text.substr(dot + 1);
    auto r1 = std::from_chars(head.data(), head.data() + head.size(), d);
    auto r2 = std::from_chars(tail.data(), tail.data() + tail.size(), a);
    if (r1.ec != std::errc{} || r1.ptr != head.data() + head.size() || r2.ec != std::errc{} ||
        r2.ptr != tail.data() + tail.size()) {
      return std::nullopt;
    }
    AttributeId id{d, a};
    if (valid(id)) return id;
  }
  return std::nullopt;
}

bool DesignSpace::valid(AttributeId id) const {
  return id.dimension >= 0 && id.dimension < kDimensionCount && id.attribute >= 0 &&
         id.attribute < attribute_count(id.dimension);
}

bool DesignSpace::valid(const DesignVector& v) const {
  for (int d = 0; d < kDimensionCount; ++d) {
    if (!valid(v.at(d))) return false;
  }
  return true;
}

OneHot51 encode_one_hot(const DesignSpace& space, const DesignVector& v) {
  OneHot51 out;
  for (int d = 0; d < kDimensionCount; ++d) out.bits[static_cast<std::size_t>(space.flat_index(v.at(d)))] = 1;
  return out;
}

std::optional<DesignVector> decode_one_hot(const DesignSpace& space, const OneHot51& bits) {
  DesignVector v;
  for (int d = 0; d < kDimensionCount; ++d) {
    int found = -1;
    for (int a = 0; a < space.attribute_count(d); ++a) {
      const auto bit = bits.bits[static_cast<std::size_t>(space.block_offset(d) + a)];
      if (bit > 1) return std::nullopt;
      if (bit == 1) {
        if (found >= 0) return std::nullopt;
        found = a;
      }
    }
    if (found < 0) return std::nullopt;
    v.set(d, found);
  }
  return v;
}

int hamming(const OneHot51& a, const OneHot51& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) n += a.bits[i] != b.bits[i];
  return n;
}

nlohmann::json vector_to_json(const DesignSpace& space, const DesignVector& v) {
  (void)space;
  return v.choices();
}

DesignVector vector_from_json(const DesignSpace& space, const nlohmann::json& doc) {
  DesignVector v;
  if (doc.is_array()) {
    if (doc.size() != kDimensionCount) throw Error(ErrorCode::InvalidArgument, "design vector needs 9 entries");
    for (int d = 0; d < kDimensionCount; ++d) {
      const auto& entry = doc[static_cast<std::size_t>(d)];
      if (entry.is_number_integer()) {
        v.set(d, entry.get<int>());
      } else if (entry.is_string()) {
        auto id = space.find_attribute(d, entry.get<std::string>());
        if (!id) throw Error(ErrorCode::InvalidArgument, "unknown attribute " + entry.get<std::string>());
        v.set(d, id->attribute);
      } else {
        throw Error(ErrorCode::InvalidArgument, "design vector entries must be indices or names");
      }
    }
  } else if (doc.is_object()) {
    if (doc.size() != kDimensionCount) throw Error(ErrorCode::InvalidArgument, "design vector needs all 9 dimensions");
    for (const auto& [name, value] : doc.items()) {
      auto d = space.find_dimension(name);
      if (!d) throw Error(ErrorCode::InvalidArgument, "unknown dimension " + name);
      auto id = space.find_attribute(*d, value.get<std::string>());
      if (!id) throw Error(ErrorCode::InvalidArgument, "unknown attribute " + value.get<std::string>());
      v.set(*d, id->attribute);
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "design vector must be an array or object");
  }
  if (!space.valid(v)) throw Error(ErrorCode::InvalidArgument, "design vector out of range");
  return v;
}

}  // namespace designbridge
