#include "designbridge/elicitation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/png.hpp"
#include "designbridge/rng.hpp"

namespace designbridge {

// ---------------------------------------------------------------- profiles

std::string_view gender_name(Gender gender) {
  switch (gender) {
    case Gender::Male: return "M";
    case Gender::Female: return "F";
    case Gender::Unspecified: return "Unspecified";
  }
  return "Unspecified";
}

Gender gender_from_name(std::string_view name) {
  if (name == "M") return Gender::Male;
  if (name == "F") return Gender::Female;
  if (name == "Unspecified" || name.empty()) return Gender::Unspecified;
  throw Error(ErrorCode::InvalidArgument, "gender must be M, F or Unspecified");
}

void UserProfile::validate() const {
  if (user_id.empty()) throw Error(ErrorCode::InvalidArgument, "user_id is required");
  if (!(height_cm >= 120 && height_cm <= 220)) {
    throw Error(ErrorCode::InvalidArgument, "height_cm must lie in [120, 220]", {{"height_cm", height_cm}});
  }
  if (!(weight_kg >= 30 && weight_kg <= 200)) {
    throw Error(ErrorCode::InvalidArgument, "weight_kg must lie in [30, 200]", {{"weight_kg", weight_kg}});
  }
}

nlohmann::json UserProfile::to_json() const {
  return {{"user_id", user_id}, {"gender", gender_name(gender)}, {"height_cm", height_cm}, {"weight_kg", weight_kg}};
}

UserProfile UserProfile::from_json(const nlohmann::json& doc) {
  UserProfile p;
  p.user_id = doc.at("user_id").get<std::string>();
  p.gender = gender_from_name(doc.value("gender", "Unspecified"));
  p.height_cm = doc.value("height_cm", 170.0);
  p.weight_kg = doc.value("weight_kg", 65.0);
  return p;
}

UserProfile resolve_profile(const UserProfile& profile, std::uint64_t seed) {
  if (profile.gender != Gender::Unspecified) return profile;
  Rng rng(seed);
  UserProfile out = profile;
  out.gender = rng.bernoulli(0.5) ? Gender::Female : Gender::Male;
  const double base_height = out.gender == Gender::Female ? 150.0 : 160.0;
  out.height_cm = std::round(base_height + rng.uniform(0.0, 35.0));
  // BMI in [18.5, 27]
  const double bmi = rng.uniform(18.5, 27.0);
  out.weight_kg = std::round(bmi * (out.height_cm / 100.0) * (out.height_cm / 100.0));
  return out;
}

// ---------------------------------------------------------------- regions & masks

bool BrushRegion::valid() const {
  return image_w > 0 && image_h > 0 && 0 <= x_min && x_min < x_max && x_max <= image_w && 0 <= y_min &&
         y_min < y_max && y_max <= image_h;
}

nlohmann::json BrushRegion::to_json() const {
  return {{"x_min", x_min}, {"y_min", y_min}, {"x_max", x_max},
          {"y_max", y_max}, {"image_w", image_w}, {"image_h", image_h}};
}

BrushRegion BrushRegion::from_json(const nlohmann::json& doc) {
  BrushRegion r;
  r.x_min = doc.at("x_min").get<int>();
  r.y_min = doc.at("y_min").get<int>();
  r.x_max = doc.at("x_max").get<int>();
  r.y_max = doc.at("y_max").get<int>();
  r.image_w = doc.at("image_w").get<int>();
  r.image_h = doc.at("image_h").get<int>();
  return r;
}

BrushRegion bounding_region(const std::vector<Point>& path, double radius, int image_w, int image_h) {
  if (path.empty()) throw Error(ErrorCode::InvalidRegion, "empty brush path");
  double x0 = path[0].x, x1 = path[0].x, y0 = path[0].y, y1 = path[0].y;
  for (const auto& p : path) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  BrushRegion r;
  r.image_w = image_w;
  r.image_h = image_h;
  r.x_min = std::clamp(static_cast<int>(std::floor(x0 - radius)), 0, image_w);
  r.y_min = std::clamp(static_cast<int>(std::floor(y0 - radius)), 0, image_h);
  r.x_max = std::clamp(static_cast<int>(std::ceil(x1 + radius)), 0, image_w);
  r.y_max = std::clamp(static_cast<int>(std::ceil(y1 + radius)), 0, image_h);
  if (r.x_max == r.x_min && r.x_max < image_w) ++r.x_max;
  if (r.y_max == r.y_min && r.y_max < image_h) ++r.y_max;
  if (!r.valid()) throw Error(ErrorCode::InvalidRegion, "brush path lies outside the image");
  return r;
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height), stride_((width + 7) / 8) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidRegion, "mask dimensions must be positive");
  packed_.assign(static_cast<std::size_t>(stride_) * static_cast<std::size_t>(height), 0);
}

bool BinaryMask::at(int x, int y) const {
  const auto byte = packed_[static_cast<std::size_t>(y) * static_cast<std::size_t>(stride_) + static_cast<std::size_t>(x / 8)];
  return (byte >> (7 - x % 8)) & 1;
}

void BinaryMask::set(int x, int y) {
  packed_[static_cast<std::size_t>(y) * static_cast<std::size_t>(stride_) + static_cast<std::size_t>(x / 8)] |=
      static_cast<std::uint8_t>(0x80u >> (x % 8));
}

std::int64_t BinaryMask::popcount() const {
  std::int64_t n = 0;
  for (auto b : packed_) n += std::popcount(b);
  return n;
}

std::vector<std::uint8_t> BinaryMask::to_png() const { return png::encode_bilevel(width_, height_, packed_); }

BinaryMask rasterize_mask(const BrushRegion& region) {
  if (!region.valid()) throw Error(ErrorCode::InvalidRegion, "invalid brush region", region.to_json());
  BinaryMask mask(region.image_w, region.image_h);
  // Fill whole bytes where possible; edges bit by bit.
  for (int y = region.y_min; y < region.y_max; ++y) {
    int x = region.x_min;
    for (; x < region.x_max && x % 8 != 0; ++x) mask.set(x, y);
    auto* row = mask.row(y);
    for (; x + 8 <= region.x_max; x += 8) row[x / 8] = 0xFF;
    for (; x < region.x_max; ++x) mask.set(x, y);
  }
  return mask;
}

nlohmann::json mask_sidecar(const std::string& item_id, const std::string& record_id, const BrushRegion& region) {
  return {{"schema_version", 1},
          {"item_id", item_id},
          {"record_id", record_id},
          {"region", region.to_json()},
          {"image_dims", {region.image_w, region.image_h}}};
}

// ---------------------------------------------------------------- records

std::string_view kind_name(InteractionKind kind) { return kind == InteractionKind::Brush ? "Brush" : "OverallVote"; }

InteractionKind kind_from_name(std::string_view name) {
  if (name == "Brush") return InteractionKind::Brush;
  if (name == "OverallVote") return InteractionKind::OverallVote;
  throw Error(ErrorCode::InvalidArgument, "unknown interaction kind " + std::string(name));
}

std::string_view polarity_name(Polarity polarity) { return polarity == Polarity::Like ? "Like" : "Dislike"; }

Polarity polarity_from_name(std::string_view name) {
  if (name == "Like" || name == "like") return Polarity::Like;
  if (name == "Dislike" || name == "dislike") return Polarity::Dislike;
  throw Error(ErrorCode::InvalidArgument, "polarity must be Like or Dislike");
}

void InteractionRecord::validate() const {
  if (kind == InteractionKind::Brush) {
    if (!region || !region->valid()) throw Error(ErrorCode::InvalidRegion, "brush records need a valid region");
    for (std::size_t i = 0; i < confirmed_dimensions.size(); ++i) {
      const int d = confirmed_dimensions[i];
      if (d < 0 || d >= kDimensionCount) throw Error(ErrorCode::InvalidArgument, "confirmed dimension out of range");
      if (i > 0 && confirmed_dimensions[i - 1] >= d) {
        throw Error(ErrorCode::InvalidArgument, "confirmed dimensions must be sorted and unique");
      }
    }
    for (std::size_t i = 0; i < hypothesis.size(); ++i) {
      if (!(hypothesis[i].confidence >= 0 && hypothesis[i].confidence <= 1)) {
        throw Error(ErrorCode::InvalidArgument, "hypothesis confidence outside [0, 1]");
      }
      if (i > 0 && hypothesis[i - 1].confidence < hypothesis[i].confidence) {
        throw Error(ErrorCode::InvalidArgument, "hypothesis must be sorted by descending confidence");
      }
    }
  } else {
    if (region || !confirmed_dimensions.empty() || !hypothesis.empty()) {
      throw Error(ErrorCode::InvalidArgument, "overall votes carry no region or dimensions");
    }
  }
  if (round_index < 0) throw Error(ErrorCode::InvalidArgument, "round index must be non-negative");
}

nlohmann::json InteractionRecord::to_json() const {
  nlohmann::json hyp = nlohmann::json::array();
  for (const auto& h : hypothesis) hyp.push_back({{"dimension", h.dimension}, {"confidence", h.confidence}});
  nlohmann::json j{{"record_id", record_id},
                   {"user_id", user_id},
                   {"session_id", session_id},
                   {"item_id", item_id},
                   {"kind", kind_name(kind)},
                   {"polarity", polarity_name(polarity)},
                   {"region", region ? region->to_json() : nlohmann::json(nullptr)},
                   {"confirmed_dimensions", confirmed_dimensions},
                   {"hypothesis", hyp},
                   {"comment", comment ? nlohmann::json(*comment) : nlohmann::json(nullptr)},
                   {"round_index", round_index}};
  return j;
}

InteractionRecord InteractionRecord::from_json(const nlohmann::json& doc) {
  InteractionRecord r;
  r.record_id = doc.value("record_id", "");
  r.user_id = doc.at("user_id").get<std::string>();
  r.session_id = doc.value("session_id", "");
  r.item_id = doc.at("item_id").get<std::string>();
  r.kind = kind_from_name(doc.at("kind").get<std::string>());
  r.polarity = polarity_from_name(doc.at("polarity").get<std::string>());
  if (doc.contains("region") && !doc["region"].is_null()) r.region = BrushRegion::from_json(doc["region"]);
  r.confirmed_dimensions = doc.value("confirmed_dimensions", std::vector<int>{});
  for (const auto& h : doc.value("hypothesis", nlohmann::json::array())) {
    r.hypothesis.push_back({h.at("dimension").get<int>(), h.at("confidence").get<double>()});
  }
  if (doc.contains("comment") && !doc["comment"].is_null()) r.comment = doc["comment"].get<std::string>();
  r.round_index = doc.value("round_index", 0);
  return r;
}

// ---------------------------------------------------------------- hypotheses

namespace {

double overlap(const Zone& a, const Zone& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return w > 0 && h > 0 ? w * h : 0.0;
}

}  // namespace

std::vector<DimensionScore> HeuristicRegionBackend::score(const DesignItem&, const BrushRegion& region) {
  const Zone brushed{static_cast<double>(region.x_min) / region.image_w, static_cast<double>(region.y_min) / region.image_h,
                     static_cast<double>(region.x_max) / region.image_w, static_cast<double>(region.y_max) / region.image_h};
  std::vector<DimensionScore> out;
  for (int d = 0; d < kDimensionCount; ++d) {
    const auto& layout = space_->dimension(d).layout;
    double inter = 0, zone_area = 0;
    for (const auto& z : layout.zones) {
      inter += overlap(brushed, z);
      zone_area += z.area();
    }
    double confidence = 0;
    if (zone_area > 0 && brushed.area() > 0) {
      const double precision = inter / brushed.area();
      const double recall = inter / zone_area;
      confidence = std::clamp(layout.weight * std::sqrt(precision * recall), 0.0, 1.0);
    }
    out.push_back({d, confidence});
  }
  return out;
}

std::vector<DimensionScore> hypothesize_dimensions(const DesignItem& item, const BrushRegion& region,
                                                   RegionBackend& backend) {
  if (!region.valid() || region.image_w != item.image_width || region.image_h != item.image_height) {
    throw Error(ErrorCode::InvalidRegion, "region does not fit the item image",
                {{"region", region.to_json()}, {"image", {item.image_width, item.image_height}}});
  }
  auto scores = backend.score(item, region);
  if (scores.size() != kDimensionCount) throw Error(ErrorCode::ValidationFailed, "region backend must score 9 dimensions");
  for (auto& s : scores) s.confidence = std::clamp(s.confidence, 0.0, 1.0);
  std::stable_sort(scores.begin(), scores.end(), [](const DimensionScore& a, const DimensionScore& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.dimension < b.dimension;
  });
  return scores;
}

// ---------------------------------------------------------------- try-on

std::string MockTryOnBackend::compose(const UserProfile& user, const DesignItem& item,
                                      const std::string& scene_image_ref, const std::string& avatar_prompt) {
  constexpr int w = 256, h = 384;
  const auto& color_attr =
      space_->dimension(kSpecificColors).attributes[static_cast<std::size_t>(item.design_vector[kSpecificColors])];
  const std::uint64_t scene_hash = derive_seed(0, scene_image_ref);
  const std::uint64_t prompt_hash = derive_seed(1, avatar_prompt);
  std::array<png::Rgb, 4> palette{
      png::Rgb{static_cast<std::uint8_t>(120 + scene_hash % 100), static_cast<std::uint8_t>(140 + (scene_hash >> 8) % 100),
               static_cast<std::uint8_t>(150 + (scene_hash >> 16) % 100)},
      png::Rgb{static_cast<std::uint8_t>(200 + prompt_hash % 40), 180, 160},
      color_attr.rgb.value_or(png::Rgb{128, 128, 128}), png::Rgb{60, 60, 70}};
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w * h), 0);
  // Silhouette size follows height and build.
  const double scale = std::clamp(user.height_cm / 220.0, 0.5, 1.0);
  const double bmi = user.weight_kg / ((user.height_cm / 100.0) * (user.height_cm / 100.0));
  const int body_h = static_cast<int>(h * 0.9 * scale);
  const int body_w = static_cast<int>(w * std::clamp(0.25 + (bmi - 18.0) * 0.012, 0.2, 0.5));
  const int top = h - body_h, cx = w / 2;
  const int head = body_h / 8;
  for (int y = top; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dx = x - cx;
      std::uint8_t idx = 0;
      if (y < top + head) {
        const int dy = y - (top + head / 2);
        if (dx * dx + dy * dy <= (head / 2) * (head / 2)) idx = 1;
      } else if (std::abs(dx) <= body_w / 2) {
        const bool torso = y < top + head + body_h * 45 / 100;
        idx = torso ? 2 : 3;
      }
      pixels[static_cast<std::size_t>(y * w + x)] = idx;
    }
  }
  return blobs_->put(png::encode_indexed(w, h, palette, pixels));
}

std::string UnavailableTryOnBackend::compose(const UserProfile&, const DesignItem&, const std::string&,
                                             const std::string&) {
  throw Error(ErrorCode::BackendUnavailable, "try-on service is not configured");
}

TryOnResult request_tryon(const UserProfile& user, const DesignItem& item, const SceneContext& scene,
                          TryOnBackend& backend) {
  if (user.gender == Gender::Unspecified) {
    throw Error(ErrorCode::InvalidArgument, "try-on needs a resolved profile");
  }
  TryOnResult result;
  result.avatar_prompt = render_avatar_prompt(user.gender, user.height_cm, user.weight_kg);
  result.blob_id = backend.compose(user, item, scene.scene_image_ref, result.avatar_prompt);
  return result;
}

// ---------------------------------------------------------------- log

SubmitAck InteractionLog::submit(InteractionRecord record, const std::optional<std::string>& dedup_key,
                                 bool item_known, bool session_open) {
  if (dedup_key) {
    if (auto prior = find_dedup(*dedup_key)) return {*prior, true};
  }
  if (!session_open) throw Error(ErrorCode::SessionClosed, "session is closed");
  if (!item_known) throw Error(ErrorCode::UnknownItem, "unknown item " + record.item_id, {{"item_id", record.item_id}});
  record.validate();
  record.record_id = next_record_id();
  SubmitAck ack{record.record_id, false};
  restore(std::move(record), dedup_key);
  return ack;
}

void InteractionLog::restore(InteractionRecord record, const std::optional<std::string>& dedup_key) {
  if (by_id_.count(record.record_id)) throw Error(ErrorCode::ValidationFailed, "duplicate record id " + record.record_id);
  if (dedup_key) dedup_[*dedup_key] = record.record_id;
  if (record.kind == InteractionKind::OverallVote) {
    auto& [likes, dislikes] = votes_[record.item_id];
    (record.polarity == Polarity::Like ? likes : dislikes) += 1;
  }
  by_id_[record.record_id] = records_.size();
  records_.push_back(std::move(record));
}

std::optional<std::string> InteractionLog::find_dedup(const std::string& key) const {
  auto it = dedup_.find(key);
  if (it == dedup_.end()) return std::nullopt;
  return it->second;
}

const InteractionRecord* InteractionLog::find(const std::string& record_id) const {
  auto it = by_id_.find(record_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::string InteractionLog::next_record_id() const { return fmt::format("rec-{:06d}", records_.size() + 1); }

int InteractionLog::likes(const std::string& item_id) const {
  auto it = votes_.find(item_id);
  return it == votes_.end() ? 0 : it->second.first;
}

int InteractionLog::dislikes(const std::string& item_id) const {
  auto it = votes_.find(item_id);
  return it == votes_.end() ? 0 : it->second.second;
}

std::string export_interactions_jsonl(const std::vector<InteractionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    auto j = r.to_json();
    j["schema_version"] = 1;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace designbridge
