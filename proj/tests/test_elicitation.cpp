#include <gtest/gtest.h>
#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <sstream>

#include "designbridge/elicitation.hpp"
#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"
#include "golden_masks.hpp"
#include "support.hpp"

using namespace dbt;

namespace {

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

struct DecodedBilevel {
  int width = 0, height = 0;
  std::vector<std::vector<bool>> pixels;
};

/// Minimal PNG reader for 1-bit grayscale images with filter type 0 rows.
DecodedBilevel decode_bilevel_png(const std::vector<std::uint8_t>& png) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  EXPECT_EQ(std::memcmp(png.data(), sig, 8), 0);
  std::size_t pos = 8;
  DecodedBilevel out;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= png.size()) {
    const std::uint32_t len = be32(&png[pos]);
    const std::string type(reinterpret_cast<const char*>(&png[pos + 4]), 4);
    const std::uint8_t* data = &png[pos + 8];
    const std::uint32_t crc = be32(&png[pos + 8 + len]);
    EXPECT_EQ(crc, static_cast<std::uint32_t>(::crc32(0, &png[pos + 4], len + 4))) << type;
    if (type == "IHDR") {
      out.width = static_cast<int>(be32(data));
      out.height = static_cast<int>(be32(data + 4));
      EXPECT_EQ(data[8], 1);   // bit depth
      EXPECT_EQ(data[9], 0);   // grayscale
      EXPECT_EQ(data[12], 0);  // no interlace
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    }
    pos += 12 + len;
  }
  const std::size_t stride = (static_cast<std::size_t>(out.width) + 7) / 8;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(out.height));
  uLongf raw_len = raw.size();
  EXPECT_EQ(::uncompress(raw.data(), &raw_len, idat.data(), idat.size()), Z_OK);
  EXPECT_EQ(raw_len, raw.size());
  out.pixels.assign(static_cast<std::size_t>(out.height), std::vector<bool>(static_cast<std::size_t>(out.width)));
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t* row = &raw[static_cast<std::size_t>(y) * (stride + 1)];
    EXPECT_EQ(row[0], 0);
    for (int x = 0; x < out.width; ++x) {
      out.pixels[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = (row[1 + x / 8] >> (7 - x % 8)) & 1;
    }
  }
  return out;
}

std::vector<int> ranking(const std::vector<DimensionScore>& scores) {
  std::vector<int> out;
  for (const auto& s : scores) out.push_back(s.dimension);
  return out;
}

DesignItem sample_item() {
  return make_item("item-000001",
                   vector_of({"T-shirt", "Short", "V", "Pullover", "Pure", "Focus", "Cotton", "Monochromatic", "Black"}));
}

}  // namespace

TEST(Hypothesis, LeftFlankBrushRanksSleeveLengthFirst) {
  HeuristicRegionBackend backend(space());
  // Left sleeve zone is x in [0, 0.2), y in [0.15, 0.9) of a 768 px image.
  const BrushRegion left{0, 116, 153, 691, 768, 768};
  const auto h = hypothesize_dimensions(sample_item(), left, backend);
  ASSERT_EQ(h.size(), 9u);
  EXPECT_EQ(h.front().dimension, kSleeveLength);
}

TEST(Hypothesis, FullImageFollowsTheWholeGarmentPrior) {
  // Full-image brush: precision = zone area, recall = 1, so the score is
  // weight * sqrt(area). Layout file: pattern/colour/material zones cover
  // 0.9 x 0.9 (area 0.81) with weights 1.0, 0.85, 0.9, 0.95, 1.0; Type covers
  // 0.6 x 0.85 at weight 0.8; both sleeve flanks 2 x 0.2 x 0.75; Wearing Style
  // 0.2 x 0.75; Collar 0.4 x 0.2.
  //   Pattern Style 0.9, Specific Colors 0.9, Color Category 0.855,
  //   Material 0.81, Pattern Arrangement 0.765, Type 0.5713,
  //   Sleeve Length 0.5477, Wearing Style 0.3873, Collar Shape 0.2828
  HeuristicRegionBackend backend(space());
  const auto h = hypothesize_dimensions(sample_item(), full_region(), backend);
  EXPECT_EQ(ranking(h), (std::vector<int>{kPatternStyle, kSpecificColors, kColorCategory, kMaterial,
                                          kPatternArrangement, kType, kSleeveLength, kWearingStyle, kCollarShape}));
  EXPECT_NEAR(h[0].confidence, 0.9, 1e-9);
  EXPECT_NEAR(h[2].confidence, 0.855, 1e-9);
}

TEST(Hypothesis, DeterministicTotalAndBounded) {
  HeuristicRegionBackend backend(space());
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const int x0 = static_cast<int>(rng.index(767)), y0 = static_cast<int>(rng.index(767));
    const int x1 = x0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(768 - x0)));
    const int y1 = y0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(768 - y0)));
    const BrushRegion r{x0, y0, x1, y1, 768, 768};
    const auto a = hypothesize_dimensions(sample_item(), r, backend);
    const auto b = hypothesize_dimensions(sample_item(), r, backend);
    ASSERT_EQ(a, b);
    ASSERT_EQ(a.size(), 9u);
    std::vector<bool> seen(9, false);
    for (std::size_t k = 0; k < a.size(); ++k) {
      seen[static_cast<std::size_t>(a[k].dimension)] = true;
      ASSERT_GE(a[k].confidence, 0.0);
      ASSERT_LE(a[k].confidence, 1.0);
      if (k) {
        ASSERT_GE(a[k - 1].confidence, a[k].confidence);
      }
    }
    ASSERT_EQ(std::count(seen.begin(), seen.end(), true), 9);
  }
}

TEST(Hypothesis, RegionMustMatchTheItemImage) {
  HeuristicRegionBackend backend(space());
  try {
    hypothesize_dimensions(sample_item(), full_region(512, 512), backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidRegion);
  }
}

TEST(Regions, BoundingBoxGrowsByRadiusAndClamps) {
  const auto r = bounding_region({{10, 20}, {30, 25}, {15, 40}}, 5, 768, 768);
  EXPECT_EQ(r, (BrushRegion{5, 15, 35, 45, 768, 768}));
  const auto edge = bounding_region({{2, 760}}, 8, 768, 768);
  EXPECT_EQ(edge.x_min, 0);
  EXPECT_EQ(edge.y_max, 768);
  EXPECT_THROW(bounding_region({}, 5, 768, 768), Error);
}

TEST(Regions, ValidityFollowsTheHalfOpenBounds) {
  EXPECT_TRUE((BrushRegion{0, 0, 1, 1, 4, 4}).valid());
  EXPECT_FALSE((BrushRegion{1, 0, 1, 1, 4, 4}).valid());
  EXPECT_FALSE((BrushRegion{0, 0, 5, 1, 4, 4}).valid());
  EXPECT_FALSE((BrushRegion{-1, 0, 2, 1, 4, 4}).valid());
}

TEST(Masks, FullImageIsAllOnes) {
  const auto m = rasterize_mask(full_region(37, 11));
  EXPECT_EQ(m.popcount(), 37 * 11);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 37; ++x) ASSERT_TRUE(m.at(x, y));
}

TEST(Masks, SinglePixelAtOrigin) {
  const auto m = rasterize_mask({0, 0, 1, 1, 4, 4});
  EXPECT_EQ(m.popcount(), 1);
  EXPECT_TRUE(m.at(0, 0));
  EXPECT_FALSE(m.at(1, 0));
  EXPECT_FALSE(m.at(0, 1));
}

TEST(Masks, PopcountEqualsAreaAndPixelsMatchTheFormula) {
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const int w = 1 + static_cast<int>(rng.index(300)), h = 1 + static_cast<int>(rng.index(300));
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(w)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(h)));
    const int x1 = x0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(w - x0)));
    const int y1 = y0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(h - y0)));
    const BrushRegion r{x0, y0, x1, y1, w, h};
    const auto m = rasterize_mask(r);
    ASSERT_EQ(m.popcount(), static_cast<std::int64_t>(x1 - x0) * (y1 - y0));
    if (i % 50 == 0) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ASSERT_EQ(m.at(x, y), x >= x0 && x < x1 && y >= y0 && y < y1);
    }
  }
}

TEST(Masks, PngDecodesToTheSameBitsAndIsByteStable) {
  const BrushRegion r{13, 7, 301, 455, 768, 768};
  const auto png = rasterize_mask(r).to_png();
  EXPECT_EQ(png, rasterize_mask(r).to_png());
  const auto decoded = decode_bilevel_png(png);
  ASSERT_EQ(decoded.width, 768);
  ASSERT_EQ(decoded.height, 768);
  std::int64_t white = 0;
  for (int y = 0; y < 768; ++y) {
    for (int x = 0; x < 768; ++x) {
      const bool inside = x >= 13 && x < 301 && y >= 7 && y < 455;
      ASSERT_EQ(decoded.pixels[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)], inside);
      white += inside;
    }
  }
  EXPECT_EQ(white, r.area());
}

TEST(Masks, GoldenPngsMatchCheckedInBytes) {
  const char* write_to = std::getenv("DB_WRITE_GOLDEN_MASKS");
  for (const auto& c : golden::kMasks) {
    const auto png = rasterize_mask(c.region).to_png();
    if (write_to) {
      std::filesystem::create_directories(write_to);
      std::ofstream(std::filesystem::path(write_to) / c.file, std::ios::binary)
          .write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    }
    EXPECT_EQ(png, golden::read_bytes(golden::mask_dir() / c.file)) << c.file;
  }
}

TEST(Masks, SidecarCarriesIdsRegionAndDims) {
  const BrushRegion r{1, 2, 3, 4, 768, 768};
  const auto doc = mask_sidecar("item-000002", "rec-000009", r);
  EXPECT_EQ(doc["item_id"], "item-000002");
  EXPECT_EQ(doc["record_id"], "rec-000009");
  EXPECT_EQ(BrushRegion::from_json(doc["region"]), r);
  EXPECT_EQ(doc["image_dims"], (nlohmann::json{768, 768}));
}

TEST(Interactions, VotesCountAndDedupIsIdempotent) {
  InteractionLog log;
  auto v = vote("", "u1", "item-000001", Polarity::Like);
  const auto a = log.submit(v, std::string("k1"), true, true);
  EXPECT_EQ(a.record_id, "rec-000001");
  EXPECT_EQ(log.likes("item-000001"), 1);
  const auto b = log.submit(v, std::string("k1"), true, true);
  EXPECT_TRUE(b.duplicate);
  EXPECT_EQ(b.record_id, "rec-000001");
  EXPECT_EQ(log.likes("item-000001"), 1);
  EXPECT_EQ(log.records().size(), 1u);
}

TEST(Interactions, BrushWithoutConfirmedDimensionsIsAccepted) {
  InteractionLog log;
  const auto ack = log.submit(brush("", "u1", "item-000001", Polarity::Dislike, {}), std::nullopt, true, true);
  EXPECT_FALSE(ack.duplicate);
  EXPECT_TRUE(log.find(ack.record_id)->confirmed_dimensions.empty());
}

TEST(Interactions, ErrorsForUnknownItemClosedSessionAndBadRegion) {
  InteractionLog log;
  auto expect_code = [&](ErrorCode code, InteractionRecord r, bool known, bool open) {
    try {
      log.submit(std::move(r), std::nullopt, known, open);
      FAIL() << code_name(code);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  expect_code(ErrorCode::UnknownItem, vote("", "u", "x", Polarity::Like), false, true);
  expect_code(ErrorCode::SessionClosed, vote("", "u", "x", Polarity::Like), true, false);
  expect_code(ErrorCode::InvalidRegion, brush("", "u", "x", Polarity::Like, {1}, {5, 5, 5, 9, 768, 768}), true, true);
  auto bad = vote("", "u", "x", Polarity::Like);
  bad.confirmed_dimensions = {1};
  expect_code(ErrorCode::InvalidArgument, bad, true, true);
  expect_code(ErrorCode::InvalidArgument, brush("", "u", "x", Polarity::Like, {3, 1}), true, true);
  EXPECT_TRUE(log.records().empty());
}

TEST(Interactions, JsonLinesExportRecoversEveryRecord) {
  InteractionLog log;
  auto b = brush("", "u1", "item-000004", Polarity::Like, {1, 4}, {3, 4, 100, 200, 768, 768});
  b.hypothesis = {{4, 0.9}, {1, 0.5}, {0, 0.1}};
  b.comment = "love the \"sleeve\",\nreally";
  log.submit(b, std::nullopt, true, true);
  log.submit(vote("", "u2", "item-000004", Polarity::Dislike), std::nullopt, true, true);
  const auto text = export_interactions_jsonl(log.records());
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto doc = nlohmann::json::parse(line);
    EXPECT_TRUE(doc.contains("schema_version"));
    EXPECT_EQ(InteractionRecord::from_json(doc), log.records()[n]);
    EXPECT_EQ(InteractionRecord::from_json(doc).to_json(), log.records()[n].to_json());
    ++n;
  }
  EXPECT_EQ(n, 2u);
}

TEST(Profiles, UnspecifiedGenderIsResolvedFromTheSeed) {
  UserProfile p;
  p.user_id = "u1";
  const auto a = resolve_profile(p, 42);
  const auto b = resolve_profile(p, 42);
  EXPECT_NE(a.gender, Gender::Unspecified);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_NO_THROW(a.validate());
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) differs = resolve_profile(p, s).to_json() != a.to_json();
  EXPECT_TRUE(differs);

  UserProfile fixed{"u2", Gender::Female, 160, 50};
  EXPECT_EQ(resolve_profile(fixed, 42).to_json(), fixed.to_json());
}

TEST(Profiles, RangesAreEnforced) {
  EXPECT_THROW((UserProfile{"u", Gender::Male, 20, 70}).validate(), Error);
  EXPECT_THROW((UserProfile{"u", Gender::Male, 175, 0}).validate(), Error);
}

TEST(TryOn, MockCompositeIsDeterministicAndPromptIsFilled) {
  BlobStore blobs;
  MockTryOnBackend backend(space(), blobs);
  SceneContext scene;
  scene.scene_text = "frozen winter";
  scene.scene_image_ref = "scene-blob";
  const UserProfile user{"u1", Gender::Male, 175, 70};
  const auto a = request_tryon(user, sample_item(), scene, backend);
  const auto b = request_tryon(user, sample_item(), scene, backend);
  EXPECT_EQ(a.blob_id, b.blob_id);
  EXPECT_TRUE(blobs.contains(a.blob_id));
  EXPECT_NE(a.avatar_prompt.find("175 in height (cm)"), std::string::npos);
  EXPECT_EQ(a.avatar_prompt.find('['), std::string::npos);

  const UserProfile taller{"u1", Gender::Male, 190, 70};
  EXPECT_NE(request_tryon(taller, sample_item(), scene, backend).blob_id, a.blob_id);
}

TEST(TryOn, UnavailableBackendReportsIt) {
  UnavailableTryOnBackend backend;
  try {
    request_tryon({"u1", Gender::Male, 175, 70}, sample_item(), {}, backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
}
