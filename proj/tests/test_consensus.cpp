#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "designbridge/consensus.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dbt;

namespace {

std::function<const DesignItem*(const std::string&)> lookup_in(const std::vector<DesignItem>& items) {
  return [&items](const std::string& id) -> const DesignItem* {
    for (const auto& it : items)
      if (it.item_id == id) return &it;
    return nullptr;
  };
}

int flat(int d, const char* name) { return space().flat_index(space().find_attribute(d, name).value()); }

/// Tally with random counts for n users.
PreferenceTally random_tally(Rng& rng, int users) {
  PreferenceTally t;
  for (int u = 0; u < users; ++u) {
    auto& c = t.counts[fmt::format("user-{}", u)];
    for (auto& vc : c) vc = {static_cast<int>(rng.index(12)), static_cast<int>(rng.index(12))};
  }
  return t;
}

std::vector<std::string> user_names(int n) {
  std::vector<std::string> out;
  for (int u = 0; u < n; ++u) out.push_back(fmt::format("user-{}", u));
  return out;
}

}  // namespace

TEST(Tally, NoRecordsMeansZeroCounts) {
  const auto t = tally(space(), {}, [](const std::string&) { return nullptr; });
  EXPECT_TRUE(t.counts.empty());
  EXPECT_EQ(t.at("anyone", 5), (VoteCounts{0, 0}));
}

TEST(Tally, LikeBrushOnVCollarCountsOnlyThatAttribute) {
  const std::vector<DesignItem> items = {make_item(
      "item-000001", vector_of({"Shirt", "Long", "V", "Breasted", "Pure", "Focus", "Silk", "Monochromatic", "White"}))};
  const auto t = tally(space(), {brush("rec-000001", "u1", "item-000001", Polarity::Like, {kCollarShape})},
                       lookup_in(items));
  for (int i = 0; i < kAttributeCount; ++i) {
    EXPECT_EQ(t.at("u1", i), i == flat(kCollarShape, "V") ? (VoteCounts{1, 0}) : (VoteCounts{0, 0})) << i;
  }
}

TEST(Tally, FanOutPerConfirmedDimensionAndVotesIgnored) {
  const std::vector<DesignItem> items = {make_item(
      "item-000001", vector_of({"Coat", "Long", "Fur", "Zipper", "Grid", "Repeat", "Woolen", "Dual-tone", "Gray"}))};
  const std::vector<InteractionRecord> records = {
      brush("rec-000001", "u1", "item-000001", Polarity::Dislike, {kMaterial, kSpecificColors}),
      vote("rec-000002", "u1", "item-000001", Polarity::Like),
      brush("rec-000003", "u1", "item-000001", Polarity::Like, {}),
      brush("rec-000004", "u2", "item-000404", Polarity::Like, {kType})};
  const auto t = tally(space(), records, lookup_in(items));
  int touched = 0;
  for (int i = 0; i < kAttributeCount; ++i) touched += t.at("u1", i) != VoteCounts{};
  EXPECT_EQ(touched, 2);
  EXPECT_EQ(t.at("u1", flat(kMaterial, "Woolen")), (VoteCounts{0, 1}));
  EXPECT_EQ(t.at("u1", flat(kSpecificColors, "Gray")), (VoteCounts{0, 1}));
  EXPECT_EQ(t.skipped, 1);
}

TEST(Upu, KnownValues) {
  EXPECT_EQ(upu(0, 0), 0.5);
  EXPECT_NEAR(upu(3, 1), 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(upu(3, 1), 0.666667, 1e-6);
  EXPECT_EQ(upu(0, 8), 0.1);
}

TEST(Upu, MatchesExtendedPrecisionOnRandomPairs) {
  Rng rng(100);
  for (int i = 0; i < 1000; ++i) {
    const auto l = static_cast<std::int64_t>(rng.index(i < 500 ? 100 : 1000000000));
    const auto d = static_cast<std::int64_t>(rng.index(i < 500 ? 100 : 1000000000));
    ASSERT_NEAR(upu(l, d), oracle::upu(l, d), 1e-12) << l << "," << d;
  }
}

TEST(Upu, BoundedAndMonotone) {
  for (int l = 0; l < 60; ++l) {
    for (int d = 0; d < 60; ++d) {
      const double u = upu(l, d);
      ASSERT_GT(u, 0.0);
      ASSERT_LT(u, 1.0);
      ASSERT_LT(u, upu(l + 1, d));
      ASSERT_GT(u, upu(l, d + 1));
    }
  }
}

TEST(Acs, PriorOnlyGivesOneHalfEverywhere) {
  const auto r = consensus(space(), PreferenceTally{}, {"a", "b", "c"});
  for (int i = 0; i < kAttributeCount; ++i) {
    EXPECT_NEAR(r.acs_raw[static_cast<std::size_t>(i)], 0.5, 1e-15);
    EXPECT_EQ(r.acs_norm[static_cast<std::size_t>(i)], 0.5);
  }
  EXPECT_EQ(r.user_count(), 3);
}

TEST(Acs, TwoUsersAtPointEightAndPointTwo) {
  PreferenceTally t;
  // upu = 0.8 needs (L+1)/(L+D+2) = 4/5: L=3, D=0.  0.2 = 1/5: L=0, D=3.
  t.counts["a"][0] = {3, 0};
  t.counts["b"][0] = {0, 3};
  const auto r = consensus(space(), t, {"a", "b"});
  EXPECT_NEAR(r.upu.at("a")[0], 0.8, 1e-15);
  EXPECT_NEAR(r.upu.at("b")[0], 0.2, 1e-15);
  EXPECT_NEAR(r.acs_raw[0], 0.4, 1e-12);
}

TEST(Acs, SingleUserEqualsTheirUtility) {
  Rng rng(3);
  const auto t = random_tally(rng, 1);
  const auto r = consensus(space(), t, user_names(1));
  for (int i = 0; i < kAttributeCount; ++i) {
    const auto c = t.at("user-0", i);
    EXPECT_NEAR(r.acs_raw[static_cast<std::size_t>(i)], upu(c.likes, c.dislikes), 1e-15);
  }
}

TEST(Acs, LogSpaceMatchesDirectProductOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(8));
    const auto t = random_tally(rng, n);
    const auto r = consensus(space(), t, user_names(n));
    for (int i = 0; i < kAttributeCount; ++i) {
      std::vector<double> us;
      for (const auto& u : user_names(n)) us.push_back(upu(t.at(u, i).likes, t.at(u, i).dislikes));
      const double expect = oracle::geometric_mean(us);
      ASSERT_LE(std::fabs(r.acs_raw[static_cast<std::size_t>(i)] - expect) / expect, 1e-12);
    }
  }
}

TEST(Acs, PermutationInvarianceAndDominance) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(8));
    auto t = random_tally(rng, n);
    auto users = user_names(n);
    const auto base = consensus(space(), t, users);
    std::shuffle(users.begin(), users.end(), std::mt19937_64(rng.next()));
    ASSERT_EQ(consensus(space(), t, users).acs_raw, base.acs_raw);

    // Make attribute 1 weakly dominate attribute 0 for everyone, strictly for one.
    for (auto& [u, c] : t.counts) c[1] = {c[0].likes, c[0].dislikes};
    t.counts[users.front()][1].likes += 1;
    const auto r = consensus(space(), t, users);
    ASSERT_GT(r.acs_raw[1], r.acs_raw[0]);
  }
}

TEST(Acs, PerDimensionMinMaxOntoTheOpenInterval) {
  Rng rng(6);
  const auto t = random_tally(rng, 4);
  const auto r = consensus(space(), t, user_names(4), 77);
  EXPECT_EQ(r.log_offset, 77);
  for (int d = 0; d < kDimensionCount; ++d) {
    const int lo = space().block_offset(d), n = space().attribute_count(d);
    const auto raw_begin = r.acs_raw.begin() + lo, raw_end = raw_begin + n;
    const double mn = *std::min_element(raw_begin, raw_end), mx = *std::max_element(raw_begin, raw_end);
    for (int a = 0; a < n; ++a) {
      const auto k = static_cast<std::size_t>(lo + a);
      const double expect = mx == mn ? 0.5 : 0.01 + 0.98 * (r.acs_raw[k] - mn) / (mx - mn);
      EXPECT_NEAR(r.acs_norm[k], expect, 1e-12);
      EXPECT_GE(r.acs_norm[k], 0.01);
      EXPECT_LE(r.acs_norm[k], 0.99);
    }
  }
}

TEST(Acs, MissingUsersContributeTheUninformativePrior) {
  PreferenceTally t;
  t.counts["a"][0] = {3, 0};
  const auto r = consensus(space(), t, {"a", "ghost"});
  EXPECT_NEAR(r.acs_raw[0], std::sqrt(0.8 * 0.5), 1e-12);
}

TEST(Acs, ReportJsonIsInCanonicalOrder) {
  Rng rng(7);
  const auto t = random_tally(rng, 2);
  const auto r = consensus(space(), t, user_names(2), 12);
  const auto doc = r.to_json(space());
  EXPECT_EQ(doc["log_offset"], 12);
  EXPECT_EQ(doc["n"], 2);
  ASSERT_EQ(doc["attributes"].size(), 51u);
  EXPECT_EQ(doc["attributes"][0], "Type:Shirt");
  EXPECT_EQ(doc["attributes"][50], "Specific Colors:Gray");
  EXPECT_EQ(doc["acs_raw"].size(), 51u);
  EXPECT_EQ(doc["upu"]["user-1"].size(), 51u);
  EXPECT_EQ(doc.dump(), consensus(space(), t, user_names(2), 12).to_json(space()).dump());
}

TEST(Palette, ColumnOrderIsDescendingNormThenIndex) {
  PreferenceTally t;
  t.counts["a"][space().flat_index({kSleeveLength, 2})] = {5, 0};
  const auto r = consensus(space(), t, {"a"});
  EXPECT_EQ(palette_order(space(), r, kSleeveLength), (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(palette_order(space(), r, kType), (std::vector<int>{0, 1, 2, 3, 4, 5, 6}));
}
