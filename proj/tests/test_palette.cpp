#include <gtest/gtest.h>

#include <fstream>

#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"
#include "designbridge/palette.hpp"
#include "support.hpp"

using namespace dbt;

namespace {

const AttributeId kVCollar = space().find_attribute(kCollarShape, "V").value();

DesignVector v_collar_vector(int type = 0) {
  auto v = vector_of({"Shirt", "Long", "V", "Breasted", "Pure", "Focus", "Silk", "Monochromatic", "White"});
  v.set(kType, type);
  return v;
}

struct Fixture {
  std::vector<DesignItem> items;
  std::vector<InteractionRecord> records;
  int next = 0;

  std::vector<const DesignItem*> ptrs() const {
    std::vector<const DesignItem*> out;
    for (const auto& i : items) out.push_back(&i);
    return out;
  }
  std::function<const DesignItem*(const std::string&)> lookup() const {
    return [this](const std::string& id) -> const DesignItem* {
      for (const auto& i : items)
        if (i.item_id == id) return &i;
      return nullptr;
    };
  }
  std::string add_vote(const std::string& user, const std::string& item, Polarity p) {
    const auto id = fmt::format("rec-{:06d}", ++next);
    records.push_back(vote(id, user, item, p));
    return id;
  }
  std::string add_brush(const std::string& user, const std::string& item, Polarity p, BrushRegion r,
                        std::vector<int> dims = {kCollarShape}) {
    const auto id = fmt::format("rec-{:06d}", ++next);
    records.push_back(brush(id, user, item, p, std::move(dims), r));
    return id;
  }
  PreferenceTree tree(const PruneSet& prune = {}) const { return build_tree(space(), kVCollar, ptrs(), records, prune); }
  ManifestResult manifest(const PruneSet& prune = {}) const {
    return export_manifest(space(), tree(prune), lookup(), records, static_cast<std::int64_t>(records.size()), prune);
  }
};

BrushRegion collar_region() { return {230, 0, 538, 154, 768, 768}; }

const ManifestBundle& bundle_of(const ManifestResult& r) {
  EXPECT_TRUE(std::holds_alternative<ManifestBundle>(r));
  return std::get<ManifestBundle>(r);
}

}  // namespace

TEST(Tree, NoGarmentsCarryTheAttribute) {
  Fixture f;
  f.items.push_back(make_item("item-000001", vector_of({"Shirt", "Long", "Round", "Breasted", "Pure", "Focus", "Silk",
                                                        "Monochromatic", "White"})));
  const auto t = f.tree();
  EXPECT_TRUE(t.garment_nodes.empty());
  EXPECT_EQ(t.root, kVCollar);
}

TEST(Tree, EvenSplitIsDisliked) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Like);
  f.add_vote("b", "item-000001", Polarity::Like);
  f.add_vote("c", "item-000001", Polarity::Dislike);
  f.add_vote("d", "item-000001", Polarity::Dislike);
  const auto t = f.tree();
  ASSERT_EQ(t.garment_nodes.size(), 1u);
  EXPECT_EQ(t.garment_nodes[0].like_ratio, 0.5);
  EXPECT_EQ(t.garment_nodes[0].classification, Classification::Disliked);
}

TEST(Tree, LikedNodesComeFirst) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector(1)));
  f.items.push_back(make_item("item-000002", v_collar_vector(2)));
  f.add_vote("a", "item-000001", Polarity::Dislike);
  for (const char* u : {"a", "b", "c"}) f.add_vote(u, "item-000002", Polarity::Like);
  f.add_vote("d", "item-000002", Polarity::Dislike);
  const auto t = f.tree();
  ASSERT_EQ(t.garment_nodes.size(), 2u);
  EXPECT_EQ(t.garment_nodes[0].item_id, "item-000002");
  EXPECT_EQ(t.garment_nodes[0].classification, Classification::Liked);
  EXPECT_EQ(t.garment_nodes[0].like_ratio, 0.75);
  EXPECT_EQ(t.garment_nodes[1].classification, Classification::Disliked);
}

TEST(Tree, BrushesOnlyJoinTheirConfirmedDimension) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_brush("a", "item-000001", Polarity::Like, collar_region(), {kMaterial});
  const auto c = f.add_brush("a", "item-000001", Polarity::Like, collar_region(), {kCollarShape, kMaterial});
  const auto t = f.tree();
  ASSERT_EQ(t.garment_nodes[0].leaves.size(), 1u);
  EXPECT_EQ(t.garment_nodes[0].leaves[0].record_id, c);
  // Brushes never enter the like ratio.
  EXPECT_EQ(t.garment_nodes[0].like_ratio, 0.5);
}

TEST(Prune, DecisiveLikeFlipsTheGarment) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  const auto like = f.add_vote("a", "item-000001", Polarity::Like);
  f.add_vote("b", "item-000001", Polarity::Like);
  f.add_vote("c", "item-000001", Polarity::Dislike);
  const auto t = f.tree();
  EXPECT_EQ(t.garment_nodes[0].classification, Classification::Liked);
  const auto pruned = prune(t, {PruneTarget::Kind::Record, like});
  EXPECT_EQ(pruned.garment_nodes[0].like_ratio, 0.5);
  EXPECT_EQ(pruned.garment_nodes[0].classification, Classification::Disliked);
  EXPECT_EQ(unprune(pruned, {PruneTarget::Kind::Record, like}), t);
}

TEST(Prune, GarmentPruneCascadesToLeaves) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Like);
  f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  const auto t = prune(f.tree(), {PruneTarget::Kind::Garment, "item-000001"});
  EXPECT_TRUE(t.garment_nodes[0].pruned);
  for (const auto& l : t.garment_nodes[0].leaves) EXPECT_TRUE(l.pruned);
  EXPECT_EQ(t.garment_nodes[0].likes, 0);
  EXPECT_EQ(unprune(t, {PruneTarget::Kind::Garment, "item-000001"}), f.tree());
}

TEST(Prune, ErrorsForUnknownAndRepeatedTargets) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  const auto r = f.add_vote("a", "item-000001", Polarity::Like);
  const auto t = prune(f.tree(), {PruneTarget::Kind::Record, r});
  auto code_of = [](auto&& fn) -> std::optional<ErrorCode> {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code_of([&] { prune(t, {PruneTarget::Kind::Record, r}); }), ErrorCode::AlreadyPruned);
  EXPECT_EQ(code_of([&] { prune(t, {PruneTarget::Kind::Record, "rec-999999"}); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([&] { prune(t, {PruneTarget::Kind::Garment, "item-999999"}); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([&] { unprune(f.tree(), {PruneTarget::Kind::Record, r}); }), ErrorCode::InvalidArgument);
}

TEST(Prune, PruneSetRebuildEqualsIncrementalPrune) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.items.push_back(make_item("item-000002", v_collar_vector(3)));
  const auto r = f.add_vote("a", "item-000001", Polarity::Like);
  f.add_vote("a", "item-000002", Polarity::Like);
  PruneSet set;
  apply_prune(set, f.tree(), {PruneTarget::Kind::Record, r}, false);
  apply_prune(set, f.tree(set), {PruneTarget::Kind::Garment, "item-000002"}, false);
  const auto incremental =
      prune(prune(f.tree(), {PruneTarget::Kind::Record, r}), {PruneTarget::Kind::Garment, "item-000002"});
  EXPECT_EQ(f.tree(set), incremental);
  EXPECT_EQ(PruneSet::from_json(set.to_json()), set);
  apply_prune(set, f.tree(set), {PruneTarget::Kind::Record, r}, true);
  EXPECT_EQ(set.records.size(), 0u);
  EXPECT_EQ(PruneTarget::from_json(PruneTarget{PruneTarget::Kind::Garment, "x"}.to_json()).id, "x");
}

TEST(Manifest, AllDislikedGivesEmptyWithReason) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Dislike);
  f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  const auto r = f.manifest();
  ASSERT_TRUE(std::holds_alternative<EmptyManifest>(r));
  EXPECT_FALSE(std::get<EmptyManifest>(r).reason.empty());
}

TEST(Manifest, RatioOfExactlyOneHalfIsExcluded) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Like);
  f.add_vote("b", "item-000001", Polarity::Dislike);
  f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  EXPECT_TRUE(std::holds_alternative<EmptyManifest>(f.manifest()));
}

TEST(Manifest, EntriesConstantsAndMasks) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Like);
  const auto b = f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  f.add_brush("b", "item-000001", Polarity::Dislike, collar_region());
  f.records.back().comment = "too deep";
  const auto r = f.manifest();
  const auto& bundle = bundle_of(r);
  const auto& m = bundle.manifest;
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].record_ids, (std::vector<std::string>{b}));
  EXPECT_EQ(m.entries[0].mask_ref, "masks/" + b + ".png");
  EXPECT_EQ(m.log_offset, 3);
  ASSERT_EQ(bundle.masks.size(), 1u);
  EXPECT_EQ(m.entries[0].mask_sha256, sha256_hex(bundle.masks[0].second));
  EXPECT_EQ(bundle.masks[0].second, rasterize_mask(collar_region()).to_png());

  const auto doc = m.to_json(space());
  EXPECT_EQ(doc["loss_weights"]["clip"].get<double>(), 0.6);
  EXPECT_EQ(doc["loss_weights"]["local"].get<double>(), 0.4);
  EXPECT_EQ(doc["stage1_config"]["lora_rank"].get<int>(), 64);
  EXPECT_EQ(doc["stage1_config"]["learning_rate"].get<double>(), 4e-4);
  EXPECT_EQ(doc["stage1_config"]["steps"].get<int>(), 1500);
  EXPECT_EQ(doc["attribute"], "Collar Shape:V");
  EXPECT_NE(doc["entries"][0]["prompt"].get<std::string>().find("For Collar Shape part"), std::string::npos);
}

TEST(Manifest, ByteStableAcrossExports) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.add_vote("a", "item-000001", Polarity::Like);
  f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  TempDir a("manifest-a"), b("manifest-b");
  write_manifest(a.path(), space(), bundle_of(f.manifest()));
  write_manifest(b.path(), space(), bundle_of(f.manifest()));
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const char* rel : {"manifest.json", "masks/rec-000002.png", "masks/rec-000002.json"}) {
    ASSERT_TRUE(std::filesystem::exists(a.path() / rel)) << rel;
    EXPECT_EQ(slurp(a.path() / rel), slurp(b.path() / rel)) << rel;
  }
}

TEST(Manifest, PruningDecisiveVoteRemovesTheGarment) {
  Fixture f;
  f.items.push_back(make_item("item-000001", v_collar_vector()));
  f.items.push_back(make_item("item-000002", v_collar_vector(4)));
  const auto decisive = f.add_vote("a", "item-000001", Polarity::Like);
  f.add_vote("b", "item-000001", Polarity::Like);
  f.add_vote("c", "item-000001", Polarity::Dislike);
  f.add_brush("a", "item-000001", Polarity::Like, collar_region());
  f.add_vote("a", "item-000002", Polarity::Like);
  f.add_brush("b", "item-000002", Polarity::Like, collar_region());

  auto items_of = [](const ManifestResult& r) {
    std::set<std::string> out;
    if (const auto* b = std::get_if<ManifestBundle>(&r))
      for (const auto& e : b->manifest.entries) out.insert(e.item_id);
    return out;
  };
  EXPECT_EQ(items_of(f.manifest()), (std::set<std::string>{"item-000001", "item-000002"}));
  PruneSet set;
  apply_prune(set, f.tree(), {PruneTarget::Kind::Record, decisive}, false);
  EXPECT_EQ(f.tree(set).find_garment("item-000001")->classification, Classification::Disliked);
  EXPECT_EQ(items_of(f.manifest(set)), (std::set<std::string>{"item-000002"}));
}

TEST(Manifest, PruningNeverAddsEntries) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Fixture f;
    for (int i = 1; i <= 6; ++i) f.items.push_back(make_item(fmt::format("item-{:06d}", i), v_collar_vector(i % 7)));
    for (int k = 0; k < 30; ++k) {
      const auto item = fmt::format("item-{:06d}", 1 + rng.index(6));
      const auto user = fmt::format("u{}", rng.index(3));
      const auto pol = rng.bernoulli(0.6) ? Polarity::Like : Polarity::Dislike;
      if (rng.bernoulli(0.5)) {
        f.add_vote(user, item, pol);
      } else {
        f.add_brush(user, item, pol, collar_region());
      }
    }
    auto count = [](const ManifestResult& r) {
      const auto* b = std::get_if<ManifestBundle>(&r);
      return b ? b->manifest.entries.size() : 0u;
    };
    PruneSet set;
    std::size_t before = count(f.manifest());
    for (int step = 0; step < 5; ++step) {
      const bool garment = rng.bernoulli(0.3);
      const std::string id = garment ? fmt::format("item-{:06d}", 1 + rng.index(6))
                                     : f.records[rng.index(f.records.size())].record_id;
      try {
        apply_prune(set, f.tree(set), {garment ? PruneTarget::Kind::Garment : PruneTarget::Kind::Record, id}, false);
      } catch (const Error&) {
        continue;
      }
      const std::size_t after = count(f.manifest(set));
      // Pruning a Dislike vote can lift a garment above one half; only
      // record prunes of Like-side evidence or garment prunes must shrink.
      const auto* rec = garment ? nullptr : &*std::find_if(f.records.begin(), f.records.end(),
                                                           [&](const auto& r) { return r.record_id == id; });
      if (garment || rec->polarity == Polarity::Like) {
        EXPECT_LE(after, before);
      }
      before = after;
    }
  }
}

TEST(Puzzle, TemplateRendersEveryPartialSelection) {
  Rng rng(12);
  for (int trial = 0; trial < 512; ++trial) {
    PuzzleSelection s;
    for (int d = 0; d < kDimensionCount; ++d) {
      if (trial >> d & 1) s.slots[static_cast<std::size_t>(d)] = static_cast<int>(rng.index(space().attribute_count(d)));
    }
    const auto text = s.prompt_text(space());
    for (int d = 0; d < kDimensionCount; ++d) {
      const auto& slot = s.slots[static_cast<std::size_t>(d)];
      const auto needle = slot ? space().attribute_name({d, *slot}) : "[" + space().dimension(d).name + "]";
      EXPECT_NE(text.find(needle), std::string::npos) << needle;
    }
    EXPECT_EQ(s.complete(), trial == 511);
  }
}

TEST(Puzzle, IncompleteSelectionNamesMissingDimensions) {
  const auto s = PuzzleSelection::from_json(space(), {{"Type", "Coat"}, {"Material", 2}});
  EXPECT_EQ(s.slots[kType], 6);
  EXPECT_EQ(s.slots[kMaterial], 2);
  try {
    s.to_vector();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteSelection);
    EXPECT_EQ(e.details()["missing"].size(), 7u);
  }
  EXPECT_THROW(PuzzleSelection::from_json(space(), {{"Shape", "Coat"}}), Error);
}

TEST(Informed, GeneratesAttributedItemsForEveryUser) {
  BlobStore blobs;
  MockGenerationBackend gen(space(), blobs, 3);
  MockEmbeddingBackend emb(3);
  const auto a = Ppnn::initialized(1), b = Ppnn::initialized(2);
  PuzzleSelection s;
  const auto v = v_collar_vector();
  for (int d = 0; d < kDimensionCount; ++d) s.slots[static_cast<std::size_t>(d)] = v[d];
  int n = 0;
  const auto out = informed_generate(space(), s, {{kCollarShape, "a deep plunge"}}, {"manifest-1"}, 3, gen, emb,
                                     {{"a", &a}, {"b", &b}}, {}, [&] { return fmt::format("item-{:06d}", ++n); });
  ASSERT_EQ(out.size(), 3u);
  for (const auto& item : out) {
    EXPECT_EQ(item.item.design_vector, v);
    EXPECT_EQ(item.item.origin, Origin::Informed);
    EXPECT_NE(item.prompt.find("deep plunge"), std::string::npos);
    ASSERT_EQ(item.attribution.per_user.size(), 2u);
    EXPECT_EQ(item.attribution.per_user[0].user_id, "a");
  }
  EXPECT_EQ(out[2].item.item_id, "item-000003");
  EXPECT_THROW(informed_generate(space(), s, {}, {}, 1, gen, emb, {}, {}, [] { return "x"; }), Error);
  EXPECT_THROW(informed_generate(space(), PuzzleSelection{}, {{0, "x"}}, {}, 1, gen, emb, {}, {}, [] { return "x"; }),
               Error);
}
