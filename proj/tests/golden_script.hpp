#pragma once

// Scripted 3-user session driven through the gateway. The golden log under
// tests/data was produced by this script; its state hash is pinned in
// tests/data/golden_session.sha256.

#include <string>

#include <fmt/format.h>

#include "designbridge/gateway.hpp"

namespace golden {

inline constexpr const char* kStateHash = DB_GOLDEN_HASH;

/// Deterministic ISO-8601 clock: one second per call from a fixed epoch.
inline std::function<std::string()> counting_clock() {
  auto n = std::make_shared<int>(0);
  return [n] {
    const int t = (*n)++;
    return fmt::format("2026-03-01T{:02d}:{:02d}:{:02d}Z", t / 3600 % 24, t / 60 % 60, t % 60);
  };
}

/// Like rule of each scripted user, keyed on the item's design vector.
inline bool likes(int user, const nlohmann::json& item) {
  const auto& v = item.at("design_vector");
  switch (user) {
    case 0: return v.at(1).get<int>() == 1 || v.at(8).get<int>() < 3;
    case 1: return v.at(6).get<int>() % 2 == 0;
    default: return v.at(4).get<int>() <= 2 && v.at(2).get<int>() != 0;
  }
}

struct Result {
  std::string project_id;
  std::vector<std::string> session_ids;
};

/// Runs the full script. Every vote of every round is cast until the
/// sessions close; round-0 items also get a brush on the garment's collar.
inline Result run(designbridge::Gateway& g) {
  Result r;
  r.project_id = g.create_project({{"name", "golden"}, {"seed", 42}, {"max_rounds", 6}, {"strategy", "Entropy"}})
                     .at("project_id")
                     .get<std::string>();
  const auto& pid = r.project_id;
  g.framing(pid, {{"type", "T-shirt"}, {"scene", "summer picnic"}, {"principle", "casual"}, {"strictness", 0.5}});
  const auto lib = g.generate_library(pid, {{"n", 60}, {"seed", 1}});
  const auto& items = lib.at("items");
  g.curate(pid, {{"ops",
                  {{{"op", "remove"}, {"item_id", items.at(3).at("item_id")}},
                   {{"op", "reorder"}, {"item_id", items.at(10).at("item_id")}, {"rank", 0}}}}});

  const char* genders[] = {"F", "M", nullptr};
  for (int u = 0; u < 3; ++u) {
    nlohmann::json profile = {{"user_id", fmt::format("user-{}", u + 1)}};
    if (genders[u]) {
      profile["gender"] = genders[u];
      profile["height_cm"] = 160 + 10 * u;
      profile["weight_kg"] = 55 + 10 * u;
    }
    auto round = g.open_session(pid, profile);
    const auto sid = round.at("session_id").get<std::string>();
    r.session_ids.push_back(sid);
    auto current = round.at("round");
    int k = 0;
    while (!current.is_null()) {
      nlohmann::json next;
      for (const auto& item : current.at("items")) {
        const auto id = item.at("item_id").get<std::string>();
        const bool like = likes(u, item);
        if (current.at("round_index").get<int>() == 0 && k % 3 == u) {
          g.submit_interaction(sid, {{"kind", "Brush"},
                                     {"item_id", id},
                                     {"polarity", like ? "Like" : "Dislike"},
                                     {"region", {{"x_min", 230}, {"y_min", 0}, {"x_max", 538}, {"y_max", 154},
                                                 {"image_w", 768}, {"image_h", 768}}},
                                     {"confirmed_dimensions", {"Collar Shape"}},
                                     {"comment", like ? "nice neckline" : "collar feels off"},
                                     {"dedup_key", fmt::format("brush-{}-{}", u, k)}});
        }
        const auto resp = g.submit_vote(
            sid, {{"item_id", id}, {"polarity", like ? "Like" : "Dislike"}, {"dedup_key", fmt::format("vote-{}-{}", u, k)}});
        ++k;
        if (resp.value("round_complete", false)) next = resp.value("next_round", nlohmann::json());
      }
      current = next;
    }
  }

  // Designer side: export a manifest for the first liked collar, prune that
  // brush, export again, then generate and save.
  std::string attr;
  std::string record;
  g.inspect(pid, [&](const designbridge::Project& p) {
    for (const auto& rec : p.interactions().records()) {
      if (rec.kind != designbridge::InteractionKind::Brush || rec.polarity != designbridge::Polarity::Like) continue;
      const auto* item = p.catalog().find(rec.item_id);
      attr = designbridge::DesignSpace::key({designbridge::kCollarShape, item->design_vector[designbridge::kCollarShape]});
      record = rec.record_id;
      break;
    }
  });
  g.export_manifest(pid, attr, {});
  g.prune(pid, attr, {{"target", {{"kind", "record"}, {"id", record}}}});
  g.export_manifest(pid, attr, {});
  const auto informed = g.informed(pid, {{"selection",
                                          {{"Type", "T-shirt"},
                                           {"Sleeve Length", "Short"},
                                           {"Collar Shape", "Round"},
                                           {"Wearing Style", "Pullover"},
                                           {"Pattern Style", "Pure"},
                                           {"Pattern Arrangement", "Focus"},
                                           {"Material", "Cotton"},
                                           {"Color Category", "Monochromatic"},
                                           {"Specific Colors", "Black"}}},
                                         {"detail", {{"Collar Shape", "ribbed crew neck"}}},
                                         {"n", 2}});
  g.save_item(pid, informed.at("items").at(0).at("item").at("item_id").get<std::string>(), {});
  return r;
}

}  // namespace golden
