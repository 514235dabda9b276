#include "designbridge/palette.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"

namespace designbridge {

std::string_view classification_name(Classification c) { return c == Classification::Liked ? "Liked" : "Disliked"; }

// ---------------------------------------------------------------- tree

namespace {

void recompute(GarmentNode& node) {
  node.likes = node.dislikes = node.comment_count = 0;
  for (const auto& leaf : node.leaves) {
    const bool live = !leaf.pruned && !node.pruned;
    if (!live) continue;
    if (leaf.comment && !leaf.comment->empty()) ++node.comment_count;
    if (leaf.kind != InteractionKind::OverallVote) continue;
    (leaf.polarity == Polarity::Like ? node.likes : node.dislikes) += 1;
  }
  const int total = node.likes + node.dislikes;
  node.like_ratio = total == 0 ? 0.5 : static_cast<double>(node.likes) / total;
  node.classification = node.like_ratio > 0.5 ? Classification::Liked : Classification::Disliked;
}

void sort_nodes(std::vector<GarmentNode>& nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const GarmentNode& a, const GarmentNode& b) {
    if (a.classification != b.classification) return a.classification == Classification::Liked;
    if (a.like_ratio != b.like_ratio) return a.like_ratio > b.like_ratio;
    return a.item_id < b.item_id;
  });
}

GarmentNode* find_node(std::vector<GarmentNode>& nodes, const std::string& id) {
  for (auto& n : nodes) {
    if (n.item_id == id) return &n;
  }
  return nullptr;
}

std::pair<GarmentNode*, TreeLeaf*> find_leaf(std::vector<GarmentNode>& nodes, const std::string& record_id) {
  for (auto& n : nodes) {
    for (auto& l : n.leaves) {
      if (l.record_id == record_id) return {&n, &l};
    }
  }
  return {nullptr, nullptr};
}

}  // namespace

const GarmentNode* PreferenceTree::find_garment(const std::string& item_id) const {
  for (const auto& n : garment_nodes) {
    if (n.item_id == item_id) return &n;
  }
  return nullptr;
}

nlohmann::json PreferenceTree::to_json(const DesignSpace& space) const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : garment_nodes) {
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& l : n.leaves) {
      leaves.push_back({{"record_id", l.record_id},
                        {"user_id", l.user_id},
                        {"kind", kind_name(l.kind)},
                        {"polarity", polarity_name(l.polarity)},
                        {"region", l.region ? l.region->to_json() : nlohmann::json()},
                        {"comment", l.comment ? nlohmann::json(*l.comment) : nlohmann::json()},
                        {"pruned", l.pruned}});
    }
    nodes.push_back({{"item_id", n.item_id},
                     {"likes", n.likes},
                     {"dislikes", n.dislikes},
                     {"like_ratio", n.like_ratio},
                     {"comment_count", n.comment_count},
                     {"classification", classification_name(n.classification)},
                     {"pruned", n.pruned},
                     {"leaves", leaves}});
  }
  return {{"root", space.qualified_name(root)}, {"root_key", DesignSpace::key(root)}, {"garment_nodes", nodes}};
}

std::string PruneSet::hash() const { return sha256_hex(to_json().dump()); }

nlohmann::json PruneSet::to_json() const { return {{"garments", garments}, {"records", records}}; }

PruneSet PruneSet::from_json(const nlohmann::json& doc) {
  PruneSet s;
  s.garments = doc.value("garments", std::set<std::string>{});
  s.records = doc.value("records", std::set<std::string>{});
  return s;
}

nlohmann::json PruneTarget::to_json() const {
  return {{"kind", kind == Kind::Garment ? "garment" : "record"}, {"id", id}};
}

PruneTarget PruneTarget::from_json(const nlohmann::json& doc) {
  PruneTarget t;
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "garment") {
    t.kind = Kind::Garment;
  } else if (kind == "record") {
    t.kind = Kind::Record;
  } else {
    throw Error(ErrorCode::InvalidArgument, "prune kind must be garment or record");
  }
  t.id = doc.at("id").get<std::string>();
  return t;
}

PreferenceTree build_tree(const DesignSpace& space, AttributeId root, std::span<const DesignItem* const> items,
                          const std::vector<InteractionRecord>& records, const PruneSet& prune_set) {
  if (!space.valid(root)) throw Error(ErrorCode::InvalidArgument, "attribute out of range");
  PreferenceTree tree;
  tree.root = root;
  std::map<std::string, std::size_t> index;
  for (const auto* item : items) {
    if (item->deleted || item->design_vector[root.dimension] != root.attribute) continue;
    GarmentNode node;
    node.item_id = item->item_id;
    node.pruned = prune_set.garments.count(item->item_id) > 0;
    index[item->item_id] = tree.garment_nodes.size();
    tree.garment_nodes.push_back(std::move(node));
  }
  for (const auto& r : records) {
    auto it = index.find(r.item_id);
    if (it == index.end()) continue;
    if (r.kind == InteractionKind::Brush &&
        !std::binary_search(r.confirmed_dimensions.begin(), r.confirmed_dimensions.end(), root.dimension)) {
      continue;
    }
    auto& node = tree.garment_nodes[it->second];
    node.leaves.push_back({r.record_id, r.user_id, r.kind, r.polarity, r.region, r.comment,
                           node.pruned || prune_set.records.count(r.record_id) > 0});
  }
  for (auto& n : tree.garment_nodes) recompute(n);
  sort_nodes(tree.garment_nodes);
  return tree;
}

PreferenceTree prune(const PreferenceTree& tree, const PruneTarget& target) {
  PreferenceTree out = tree;
  if (target.kind == PruneTarget::Kind::Garment) {
    auto* node = find_node(out.garment_nodes, target.id);
    if (!node) throw Error(ErrorCode::UnknownNode, "no garment node " + target.id, {{"id", target.id}});
    if (node->pruned) throw Error(ErrorCode::AlreadyPruned, "garment already pruned", {{"id", target.id}});
    node->pruned = true;
    for (auto& l : node->leaves) l.pruned = true;
  } else {
    auto [node, leaf] = find_leaf(out.garment_nodes, target.id);
    if (!leaf) throw Error(ErrorCode::UnknownNode, "no leaf " + target.id, {{"id", target.id}});
    if (leaf->pruned) throw Error(ErrorCode::AlreadyPruned, "leaf already pruned", {{"id", target.id}});
    leaf->pruned = true;
  }
  for (auto& n : out.garment_nodes) recompute(n);
  sort_nodes(out.garment_nodes);
  return out;
}

PreferenceTree unprune(const PreferenceTree& tree, const PruneTarget& target) {
  PreferenceTree out = tree;
  if (target.kind == PruneTarget::Kind::Garment) {
    auto* node = find_node(out.garment_nodes, target.id);
    if (!node) throw Error(ErrorCode::UnknownNode, "no garment node " + target.id, {{"id", target.id}});
    if (!node->pruned) throw Error(ErrorCode::InvalidArgument, "garment is not pruned", {{"id", target.id}});
    node->pruned = false;
    for (auto& l : node->leaves) l.pruned = false;
  } else {
    auto [node, leaf] = find_leaf(out.garment_nodes, target.id);
    if (!leaf) throw Error(ErrorCode::UnknownNode, "no leaf " + target.id, {{"id", target.id}});
    if (!leaf->pruned || node->pruned) {
      throw Error(ErrorCode::InvalidArgument, "leaf is not individually pruned", {{"id", target.id}});
    }
    leaf->pruned = false;
  }
  for (auto& n : out.garment_nodes) recompute(n);
  sort_nodes(out.garment_nodes);
  return out;
}

void apply_prune(PruneSet& set, const PreferenceTree& tree, const PruneTarget& target, bool undo) {
  // Validates against the tree first; throws the same errors as prune/unprune.
  if (undo) {
    (void)unprune(tree, target);
  } else {
    (void)prune(tree, target);
  }
  auto& ids = target.kind == PruneTarget::Kind::Garment ? set.garments : set.records;
  if (undo) {
    ids.erase(target.id);
  } else {
    ids.insert(target.id);
  }
}

// ---------------------------------------------------------------- manifest

std::string manifest_readme() {
  return "Preference-guided fine-tuning, one LoRA module per attribute.\n"
         "For each brushed region B_i on a garment image I the mask M_i(x, y) = 1 inside\n"
         "(x_min, y_min, x_max, y_max) and 0 elsewhere.\n"
         "L_local,a_i = sum_j || F_theta(I_j * M_j) - F_theta(T_a_i) ||^2\n"
         "  F_theta: feature extractor from the U-Net backbone\n"
         "  I_j * M_j: masked image region for attribute a_i\n"
         "  T_a_i: CLIP text embedding of the attribute\n"
         "L_a_i = lambda_CLIP * L_CLIP + lambda_local * L_local,a_i\n"
         "lambda_CLIP = 0.6, lambda_local = 0.4\n"
         "Stage-1 base: LoRA rank 64, learning rate 4e-4, 1500 steps, 768 px, trigger word \"real garment\".\n"
         "Only garments whose like ratio exceeds 0.5 are retained.\n";
}

nlohmann::json FineTuneManifest::to_json(const DesignSpace& space) const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"item_id", e.item_id},
                    {"image_ref", e.image_ref},
                    {"mask_ref", e.mask_ref},
                    {"mask_sha256", e.mask_sha256},
                    {"region", e.region.to_json()},
                    {"prompt", e.prompt},
                    {"record_ids", e.record_ids},
                    {"user_id", e.user_id},
                    {"comment", e.comment ? nlohmann::json(*e.comment) : nlohmann::json()}});
  }
  return {{"schema_version", 1},
          {"attribute", space.qualified_name(attribute)},
          {"attribute_key", DesignSpace::key(attribute)},
          {"entries", list},
          {"loss_weights", {{"clip", loss_weights.clip}, {"local", loss_weights.local}}},
          {"stage1_config",
           {{"lora_rank", stage1_config.lora_rank},
            {"learning_rate", stage1_config.learning_rate},
            {"steps", stage1_config.steps},
            {"resolution", stage1_config.resolution},
            {"trigger", stage1_config.trigger}}},
          {"provenance", {{"log_offset", log_offset}, {"prune_set_hash", prune_set_hash}}},
          {"readme", manifest_readme()}};
}

ManifestResult export_manifest(const DesignSpace& space, const PreferenceTree& tree,
                               const std::function<const DesignItem*(const std::string&)>& lookup,
                               const std::vector<InteractionRecord>& records, std::int64_t log_offset,
                               const PruneSet& prune_set) {
  std::map<std::string, const InteractionRecord*> by_id;
  for (const auto& r : records) by_id[r.record_id] = &r;

  ManifestBundle bundle;
  auto& m = bundle.manifest;
  m.attribute = tree.root;
  m.log_offset = log_offset;
  m.prune_set_hash = prune_set.hash();
  DetailMap detail{{tree.root.dimension, space.attribute_name(tree.root)}};
  for (const auto& node : tree.garment_nodes) {
    if (node.pruned || node.classification != Classification::Liked || !(node.like_ratio > 0.5)) continue;
    const DesignItem* item = lookup(node.item_id);
    if (!item) continue;
    for (const auto& leaf : node.leaves) {
      if (leaf.pruned || leaf.kind != InteractionKind::Brush || leaf.polarity != Polarity::Like) continue;
      auto it = by_id.find(leaf.record_id);
      if (it == by_id.end() || !it->second->region) continue;
      const auto& region = *it->second->region;
      const auto png = rasterize_mask(region).to_png();
      ManifestEntry e;
      e.item_id = item->item_id;
      e.image_ref = item->image_ref;
      e.mask_ref = "masks/" + leaf.record_id + ".png";
      e.mask_sha256 = sha256_hex(png);
      e.region = region;
      e.prompt = render_prompt(space, item->design_vector, PromptStage::Informed, detail);
      e.record_ids = {leaf.record_id};
      e.user_id = leaf.user_id;
      e.comment = leaf.comment;
      bundle.masks.emplace_back(e.mask_ref, png);
      m.entries.push_back(std::move(e));
    }
  }
  if (m.entries.empty()) {
    return EmptyManifest{tree.root, "no unpruned Like brushes on liked garments for " + space.qualified_name(tree.root)};
  }
  return bundle;
}

void write_manifest(const std::filesystem::path& dir, const DesignSpace& space, const ManifestBundle& bundle) {
  std::filesystem::create_directories(dir / "masks");
  auto write = [](const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::StorageFull, "cannot write " + path.string());
  };
  for (const auto& [ref, bytes] : bundle.masks) {
    write(dir / ref, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  for (const auto& e : bundle.manifest.entries) {
    auto sidecar = dir / e.mask_ref;
    sidecar.replace_extension(".json");
    write(sidecar, mask_sidecar(e.item_id, e.record_ids.front(), e.region).dump(2) + "\n");
  }
  write(dir / "manifest.json", bundle.manifest.to_json(space).dump(2) + "\n");
}

// ---------------------------------------------------------------- puzzle

bool PuzzleSelection::complete() const {
  return std::all_of(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); });
}

DesignVector PuzzleSelection::to_vector() const {
  if (!complete()) {
    nlohmann::json missing = nlohmann::json::array();
    for (int d = 0; d < kDimensionCount; ++d) {
      if (!slots[static_cast<std::size_t>(d)]) missing.push_back(d);
    }
    throw Error(ErrorCode::IncompleteSelection, "every dimension needs an attribute", {{"missing", missing}});
  }
  DesignVector v;
  for (int d = 0; d < kDimensionCount; ++d) v.set(d, *slots[static_cast<std::size_t>(d)]);
  return v;
}

PuzzleSelection PuzzleSelection::from_json(const DesignSpace& space, const nlohmann::json& doc) {
  PuzzleSelection s;
  if (doc.is_array()) {
    // Either a full int vector or a list of attribute names.
    for (const auto& entry : doc) {
      if (entry.is_null()) continue;
      auto id = space.parse_attribute(entry.get<std::string>());
      if (!id) throw Error(ErrorCode::InvalidArgument, "unknown attribute " + entry.get<std::string>());
      if (s.slots[static_cast<std::size_t>(id->dimension)]) {
        throw Error(ErrorCode::InvalidArgument, "two attributes chosen for " + space.dimension(id->dimension).name);
      }
      s.slots[static_cast<std::size_t>(id->dimension)] = id->attribute;
    }
    return s;
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "selection must be an object or list");
  for (const auto& [dim_name, attr] : doc.items()) {
    const auto d = space.find_dimension(dim_name);
    if (!d) throw Error(ErrorCode::InvalidArgument, "unknown dimension " + dim_name);
    if (attr.is_null()) continue;
    std::optional<AttributeId> id;
    if (attr.is_number_integer()) {
      id = AttributeId{*d, attr.get<int>()};
      if (!space.valid(*id)) id.reset();
    } else {
      id = space.find_attribute(*d, attr.get<std::string>());
    }
    if (!id) throw Error(ErrorCode::InvalidArgument, "unknown attribute for " + dim_name);
    s.slots[static_cast<std::size_t>(*d)] = id->attribute;
  }
  return s;
}

std::vector<std::vector<PaletteEntry>> palette_columns(const DesignSpace& space, const ConsensusReport& report) {
  std::vector<std::vector<PaletteEntry>> columns;
  for (int d = 0; d < kDimensionCount; ++d) {
    std::vector<PaletteEntry> column;
    for (int a : palette_order(space, report, d)) {
      const auto flat = static_cast<std::size_t>(space.flat_index({d, a}));
      column.push_back({a, report.acs_norm[flat], report.acs_raw[flat]});
    }
    columns.push_back(std::move(column));
  }
  return columns;
}

std::vector<InformedItem> informed_generate(const DesignSpace& space, const PuzzleSelection& selection,
                                            const DetailMap& detail, const std::vector<std::string>& adapters, int n,
                                            GenerationBackend& generator, EmbeddingBackend& embedder,
                                            const std::vector<UserModelRef>& users, const AttributionConfig& config,
                                            const std::function<std::string()>& next_id) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  if (n > kMaxGenerationPerRequest) throw Error(ErrorCode::InvalidArgument, "n is too large", {{"n", n}});
  const DesignVector v = selection.to_vector();
  const std::string prompt = render_prompt(space, v, PromptStage::Informed, detail);
  std::vector<InformedItem> out;
  for (int i = 0; i < n; ++i) {
    const auto image = generator.generate({prompt, v, adapters, i});
    InformedItem informed;
    auto& item = informed.item;
    item.design_vector = v;
    item.colors = {v[kSpecificColors]};
    item.image_ref = image.blob_id;
    item.image_width = image.width;
    item.image_height = image.height;
    item.visual_embedding = embedder.embed(v, image.blob_id);
    item.origin = Origin::Informed;
    informed.prompt = prompt;
    const auto feature = build_feature(space, item);
    std::vector<UserAttribution> per_user;
    for (const auto& u : users) per_user.push_back(attribute_user(space, u.user_id, *u.net, feature, config));
    if (!per_user.empty()) informed.attribution = aggregate(space, std::move(per_user));
    out.push_back(std::move(informed));
  }
  for (auto& informed : out) informed.item.item_id = next_id();
  return out;
}

}  // namespace designbridge
