#include "designbridge/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "designbridge/error.hpp"
#include "designbridge/prompts.hpp"
#include "designbridge/rng.hpp"

namespace designbridge {

std::string_view origin_name(Origin origin) { return origin == Origin::Framing ? "Framing" : "Informed"; }

Origin origin_from_name(std::string_view name) {
  if (name == "Framing") return Origin::Framing;
  if (name == "Informed") return Origin::Informed;
  throw Error(ErrorCode::InvalidArgument, "unknown origin " + std::string(name));
}

nlohmann::json DesignItem::to_json(const DesignSpace& space) const {
  nlohmann::json attrs = nlohmann::json::object();
  for (int d = 0; d < kDimensionCount; ++d) attrs[space.dimension(d).name] = space.attribute_name(design_vector.at(d));
  return {{"item_id", item_id},
          {"design_vector", vector_to_json(space, design_vector)},
          {"attributes", attrs},
          {"colors", colors},
          {"image_ref", image_ref},
          {"image_width", image_width},
          {"image_height", image_height},
          {"visual_embedding", visual_embedding},
          {"origin", origin_name(origin)},
          {"display_rank", display_rank},
          {"deleted", deleted}};
}

DesignItem DesignItem::from_json(const DesignSpace& space, const nlohmann::json& doc) {
  DesignItem item;
  item.item_id = doc.at("item_id").get<std::string>();
  item.design_vector = vector_from_json(space, doc.at("design_vector"));
  item.colors = doc.value("colors", std::vector<int>{item.design_vector[kSpecificColors]});
  item.image_ref = doc.at("image_ref").get<std::string>();
  item.image_width = doc.at("image_width").get<int>();
  item.image_height = doc.at("image_height").get<int>();
  const auto& emb = doc.at("visual_embedding");
  if (!emb.is_array() || emb.size() != kVisualSize) {
    throw Error(ErrorCode::ValidationFailed, "visual_embedding must have 50 entries");
  }
  for (std::size_t i = 0; i < kVisualSize; ++i) {
    item.visual_embedding[i] = emb[i].get<double>();
    if (!std::isfinite(item.visual_embedding[i])) throw Error(ErrorCode::ValidationFailed, "non-finite embedding");
  }
  item.origin = origin_from_name(doc.value("origin", "Framing"));
  item.display_rank = doc.value("display_rank", 0);
  item.deleted = doc.value("deleted", false);
  return item;
}

std::vector<DesignVector> sample_design_vectors(const DesignSpace& space, const FilterResult& filter, int n,
                                                std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  std::array<std::vector<int>, kDimensionCount> pools;
  double combinations = 1.0;
  for (int d = 0; d < kDimensionCount; ++d) {
    pools[static_cast<std::size_t>(d)] = filter.included_in(space, d);
    combinations *= static_cast<double>(pools[static_cast<std::size_t>(d)].size());
  }
  Rng rng(seed);
  auto draw = [&] {
    DesignVector v;
    for (int d = 0; d < kDimensionCount; ++d) {
      const auto& pool = pools[static_cast<std::size_t>(d)];
      v.set(d, pool[rng.index(pool.size())]);
    }
    return v;
  };

  std::vector<DesignVector> out;
  out.reserve(static_cast<std::size_t>(n));
  const double wanted = n;
  if (combinations >= 2.0 * wanted) {
    // Sparse: rejection sampling for distinct vectors.
    std::set<DesignVector> seen;
    while (static_cast<int>(out.size()) < n) {
      auto v = draw();
      if (seen.insert(v).second) out.push_back(v);
    }
    return out;
  }
  // Dense: shuffle the enumerated space; cycle through reshuffles if n exceeds it.
  std::vector<DesignVector> all;
  std::array<int, kDimensionCount> idx{};
  while (true) {
    DesignVector v;
    for (int d = 0; d < kDimensionCount; ++d) {
      v.set(d, pools[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])]);
    }
    all.push_back(v);
    int d = kDimensionCount - 1;
    while (d >= 0 && ++idx[static_cast<std::size_t>(d)] == static_cast<int>(pools[static_cast<std::size_t>(d)].size())) {
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }
  while (static_cast<int>(out.size()) < n) {
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.index(i)]);
    for (const auto& v : all) {
      if (static_cast<int>(out.size()) == n) break;
      out.push_back(v);
    }
  }
  return out;
}

std::vector<DesignItem> ingest_generated(const DesignSpace& space, const std::vector<DesignVector>& vectors,
                                         GenerationBackend& generator, EmbeddingBackend& embedder, Origin origin,
                                         const std::function<std::string()>& next_id) {
  std::vector<DesignItem> items;
  items.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (!space.valid(v)) throw Error(ErrorCode::InvalidArgument, "design vector out of range");
    GenerationRequest request{render_prompt(space, v, PromptStage::Framing), v, {}, 0};
    const auto image = generator.generate(request);
    DesignItem item;
    item.design_vector = v;
    item.colors = {v[kSpecificColors]};
    item.image_ref = image.blob_id;
    item.image_width = image.width;
    item.image_height = image.height;
    item.visual_embedding = embedder.embed(v, image.blob_id);
    item.origin = origin;
    item.display_rank = static_cast<int>(items.size());
    items.push_back(std::move(item));
  }
  // Ids are handed out only once the whole batch succeeded.
  for (auto& item : items) item.item_id = next_id();
  return items;
}

nlohmann::json curate_op_to_json(const CurateOp& op) {
  if (const auto* remove = std::get_if<RemoveOp>(&op)) return {{"op", "remove"}, {"item_id", remove->item_id}};
  const auto& reorder = std::get<ReorderOp>(op);
  return {{"op", "reorder"}, {"item_id", reorder.item_id}, {"rank", reorder.new_rank}};
}

CurateOp curate_op_from_json(const nlohmann::json& doc) {
  const auto op = doc.at("op").get<std::string>();
  if (op == "remove") return RemoveOp{doc.at("item_id").get<std::string>()};
  if (op == "reorder") return ReorderOp{doc.at("item_id").get<std::string>(), doc.at("rank").get<int>()};
  throw Error(ErrorCode::InvalidArgument, "unknown curate op " + op);
}

void Catalog::add(std::vector<DesignItem> items) {
  std::vector<std::size_t> order;
  for (const auto* item : view()) order.push_back(index_.at(item->item_id));
  for (auto& item : items) {
    if (index_.count(item.item_id)) throw Error(ErrorCode::ValidationFailed, "duplicate item id " + item.item_id);
    item.deleted = false;
    index_[item.item_id] = items_.size();
    order.push_back(items_.size());
    items_.push_back(std::move(item));
  }
  renumber(std::move(order));
}

void Catalog::curate(const CurateOp& op) {
  const std::string& id = std::visit([](const auto& o) -> const std::string& { return o.item_id; }, op);
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownItem, "unknown item " + id, {{"item_id", id}});
  DesignItem& target = items_[it->second];
  if (target.deleted) throw Error(ErrorCode::AlreadyDeleted, "item already removed: " + id, {{"item_id", id}});

  std::vector<std::size_t> order;
  for (const auto* item : view()) order.push_back(index_.at(item->item_id));
  order.erase(std::find(order.begin(), order.end(), it->second));
  if (const auto* reorder = std::get_if<ReorderOp>(&op)) {
    if (reorder->new_rank < 0 || reorder->new_rank > static_cast<int>(order.size())) {
      throw Error(ErrorCode::InvalidArgument, "rank out of range", {{"rank", reorder->new_rank}});
    }
    order.insert(order.begin() + reorder->new_rank, it->second);
  } else {
    target.deleted = true;
  }
  renumber(std::move(order));
  history_.push_back(op);
}

void Catalog::renumber(std::vector<std::size_t> order) {
  for (std::size_t rank = 0; rank < order.size(); ++rank) items_[order[rank]].display_rank = static_cast<int>(rank);
  for (auto& item : items_) {
    if (item.deleted) item.display_rank = -1;
  }
}

const DesignItem* Catalog::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

const DesignItem* Catalog::find_live(const std::string& item_id) const {
  const auto* item = find(item_id);
  return item && !item->deleted ? item : nullptr;
}

std::vector<const DesignItem*> Catalog::view() const {
  std::vector<const DesignItem*> out;
  for (const auto& item : items_) {
    if (!item.deleted) out.push_back(&item);
  }
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return a->display_rank < b->display_rank; });
  return out;
}

std::vector<std::string> Catalog::ranking() const {
  std::vector<std::string> out;
  for (const auto* item : view()) out.push_back(item->item_id);
  return out;
}

std::size_t Catalog::live_count() const {
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const auto& i) { return !i.deleted; }));
}

nlohmann::json Catalog::to_json(const DesignSpace& space) const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto* item : view()) items.push_back(item->to_json(space));
  nlohmann::json removed = nlohmann::json::array();
  for (const auto& item : items_) {
    if (item.deleted) removed.push_back(item.item_id);
  }
  return {{"items", items}, {"removed", removed}};
}

}  // namespace designbridge
