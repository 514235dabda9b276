#include "designbridge/project.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"

namespace designbridge {

namespace {

Error inconsistent(std::int64_t seq, const std::string& why) {
  return Error(ErrorCode::CorruptLog, fmt::format("event {} cannot be applied: {}", seq, why), {{"seq", seq}});
}

}  // namespace

nlohmann::json ProjectConfig::to_json() const {
  return {{"project_id", project_id},
          {"name", name},
          {"seed", seed},
          {"max_rounds", max_rounds},
          {"strategy", strategy_name(strategy)}};
}

ProjectConfig ProjectConfig::from_json(const nlohmann::json& doc) {
  ProjectConfig c;
  c.project_id = doc.at("project_id").get<std::string>();
  c.name = doc.value("name", "");
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.max_rounds = doc.value("max_rounds", kDefaultMaxRounds);
  c.strategy = strategy_from_name(doc.value("strategy", "Entropy"));
  return c;
}

bool SessionState::round_complete() const {
  const auto* round = current_round();
  if (!round) return false;
  auto it = voted.find(round->round_index);
  if (it == voted.end()) return round->item_ids.empty();
  return std::all_of(round->item_ids.begin(), round->item_ids.end(),
                     [&](const std::string& id) { return it->second.count(id) > 0; });
}

int SessionState::label_count() const {
  int n = 0;
  for (const auto& [round, items] : voted) n += static_cast<int>(items.size());
  return n;
}

Project::Project(const DesignSpace& space, TrainingConfig training) : space_(&space), training_(training) {}

FilterResult Project::active_filter() const { return scene_ ? scene_->filter : FilterResult::include_all(0.0); }

const SessionState* Project::session(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : &it->second;
}

SessionState& Project::session_mut(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  return it->second;
}

std::vector<std::string> Project::users() const {
  std::vector<std::string> out;
  for (const auto& id : session_order_) {
    const auto& user = sessions_.at(id).profile.user_id;
    if (std::find(out.begin(), out.end(), user) == out.end()) out.push_back(user);
  }
  return out;
}

const PruneSet& Project::prune_set(AttributeId attribute) const {
  static const PruneSet kEmpty;
  auto it = prune_sets_.find(attribute);
  return it == prune_sets_.end() ? kEmpty : it->second;
}

const DesignItem* Project::find_item(const std::string& item_id) const {
  if (const auto* item = catalog_.find_live(item_id)) return item;
  auto it = staged_.find(item_id);
  return it == staged_.end() ? nullptr : &it->second;
}

std::string Project::next_item_id(std::size_t offset) const {
  return fmt::format("item-{:06d}", item_counter_ + 1 + offset);
}

std::string Project::next_session_id() const {
  return fmt::format("{}-session-{:04d}", config_.project_id, sessions_.size() + 1);
}

std::vector<TrainingExample> Project::round_examples(const SessionState& session, int round_index) const {
  std::vector<TrainingExample> out;
  for (const auto& r : interactions_.records()) {
    if (r.kind != InteractionKind::OverallVote || r.session_id != session.session_id || r.round_index != round_index) {
      continue;
    }
    const DesignItem* item = catalog_.find(r.item_id);
    if (!item) {
      auto it = staged_.find(r.item_id);
      if (it == staged_.end()) continue;
      item = &it->second;
    }
    out.push_back({{round_index, r.item_id, r.polarity == Polarity::Like ? 1 : 0}, build_feature(*space_, *item)});
  }
  return out;
}

void Project::apply(const Event& event, const PreferenceModel* trained) {
  if (event.seq != offset_ + 1) throw inconsistent(event.seq, fmt::format("expected seq {}", offset_ + 1));
  if (!created_ && event.kind != EventKind::ProjectCreated) throw inconsistent(event.seq, "project not created yet");
  try {
    apply_payload(event, trained);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptLog) throw;
    throw inconsistent(event.seq, e.what());
  } catch (const std::exception& e) {
    throw inconsistent(event.seq, e.what());
  }
  offset_ = event.seq;
}

void Project::apply_payload(const Event& event, const PreferenceModel* trained) {
  const auto& p = event.payload;
  switch (event.kind) {
    case EventKind::ProjectCreated: {
      if (created_) throw inconsistent(event.seq, "project created twice");
      config_ = ProjectConfig::from_json(p.at("config"));
      created_ = true;
      break;
    }
    case EventKind::FilterApplied: {
      SceneContext scene;
      scene.scene_text = p.at("scene").get<std::string>();
      scene.scene_image_ref = p.at("scene_image_ref").get<std::string>();
      scene.garment_type = p.at("garment_type").get<std::string>();
      scene.principle = p.at("principle").get<std::string>();
      scene.filter = FilterResult::from_json(*space_, p.at("filter"));
      scene_ = std::move(scene);
      break;
    }
    case EventKind::ItemsIngested: {
      std::vector<DesignItem> items;
      for (const auto& doc : p.at("items")) {
        auto item = DesignItem::from_json(*space_, doc);
        if (item.item_id != next_item_id(items.size())) {
          throw inconsistent(event.seq, "unexpected item id " + item.item_id);
        }
        items.push_back(std::move(item));
      }
      item_counter_ += items.size();
      if (p.value("staged", false)) {
        for (auto& item : items) staged_.emplace(item.item_id, std::move(item));
      } else {
        catalog_.add(std::move(items));
      }
      break;
    }
    case EventKind::Curated: {
      catalog_.curate(curate_op_from_json(p.at("op")));
      break;
    }
    case EventKind::SessionOpened: {
      SessionState s;
      s.session_id = p.at("session_id").get<std::string>();
      if (sessions_.count(s.session_id)) throw inconsistent(event.seq, "session opened twice");
      s.profile = UserProfile::from_json(p.at("profile"));
      s.model = PreferenceModel::fresh(p.at("init_seed").get<std::uint64_t>());
      session_order_.push_back(s.session_id);
      sessions_.emplace(s.session_id, std::move(s));
      break;
    }
    case EventKind::InteractionSubmitted: {
      auto record = InteractionRecord::from_json(p.at("record"));
      if (record.record_id != interactions_.next_record_id()) {
        throw inconsistent(event.seq, "unexpected record id " + record.record_id);
      }
      auto& s = session_mut(record.session_id);
      if (record.kind == InteractionKind::OverallVote) {
        const auto* round = s.current_round();
        if (!round || round->round_index != record.round_index ||
            std::find(round->item_ids.begin(), round->item_ids.end(), record.item_id) == round->item_ids.end()) {
          throw inconsistent(event.seq, "vote outside the current round");
        }
        if (!s.voted[record.round_index].insert(record.item_id).second) {
          throw inconsistent(event.seq, "second vote on " + record.item_id);
        }
      }
      interactions_.restore(std::move(record), event.dedup_key);
      break;
    }
    case EventKind::RoundIssued: {
      auto& s = session_mut(p.at("session_id").get<std::string>());
      auto round = RecommendationRound::from_json(p.at("round"));
      if (round.round_index != static_cast<int>(s.rounds.size())) throw inconsistent(event.seq, "round out of order");
      for (const auto& id : round.item_ids) {
        if (!s.shown.insert(id).second) throw inconsistent(event.seq, "item shown twice: " + id);
      }
      s.rounds.push_back(std::move(round));
      break;
    }
    case EventKind::ModelTrained: {
      auto& s = session_mut(p.at("session_id").get<std::string>());
      const int round_index = p.at("round_index").get<int>();
      const auto batch = round_examples(s, round_index);
      PreferenceModel model = trained ? *trained : train_increment(s.model, batch, training_);
      if (model.version != p.at("version").get<int>() || model.net.weights_hash() != p.at("weights_hash").get<std::string>()) {
        throw inconsistent(event.seq, "retrained weights do not match the recorded hash");
      }
      s.model = std::move(model);
      s.closed = p.value("session_closed", false);
      break;
    }
    case EventKind::TreePruned: {
      const auto attribute = space_->parse_attribute(p.at("attribute").get<std::string>());
      if (!attribute) throw inconsistent(event.seq, "unknown attribute");
      auto& set = prune_sets_[*attribute];
      const auto items = catalog_.view();
      const auto tree = build_tree(*space_, *attribute, items, interactions_.records(), set);
      apply_prune(set, tree, PruneTarget::from_json(p.at("target")), p.value("undo", false));
      if (set.empty()) prune_sets_.erase(*attribute);
      break;
    }
    case EventKind::ManifestExported: {
      const auto attribute = space_->parse_attribute(p.at("attribute").get<std::string>());
      if (!attribute) throw inconsistent(event.seq, "unknown attribute");
      manifests_.push_back({*attribute, p.at("log_offset").get<std::int64_t>(), p.at("prune_set_hash").get<std::string>(),
                            p.at("manifest_sha256").get<std::string>(), p.at("entries").get<int>()});
      break;
    }
    case EventKind::ItemSaved: {
      const auto id = p.at("item_id").get<std::string>();
      auto it = staged_.find(id);
      if (it == staged_.end()) throw inconsistent(event.seq, "no staged item " + id);
      std::vector<DesignItem> items{std::move(it->second)};
      staged_.erase(it);
      catalog_.add(std::move(items));
      break;
    }
  }
}

nlohmann::json Project::to_json() const {
  nlohmann::json doc;
  doc["created"] = created_;
  doc["config"] = config_.to_json();
  doc["log_offset"] = offset_;
  doc["item_counter"] = item_counter_;
  if (scene_) {
    doc["scene"] = {{"scene", scene_->scene_text},
                    {"scene_image_ref", scene_->scene_image_ref},
                    {"garment_type", scene_->garment_type},
                    {"principle", scene_->principle},
                    {"filter", scene_->filter.to_json(*space_)}};
  } else {
    doc["scene"] = nullptr;
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : catalog_.all()) items.push_back(item.to_json(*space_));
  doc["catalog"] = items;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : interactions_.records()) records.push_back(r.to_json());
  doc["interactions"] = records;
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& id : session_order_) {
    const auto& s = sessions_.at(id);
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : s.rounds) rounds.push_back(r.to_json());
    nlohmann::json voted = nlohmann::json::object();
    for (const auto& [round, ids] : s.voted) voted[std::to_string(round)] = ids;
    sessions.push_back({{"session_id", s.session_id},
                        {"profile", s.profile.to_json()},
                        {"rounds", rounds},
                        {"voted", voted},
                        {"closed", s.closed},
                        {"model",
                         {{"init_seed", s.model.init_seed},
                          {"version", s.model.version},
                          {"weights_hash", s.model.net.weights_hash()},
                          {"history_hash", s.model.history_hash()}}}});
  }
  doc["sessions"] = sessions;
  nlohmann::json staged = nlohmann::json::array();
  for (const auto& [id, item] : staged_) staged.push_back(item.to_json(*space_));
  doc["staged"] = staged;
  nlohmann::json prunes = nlohmann::json::object();
  for (const auto& [attr, set] : prune_sets_) prunes[DesignSpace::key(attr)] = set.to_json();
  doc["prune_sets"] = prunes;
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto& m : manifests_) {
    manifests.push_back({{"attribute", DesignSpace::key(m.attribute)},
                         {"log_offset", m.log_offset},
                         {"prune_set_hash", m.prune_set_hash},
                         {"manifest_sha256", m.manifest_sha256},
                         {"entries", m.entries}});
  }
  doc["manifests"] = manifests;
  return doc;
}

std::string Project::state_hash() const { return sha256_hex(to_json().dump()); }

Project replay(const DesignSpace& space, std::span<const Event> events, TrainingConfig training) {
  Project project(space, training);
  for (const auto& e : events) project.apply(e);
  return project;
}

}  // namespace designbridge
