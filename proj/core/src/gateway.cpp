#include "designbridge/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "designbridge/attribution.hpp"
#include "designbridge/consensus.hpp"
#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"
#include "designbridge/palette.hpp"
#include "designbridge/rng.hpp"

namespace designbridge {

std::string_view backend_mode_name(BackendMode mode) { return mode == BackendMode::Mock ? "mock" : "external"; }

BackendMode backend_mode_from_name(std::string_view name) {
  if (name == "mock") return BackendMode::Mock;
  if (name == "external") return BackendMode::External;
  throw Error(ErrorCode::InvalidArgument, "backend mode must be mock or external");
}

BackendSuite BackendSuite::make(BackendMode mode, const DesignSpace& space, BlobStore& blobs, std::uint64_t seed) {
  BackendSuite suite;
  suite.mode = mode;
  suite.region = std::make_unique<HeuristicRegionBackend>(space);
  suite.framing_fallback = std::make_unique<RuleFramingBackend>(space, FilterRuleTable::defaults());
  if (mode == BackendMode::Mock) {
    suite.generation = std::make_unique<MockGenerationBackend>(space, blobs, derive_seed(seed, "generation"));
    suite.embedding = std::make_unique<MockEmbeddingBackend>(derive_seed(seed, "embedding"));
    suite.tryon = std::make_unique<MockTryOnBackend>(space, blobs);
    suite.framing = std::make_unique<RuleFramingBackend>(space, FilterRuleTable::defaults());
  } else {
    suite.generation = std::make_unique<UnavailableGenerationBackend>();
    suite.embedding = std::make_unique<UnavailableEmbeddingBackend>();
    suite.tryon = std::make_unique<UnavailableTryOnBackend>();
    suite.framing = std::make_unique<LlmFramingBackend>(space, LlmFramingBackend::Completion{});
  }
  return suite;
}

struct Gateway::ProjectSlot {
  ProjectConfig config;
  mutable std::shared_mutex mutex;
  EventLog log;
  Project project;
  BackendSuite backends;
  std::optional<std::filesystem::path> dir;

  ProjectSlot(const DesignSpace& space, const TrainingConfig& training) : project(space, training) {}
};

namespace {

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

AttributeId parse_attribute_or_throw(const DesignSpace& space, const std::string& text) {
  auto id = space.parse_attribute(text);
  if (!id) throw Error(ErrorCode::InvalidArgument, "unknown attribute " + text, {{"attribute", text}});
  return *id;
}

std::optional<std::string> optional_string(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  return body[key].get<std::string>();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::StorageFull, "cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

BrushRegion region_from_body(const nlohmann::json& body, const DesignItem& item) {
  if (body.contains("region") && !body["region"].is_null()) {
    auto region = BrushRegion::from_json(body["region"]);
    if (!region.valid() || region.image_w != item.image_width || region.image_h != item.image_height) {
      throw Error(ErrorCode::InvalidRegion, "region does not fit the item image", {{"region", body["region"]}});
    }
    return region;
  }
  if (body.contains("path")) {
    std::vector<Point> path;
    for (const auto& p : body["path"]) path.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return bounding_region(path, body.value("radius", 8.0), item.image_width, item.image_height);
  }
  throw Error(ErrorCode::InvalidRegion, "brush needs a region or a path");
}

std::vector<int> dimensions_from_body(const DesignSpace& space, const nlohmann::json& list) {
  std::vector<int> out;
  for (const auto& d : list) {
    if (d.is_number_integer()) {
      out.push_back(d.get<int>());
    } else {
      auto idx = space.find_dimension(d.get<std::string>());
      if (!idx) throw Error(ErrorCode::InvalidArgument, "unknown dimension " + d.get<std::string>());
      out.push_back(*idx);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

nlohmann::json hypothesis_json(const DesignSpace& space, const std::vector<DimensionScore>& scores) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : scores) {
    out.push_back({{"dimension", s.dimension}, {"name", space.dimension(s.dimension).name}, {"confidence", s.confidence}});
  }
  return out;
}

std::vector<Candidate> unseen_candidates(const DesignSpace& space, const Project& project, const SessionState& s) {
  std::vector<Candidate> out;
  for (const auto* item : project.catalog().view()) {
    if (!s.shown.count(item->item_id)) out.push_back({item->item_id, build_feature(space, *item)});
  }
  return out;
}

ConsensusReport project_consensus(const DesignSpace& space, const Project& project) {
  const auto t = tally(space, project.interactions().records(),
                       [&](const std::string& id) { return project.catalog().find(id); });
  auto users = project.users();
  if (users.empty()) {
    ConsensusReport empty;
    empty.log_offset = project.log_offset();
    empty.acs_raw.fill(0.5);
    empty.acs_norm.fill(0.5);
    return empty;
  }
  return consensus(space, t, users, project.log_offset());
}

/// Latest model per user, in session-open order.
std::vector<UserModelRef> user_models(const Project& project) {
  std::map<std::string, const SessionState*> latest;
  std::vector<std::string> order = project.users();
  for (const auto& [id, s] : project.sessions()) {
    auto& slot = latest[s.profile.user_id];
    if (!slot || s.model.version > slot->model.version ||
        (s.model.version == slot->model.version && s.session_id > slot->session_id)) {
      slot = &s;
    }
  }
  std::vector<UserModelRef> out;
  for (const auto& user : order) out.push_back({user, &latest.at(user)->model.net});
  return out;
}

}  // namespace

Gateway::Gateway(GatewayConfig config, const DesignSpace& space) : config_(std::move(config)), space_(&space) {
  if (config_.data_dir) {
    std::filesystem::create_directories(*config_.data_dir);
    blobs_ = std::make_unique<BlobStore>(*config_.data_dir / "blobs");
  } else {
    blobs_ = std::make_unique<BlobStore>();
  }
  load_existing();
}

Gateway::~Gateway() = default;

std::string Gateway::now() const { return config_.clock ? config_.clock() : iso_now(); }

std::unique_ptr<Gateway::ProjectSlot> Gateway::make_slot(const ProjectConfig& config, EventLog log) {
  auto slot = std::make_unique<ProjectSlot>(*space_, config_.training);
  slot->config = config;
  slot->log = std::move(log);
  if (config_.data_dir) slot->dir = *config_.data_dir / "projects" / config.project_id;
  slot->backends = config_.backend_factory ? config_.backend_factory(config, *blobs_)
                                           : BackendSuite::make(config_.mode, *space_, *blobs_, config.seed);
  return slot;
}

void Gateway::load_existing() {
  if (!config_.data_dir) return;
  const auto root = *config_.data_dir / "projects";
  if (!std::filesystem::exists(root)) return;
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "events.jsonl")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    auto log = EventLog::open(dir / "events.jsonl");
    if (log.events().empty()) continue;
    const auto config = ProjectConfig::from_json(log.events().front().payload.at("config"));
    auto slot = make_slot(config, std::move(log));
    for (const auto& e : slot->log.events()) {
      if (e.kind == EventKind::ManifestExported) restore_manifest(*slot, e);
      slot->project.apply(e);
      if (e.kind == EventKind::InteractionSubmitted) restore_mask(*slot, e);
    }
    write_snapshot(*slot);
    for (const auto& [sid, s] : slot->project.sessions()) session_index_[sid] = config.project_id;
    int number = 0;
    if (std::sscanf(config.project_id.c_str(), "proj-%d", &number) == 1) project_counter_ = std::max(project_counter_, number);
    projects_[config.project_id] = std::move(slot);
  }
}

Gateway::ProjectSlot& Gateway::slot(const std::string& project_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = projects_.find(project_id);
  if (it == projects_.end()) {
    throw Error(ErrorCode::UnknownProject, "unknown project " + project_id, {{"project_id", project_id}});
  }
  return *it->second;
}

std::string Gateway::project_of_session(const std::string& session_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = session_index_.find(session_id);
  if (it == session_index_.end()) {
    throw Error(ErrorCode::UnknownSession, "unknown session " + session_id, {{"session_id", session_id}});
  }
  return it->second;
}

std::int64_t Gateway::commit(ProjectSlot& s, EventKind kind, nlohmann::json payload,
                             std::optional<std::string> dedup_key, const PreferenceModel* trained) {
  const auto before = s.log.size();
  const auto seq = s.log.append(kind, std::move(payload), std::move(dedup_key), now());
  if (s.log.size() > before) {
    s.project.apply(s.log.events().back(), trained);
    maybe_snapshot(s);
  }
  return seq;
}

void Gateway::check_expected_offset(const ProjectSlot& s, const nlohmann::json& body) const {
  if (!body.is_object() || !body.contains("expected_offset") || body["expected_offset"].is_null()) return;
  const auto expected = body["expected_offset"].get<std::int64_t>();
  if (expected != s.project.log_offset()) {
    throw Error(ErrorCode::StaleSnapshot, "the project changed since the client's snapshot",
                {{"expected_offset", expected}, {"log_offset", s.project.log_offset()}});
  }
}

void Gateway::maybe_snapshot(ProjectSlot& s) {
  if (!s.dir || config_.snapshot_interval <= 0) return;
  if (s.project.log_offset() % config_.snapshot_interval != 0) return;
  write_snapshot(s);
}

void Gateway::write_snapshot(ProjectSlot& s) {
  if (!s.dir) return;
  write_file(*s.dir / "snapshot.json", s.project.to_json().dump() + "\n");
  write_file(*s.dir / "catalog.json", s.project.catalog().to_json(*space_).dump(2) + "\n");
}

void Gateway::restore_mask(ProjectSlot& s, const Event& e) {
  if (!s.dir) return;
  const auto record = InteractionRecord::from_json(e.payload.at("record"));
  if (record.kind != InteractionKind::Brush || !record.region) return;
  const auto base = *s.dir / "masks" / record.record_id;
  if (std::filesystem::exists(base.string() + ".png") && std::filesystem::exists(base.string() + ".json")) return;
  const auto mask = rasterize_mask(*record.region).to_png();
  write_file(base.string() + ".png", std::string_view(reinterpret_cast<const char*>(mask.data()), mask.size()));
  write_file(base.string() + ".json", mask_sidecar(record.item_id, record.record_id, *record.region).dump(2) + "\n");
}

void Gateway::restore_manifest(ProjectSlot& s, const Event& e) {
  // Runs before the event is applied, so the project is at the export snapshot.
  if (!s.dir) return;
  const auto parsed = space_->parse_attribute(e.payload.at("attribute").get<std::string>());
  if (!parsed) return;
  const auto id = *parsed;
  auto& p = s.project;
  const auto dir = *s.dir / "manifests" / fmt::format("{}@{}", DesignSpace::key(id), p.log_offset());
  if (std::filesystem::exists(dir / "manifest.json")) return;
  const auto& set = p.prune_set(id);
  const auto t = build_tree(*space_, id, p.catalog().view(), p.interactions().records(), set);
  const auto result = designbridge::export_manifest(
      *space_, t, [&](const std::string& item_id) { return p.catalog().find_live(item_id); },
      p.interactions().records(), p.log_offset(), set);
  const auto* bundle = std::get_if<ManifestBundle>(&result);
  if (!bundle || sha256_hex(bundle->manifest.to_json(*space_).dump(2) + "\n") !=
                     e.payload.at("manifest_sha256").get<std::string>()) {
    throw Error(ErrorCode::CorruptLog, fmt::format("event log is corrupt at seq {}: manifest does not rebuild", e.seq),
                {{"seq", e.seq}});
  }
  write_manifest(dir, *space_, *bundle);
}

// ---------------------------------------------------------------- projects

nlohmann::json Gateway::create_project(const nlohmann::json& body) {
  ProjectConfig config;
  config.name = body.value("name", "");
  config.seed = body.value("seed", config_.default_seed);
  config.max_rounds = body.value("max_rounds", config_.max_rounds);
  config.strategy = strategy_from_name(body.value("strategy", "Entropy"));
  if (config.max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be at least 1");
  if (config.strategy == Strategy::ColdStart) throw Error(ErrorCode::InvalidArgument, "strategy must be Entropy or Random");

  std::unique_lock lock(registry_mutex_);
  config.project_id = fmt::format("proj-{:04d}", project_counter_ + 1);
  EventLog log;
  if (config_.data_dir) log = EventLog::open(*config_.data_dir / "projects" / config.project_id / "events.jsonl");
  auto slot = make_slot(config, std::move(log));
  commit(*slot, EventKind::ProjectCreated, {{"config", config.to_json()}});
  ++project_counter_;
  projects_[config.project_id] = std::move(slot);
  return {{"project_id", config.project_id}, {"config", config.to_json()}, {"log_offset", 1}};
}

nlohmann::json Gateway::list_projects() const {
  std::shared_lock lock(registry_mutex_);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, slot] : projects_) {
    std::shared_lock plock(slot->mutex);
    out.push_back({{"project_id", id}, {"name", slot->config.name}, {"log_offset", slot->project.log_offset()}});
  }
  return {{"projects", out}};
}

nlohmann::json Gateway::project_summary(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  const auto& p = s.project;
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& [id, session] : p.sessions()) {
    sessions.push_back({{"session_id", id},
                        {"user_id", session.profile.user_id},
                        {"rounds", session.rounds.size()},
                        {"labels", session.label_count()},
                        {"closed", session.closed}});
  }
  return {{"project_id", project_id},
          {"config", s.config.to_json()},
          {"log_offset", p.log_offset()},
          {"library_size", p.catalog().live_count()},
          {"staged", p.staged().size()},
          {"interactions", p.interactions().records().size()},
          {"users", p.users()},
          {"sessions", sessions},
          {"backend_mode", backend_mode_name(s.backends.mode)},
          {"filter", p.active_filter().to_json(*space_)},
          {"state_hash", p.state_hash()}};
}

// ---------------------------------------------------------------- framing & library

nlohmann::json Gateway::framing(const std::string& project_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  FramingRequest request;
  request.garment_type = body.at("type").get<std::string>();
  request.scene = body.value("scene", "");
  request.principle = body.value("principle", "");
  request.strictness = body.value("strictness", 0.0);
  const auto result = filter_attributes(*space_, request, *s.backends.framing, *s.backends.framing_fallback);

  std::string scene_ref;
  bool scene_available = true;
  try {
    scene_ref = s.backends.generation->generate_scene(render_background_prompt(request.scene)).blob_id;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BackendUnavailable) throw;
    scene_available = false;
  }
  commit(s, EventKind::FilterApplied,
         {{"scene", request.scene},
          {"scene_image_ref", scene_ref},
          {"garment_type", request.garment_type},
          {"principle", request.principle},
          {"filter", result.to_json(*space_)}});
  return {{"filter", result.to_json(*space_)},
          {"backend", result.fallback() ? s.backends.framing_fallback->name() : s.backends.framing->name()},
          {"scene_image_ref", scene_ref},
          {"scene_image_available", scene_available},
          {"log_offset", s.project.log_offset()}};
}

nlohmann::json Gateway::generate_library(const std::string& project_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  const int requested = body.value("n", 0);
  if (requested < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1", {{"n", requested}});
  const int n = std::min(requested, kMaxGenerationPerRequest);
  auto& p = s.project;
  const auto seed = body.contains("seed") ? body["seed"].get<std::uint64_t>()
                                          : derive_seed(s.config.seed, fmt::format("library|{}", p.log_offset()));
  const auto vectors = sample_design_vectors(*space_, p.active_filter(), n, seed);
  std::size_t counter = 0;
  auto items = ingest_generated(*space_, vectors, *s.backends.generation, *s.backends.embedding, Origin::Framing,
                                [&] { return p.next_item_id(counter++); });
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& item : items) docs.push_back(item.to_json(*space_));
  commit(s, EventKind::ItemsIngested, {{"items", docs}, {"staged", false}});
  nlohmann::json out_items = nlohmann::json::array();
  for (const auto& item : items) out_items.push_back(p.catalog().find(item.item_id)->to_json(*space_));
  return {{"items", out_items}, {"requested", requested}, {"generated", n}, {"log_offset", p.log_offset()}};
}

nlohmann::json Gateway::curate(const std::string& project_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  std::vector<CurateOp> ops;
  if (body.contains("ops")) {
    for (const auto& op : body["ops"]) ops.push_back(curate_op_from_json(op));
  } else {
    ops.push_back(curate_op_from_json(body));
  }
  if (ops.empty()) throw Error(ErrorCode::InvalidArgument, "no curate operations given");
  Catalog trial = s.project.catalog();
  for (const auto& op : ops) trial.curate(op);
  for (const auto& op : ops) commit(s, EventKind::Curated, {{"op", curate_op_to_json(op)}});
  auto out = s.project.catalog().to_json(*space_);
  out["log_offset"] = s.project.log_offset();
  return out;
}

nlohmann::json Gateway::library(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  auto out = s.project.catalog().to_json(*space_);
  nlohmann::json staged = nlohmann::json::array();
  for (const auto& [id, item] : s.project.staged()) staged.push_back(item.to_json(*space_));
  out["staged"] = staged;
  out["log_offset"] = s.project.log_offset();
  return out;
}

// ---------------------------------------------------------------- sessions

nlohmann::json Gateway::round_json(const ProjectSlot& s, const SessionState& session) const {
  nlohmann::json doc = {{"session_id", session.session_id},
                        {"session_closed", session.closed},
                        {"labels", session.label_count()},
                        {"log_offset", s.project.log_offset()}};
  const auto* round = session.current_round();
  if (!round) {
    doc["round"] = nullptr;
    return doc;
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto& id : round->item_ids) {
    const DesignItem* item = s.project.catalog().find(id);
    if (item) items.push_back(item->to_json(*space_));
  }
  nlohmann::json voted = nlohmann::json::array();
  if (auto it = session.voted.find(round->round_index); it != session.voted.end()) voted = it->second;
  doc["round"] = round->to_json();
  doc["round"]["items"] = items;
  doc["round"]["voted"] = voted;
  doc["round"]["complete"] = session.round_complete();
  return doc;
}

nlohmann::json Gateway::open_session(const std::string& project_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  auto& p = s.project;
  auto profile = UserProfile::from_json(body);
  if (profile.gender != Gender::Unspecified) profile.validate();
  if (profile.user_id.empty()) throw Error(ErrorCode::InvalidArgument, "user_id is required");
  const auto items = p.catalog().view();
  if (items.empty()) throw Error(ErrorCode::NoCandidates, "the design library is empty");

  const auto session_id = p.next_session_id();
  const auto resolved = resolve_profile(profile, derive_seed(s.config.seed, "profile|" + session_id));
  const auto ranking = p.catalog().ranking();
  const auto round = cold_start(*space_, items, ranking, kColdStartSize);
  commit(s, EventKind::SessionOpened,
         {{"session_id", session_id},
          {"profile", resolved.to_json()},
          {"init_seed", derive_seed(s.config.seed, "ppnn|" + session_id)}});
  commit(s, EventKind::RoundIssued, {{"session_id", session_id}, {"round", round.to_json()}});
  {
    std::unique_lock rlock(registry_mutex_);
    session_index_[session_id] = project_id;
  }
  auto out = round_json(s, *p.session(session_id));
  out["profile"] = resolved.to_json();
  out["profile_generated"] = profile.gender == Gender::Unspecified;
  return out;
}

nlohmann::json Gateway::current_round(const std::string& session_id) const {
  auto& s = slot(project_of_session(session_id));
  std::shared_lock lock(s.mutex);
  return round_json(s, *s.project.session(session_id));
}

nlohmann::json Gateway::hypothesize(const std::string& session_id, const nlohmann::json& body) const {
  auto& s = slot(project_of_session(session_id));
  std::shared_lock lock(s.mutex);
  const auto item_id = body.at("item_id").get<std::string>();
  const DesignItem* item = s.project.find_item(item_id);
  if (!item) throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});
  const auto region = region_from_body(body, *item);
  const auto scores = hypothesize_dimensions(*item, region, *s.backends.region);
  return {{"item_id", item_id},
          {"region", region.to_json()},
          {"hypothesis", hypothesis_json(*space_, scores)},
          {"log_offset", s.project.log_offset()}};
}

nlohmann::json Gateway::submit_interaction(const std::string& session_id, const nlohmann::json& body) {
  const auto kind = kind_from_name(body.value("kind", "Brush"));
  if (kind == InteractionKind::OverallVote) return submit_vote(session_id, body);
  auto& s = slot(project_of_session(session_id));
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  auto& p = s.project;
  const auto dedup = optional_string(body, "dedup_key");
  if (dedup) {
    if (auto prior = p.interactions().find_dedup(*dedup)) {
      return {{"record_id", *prior}, {"duplicate", true}, {"log_offset", p.log_offset()}};
    }
  }
  const auto* session = p.session(session_id);
  if (session->closed) throw Error(ErrorCode::SessionClosed, "session is closed", {{"session_id", session_id}});
  const auto item_id = body.at("item_id").get<std::string>();
  const DesignItem* item = p.find_item(item_id);
  if (!item) throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});

  InteractionRecord record;
  record.record_id = p.interactions().next_record_id();
  record.user_id = session->profile.user_id;
  record.session_id = session_id;
  record.item_id = item_id;
  record.kind = InteractionKind::Brush;
  record.polarity = polarity_from_name(body.at("polarity").get<std::string>());
  record.region = region_from_body(body, *item);
  record.confirmed_dimensions = dimensions_from_body(*space_, body.value("confirmed_dimensions", nlohmann::json::array()));
  record.hypothesis = hypothesize_dimensions(*item, *record.region, *s.backends.region);
  record.comment = optional_string(body, "comment");
  record.round_index = session->current_round() ? session->current_round()->round_index : 0;
  record.validate();

  std::optional<std::string> mask_ref;
  if (s.dir) {
    const auto mask = rasterize_mask(*record.region).to_png();
    const auto base = *s.dir / "masks" / record.record_id;
    write_file(base.string() + ".png", std::string_view(reinterpret_cast<const char*>(mask.data()), mask.size()));
    write_file(base.string() + ".json", mask_sidecar(item_id, record.record_id, *record.region).dump(2) + "\n");
    mask_ref = "masks/" + record.record_id + ".png";
  }
  commit(s, EventKind::InteractionSubmitted, {{"record", record.to_json()}}, dedup);
  nlohmann::json out = {{"record_id", record.record_id},
                        {"duplicate", false},
                        {"region", record.region->to_json()},
                        {"hypothesis", hypothesis_json(*space_, record.hypothesis)},
                        {"log_offset", p.log_offset()}};
  if (mask_ref) out["mask_ref"] = *mask_ref;
  return out;
}

void Gateway::after_vote(ProjectSlot& s, const std::string& session_id, nlohmann::json& response) {
  auto& p = s.project;
  const SessionState* session = p.session(session_id);
  response["round_complete"] = session->round_complete();
  if (!session->round_complete()) return;

  const int round_index = session->current_round()->round_index;
  const auto batch = p.round_examples(*session, round_index);
  const auto model = train_increment(session->model, batch, config_.training);
  auto candidates = unseen_candidates(*space_, p, *session);
  const bool closing = static_cast<int>(session->rounds.size()) >= s.config.max_rounds || candidates.empty();
  commit(s, EventKind::ModelTrained,
         {{"session_id", session_id},
          {"round_index", round_index},
          {"version", model.version},
          {"labels", model.train_log.size()},
          {"weights_hash", model.net.weights_hash()},
          {"session_closed", closing}},
         std::nullopt, &model);
  if (!closing) {
    session = p.session(session_id);
    const int next_index = round_index + 1;
    const auto round =
        s.config.strategy == Strategy::Random
            ? select_random(candidates, next_index,
                            derive_seed(s.config.seed, fmt::format("random|{}|{}", session_id, next_index)))
            : select_next(session->model, candidates, next_index);
    commit(s, EventKind::RoundIssued, {{"session_id", session_id}, {"round", round.to_json()}});
  }
  const auto next = round_json(s, *p.session(session_id));
  response["session_closed"] = next["session_closed"];
  response["labels"] = next["labels"];
  if (!closing) response["next_round"] = next["round"];
}

nlohmann::json Gateway::submit_vote(const std::string& session_id, const nlohmann::json& body) {
  auto& s = slot(project_of_session(session_id));
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  auto& p = s.project;
  const auto dedup = optional_string(body, "dedup_key");
  if (dedup) {
    if (auto prior = p.interactions().find_dedup(*dedup)) {
      return {{"record_id", *prior}, {"duplicate", true}, {"log_offset", p.log_offset()}};
    }
  }
  const auto* session = p.session(session_id);
  if (session->closed) throw Error(ErrorCode::SessionClosed, "session is closed", {{"session_id", session_id}});
  const auto item_id = body.at("item_id").get<std::string>();
  if (!p.catalog().find(item_id) && !p.find_item(item_id)) {
    throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});
  }
  const auto* round = session->current_round();
  if (!round || std::find(round->item_ids.begin(), round->item_ids.end(), item_id) == round->item_ids.end()) {
    throw Error(ErrorCode::Conflict, "item is not part of the current round", {{"item_id", item_id}});
  }
  if (auto it = session->voted.find(round->round_index); it != session->voted.end() && it->second.count(item_id)) {
    throw Error(ErrorCode::Conflict, "item already has an overall vote in this round", {{"item_id", item_id}});
  }
  InteractionRecord record;
  record.record_id = p.interactions().next_record_id();
  record.user_id = session->profile.user_id;
  record.session_id = session_id;
  record.item_id = item_id;
  record.kind = InteractionKind::OverallVote;
  record.polarity = polarity_from_name(body.at("polarity").get<std::string>());
  record.comment = optional_string(body, "comment");
  record.round_index = round->round_index;
  record.validate();
  commit(s, EventKind::InteractionSubmitted, {{"record", record.to_json()}}, dedup);
  nlohmann::json out = {{"record_id", record.record_id}, {"duplicate", false}};
  after_vote(s, session_id, out);
  out["log_offset"] = p.log_offset();
  return out;
}

nlohmann::json Gateway::tryon(const std::string& session_id, const nlohmann::json& body) {
  auto& s = slot(project_of_session(session_id));
  std::shared_lock lock(s.mutex);
  const auto& p = s.project;
  const auto item_id = body.at("item_id").get<std::string>();
  const DesignItem* item = p.find_item(item_id);
  if (!item) throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});
  const SceneContext scene = p.scene().value_or(SceneContext{});
  const auto result = request_tryon(p.session(session_id)->profile, *item, scene, *s.backends.tryon);
  return {{"blob_id", result.blob_id}, {"avatar_prompt", result.avatar_prompt}, {"log_offset", p.log_offset()}};
}

// ---------------------------------------------------------------- designer views

nlohmann::json Gateway::consensus(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  return project_consensus(*space_, s.project).to_json(*space_);
}

nlohmann::json Gateway::palette(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  const auto report = project_consensus(*space_, s.project);
  nlohmann::json columns = nlohmann::json::array();
  const auto cols = palette_columns(*space_, report);
  for (int d = 0; d < kDimensionCount; ++d) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : cols[static_cast<std::size_t>(d)]) {
      entries.push_back({{"attribute", space_->attribute_name({d, e.attribute})},
                         {"key", DesignSpace::key({d, e.attribute})},
                         {"acs_norm", e.acs_norm},
                         {"acs_raw", e.acs_raw}});
    }
    columns.push_back({{"dimension", space_->dimension(d).name}, {"attributes", entries}});
  }
  return {{"columns", columns},
          {"template", render_template(*space_, PartialSelection{})},
          {"log_offset", s.project.log_offset()}};
}

nlohmann::json Gateway::tree(const std::string& project_id, const std::string& attribute) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  const auto id = parse_attribute_or_throw(*space_, attribute);
  const auto& set = s.project.prune_set(id);
  const auto items = s.project.catalog().view();
  auto out = build_tree(*space_, id, items, s.project.interactions().records(), set).to_json(*space_);
  out["prune_set"] = set.to_json();
  out["prune_set_hash"] = set.hash();
  out["log_offset"] = s.project.log_offset();
  return out;
}

nlohmann::json Gateway::prune(const std::string& project_id, const std::string& attribute, const nlohmann::json& body) {
  auto& s = slot(project_id);
  const auto id = parse_attribute_or_throw(*space_, attribute);
  {
    std::unique_lock lock(s.mutex);
    check_expected_offset(s, body);
    const auto target = PruneTarget::from_json(body.contains("target") ? body["target"] : body);
    const bool undo = body.value("undo", false);
    PruneSet trial = s.project.prune_set(id);
    const auto items = s.project.catalog().view();
    apply_prune(trial, build_tree(*space_, id, items, s.project.interactions().records(), trial), target, undo);
    commit(s, EventKind::TreePruned,
           {{"attribute", DesignSpace::key(id)}, {"target", target.to_json()}, {"undo", undo}});
  }
  return tree(project_id, attribute);
}

nlohmann::json Gateway::export_manifest(const std::string& project_id, const std::string& attribute,
                                        const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  const auto id = parse_attribute_or_throw(*space_, attribute);
  auto& p = s.project;
  const auto& set = p.prune_set(id);
  const auto items = p.catalog().view();
  const auto t = build_tree(*space_, id, items, p.interactions().records(), set);
  auto result = designbridge::export_manifest(
      *space_, t, [&](const std::string& item_id) { return p.catalog().find_live(item_id); },
      p.interactions().records(), p.log_offset(), set);
  if (const auto* empty = std::get_if<EmptyManifest>(&result)) {
    return {{"status", "empty"},
            {"attribute", space_->qualified_name(id)},
            {"reason", empty->reason},
            {"log_offset", p.log_offset()}};
  }
  const auto& bundle = std::get<ManifestBundle>(result);
  const auto doc = bundle.manifest.to_json(*space_);
  const auto text = doc.dump(2) + "\n";
  const auto digest = sha256_hex(text);
  nlohmann::json out = {{"status", "ok"}, {"manifest", doc}, {"manifest_sha256", digest}};
  if (s.dir) {
    const auto dir = *s.dir / "manifests" / fmt::format("{}@{}", DesignSpace::key(id), p.log_offset());
    write_manifest(dir, *space_, bundle);
    out["path"] = dir.string();
  }
  commit(s, EventKind::ManifestExported,
         {{"attribute", DesignSpace::key(id)},
          {"log_offset", bundle.manifest.log_offset},
          {"prune_set_hash", bundle.manifest.prune_set_hash},
          {"manifest_sha256", digest},
          {"entries", bundle.manifest.entries.size()}});
  out["log_offset"] = p.log_offset();
  return out;
}

nlohmann::json Gateway::informed(const std::string& project_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  auto& p = s.project;
  const auto selection = PuzzleSelection::from_json(*space_, body.at("selection"));
  const auto detail = detail_from_json(*space_, body.value("detail", nlohmann::json::object()));
  const int n = body.value("n", 1);
  std::vector<std::string> adapters = body.value("adapters", std::vector<std::string>{});
  const auto live = p.catalog().view();
  AttributionConfig config{mean_feature(*space_, live)};
  const auto models = user_models(p);
  std::size_t counter = 0;
  auto generated = informed_generate(*space_, selection, detail, adapters, n, *s.backends.generation,
                                     *s.backends.embedding, models, config, [&] { return p.next_item_id(counter++); });
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& g : generated) docs.push_back(g.item.to_json(*space_));
  commit(s, EventKind::ItemsIngested, {{"items", docs}, {"staged", true}});
  nlohmann::json out_items = nlohmann::json::array();
  for (const auto& g : generated) {
    out_items.push_back({{"item", g.item.to_json(*space_)},
                         {"prompt", g.prompt},
                         {"attribution", models.empty() ? nlohmann::json() : g.attribution.to_json(*space_)}});
  }
  return {{"items", out_items}, {"log_offset", p.log_offset()}};
}

nlohmann::json Gateway::save_item(const std::string& project_id, const std::string& item_id, const nlohmann::json& body) {
  auto& s = slot(project_id);
  std::unique_lock lock(s.mutex);
  check_expected_offset(s, body);
  auto& p = s.project;
  if (!p.staged().count(item_id)) {
    if (p.catalog().find(item_id)) throw Error(ErrorCode::Conflict, "item is already in the library", {{"item_id", item_id}});
    throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});
  }
  commit(s, EventKind::ItemSaved, {{"item_id", item_id}});
  return {{"item", p.catalog().find(item_id)->to_json(*space_)}, {"log_offset", p.log_offset()}};
}

nlohmann::json Gateway::attribution(const std::string& project_id, const std::string& item_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  const auto& p = s.project;
  const DesignItem* item = p.find_item(item_id);
  if (!item) throw Error(ErrorCode::UnknownItem, "unknown item " + item_id, {{"item_id", item_id}});
  const auto models = user_models(p);
  if (models.empty()) return {{"item_id", item_id}, {"attribution", nullptr}, {"log_offset", p.log_offset()}};
  const auto live = p.catalog().view();
  AttributionConfig config{mean_feature(*space_, live)};
  const auto feature = build_feature(*space_, *item);
  std::vector<UserAttribution> per_user;
  for (const auto& m : models) per_user.push_back(attribute_user(*space_, m.user_id, *m.net, feature, config));
  return {{"item_id", item_id},
          {"attribution", aggregate(*space_, std::move(per_user)).to_json(*space_)},
          {"log_offset", p.log_offset()}};
}

// ---------------------------------------------------------------- inspection

std::string Gateway::state_hash(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  return s.project.state_hash();
}

std::vector<Event> Gateway::events(const std::string& project_id) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  return s.log.events();
}

void Gateway::inspect(const std::string& project_id, const std::function<void(const Project&)>& fn) const {
  auto& s = slot(project_id);
  std::shared_lock lock(s.mutex);
  fn(s.project);
}

}  // namespace designbridge
