#include "designbridge/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/gateway.hpp"
#include "designbridge/rng.hpp"

namespace designbridge::sim {

double SyntheticUser::utility(const DesignSpace& space, const DesignVector& v) const {
  double u = 0;
  for (int d = 0; d < kDimensionCount; ++d) u += weights[static_cast<std::size_t>(space.flat_index(v.at(d)))];
  return u;
}

int SyntheticUser::true_label(const DesignSpace& space, const DesignVector& v) const {
  return utility(space, v) > threshold ? 1 : 0;
}

std::vector<SyntheticUser::Brush> SyntheticUser::brush_policy(const DesignSpace& space, const DesignVector& v) const {
  std::array<int, kDimensionCount> order{};
  std::iota(order.begin(), order.end(), 0);
  auto weight = [&](int d) { return weights[static_cast<std::size_t>(space.flat_index(v.at(d)))]; };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(weight(a)) > std::abs(weight(b)); });
  return {{order[0], weight(order[0]) > 0}, {order[1], weight(order[1]) > 0}};
}

SyntheticUser make_user(std::string user_id, std::uint64_t seed, double noise) {
  SyntheticUser user;
  user.user_id = std::move(user_id);
  user.noise = noise;
  Rng rng(seed);
  for (auto& w : user.weights) {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += rng.uniform01();
    w = s - 6.0;
  }
  return user;
}

void SimulationConfig::validate() const {
  if (users < 1) throw Error(ErrorCode::InvalidArgument, "users must be at least 1");
  if (catalog_size < kColdStartSize) throw Error(ErrorCode::InvalidArgument, "catalog must hold at least 10 items");
  if (catalog_size > kMaxGenerationPerRequest) throw Error(ErrorCode::InvalidArgument, "catalog is limited to 500 items");
  if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "rounds must be at least 1");
  if (seeds < 1) throw Error(ErrorCode::InvalidArgument, "seeds must be at least 1");
  if (!(noise >= 0.0 && noise < 0.5)) throw Error(ErrorCode::InvalidArgument, "noise must lie in [0, 0.5)");
  if (informed_items < 0) throw Error(ErrorCode::InvalidArgument, "informed_items must be non-negative");
  if (strategies.empty()) throw Error(ErrorCode::InvalidArgument, "at least one strategy is required");
  for (auto s : strategies) {
    if (s == Strategy::ColdStart) throw Error(ErrorCode::InvalidArgument, "strategy must be Entropy or Random");
  }
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "scores and labels differ in length");
  double pos = 0, neg = 0, wins = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) {
      ++pos;
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) return 0.5;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / (pos * neg);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "spearman inputs differ in length");
  if (a.size() < 2) return 0.0;
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

struct Measured {
  double train_accuracy, heldout_accuracy, heldout_auc, mean_entropy;
};

Measured measure(const DesignSpace& space, const Project& project, const SessionState& session,
                 const SyntheticUser& user) {
  Measured m{};
  int correct = 0;
  for (std::size_t i = 0; i < session.model.train_log.size(); ++i) {
    const double p = predict(session.model, session.model.train_features[i]).probability;
    correct += (p > 0.5 ? 1 : 0) == session.model.train_log[i].label;
  }
  m.train_accuracy = session.model.train_log.empty() ? 0.0 : static_cast<double>(correct) / session.model.train_log.size();

  std::vector<double> scores;
  std::vector<int> labels;
  double entropy_sum = 0;
  int heldout_correct = 0;
  for (const auto* item : project.catalog().view()) {
    if (session.shown.count(item->item_id)) continue;
    const double p = predict(session.model, build_feature(space, *item)).probability;
    const int y = user.true_label(space, item->design_vector);
    scores.push_back(p);
    labels.push_back(y);
    entropy_sum += entropy(p);
    heldout_correct += (p > 0.5 ? 1 : 0) == y;
  }
  if (!scores.empty()) {
    m.heldout_accuracy = static_cast<double>(heldout_correct) / static_cast<double>(scores.size());
    m.heldout_auc = auc(scores, labels);
    m.mean_entropy = entropy_sum / static_cast<double>(scores.size());
  }
  return m;
}

nlohmann::json zone_region(const DesignSpace& space, int dimension) {
  const auto& zone = space.dimension(dimension).layout.zones.front();
  const int w = space.image_width(), h = space.image_height();
  const int x0 = std::clamp(static_cast<int>(std::floor(zone.x0 * w)), 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(zone.y0 * h)), 0, h - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(zone.x1 * w)), x0 + 1, w);
  const int y1 = std::clamp(static_cast<int>(std::ceil(zone.y1 * h)), y0 + 1, h);
  return BrushRegion{x0, y0, x1, y1, w, h}.to_json();
}

void run_one(const SimulationConfig& config, const DesignSpace& space, std::uint64_t seed, Strategy strategy,
             SimulationResult& result, std::map<std::uint64_t, std::map<Strategy, double>>& final_auc) {
  GatewayConfig gc;
  gc.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
  gc.max_rounds = config.rounds;
  gc.snapshot_interval = 0;
  Gateway gateway(gc, space);
  const auto project = gateway.create_project(
      {{"name", fmt::format("sim-{}", seed)}, {"seed", seed}, {"strategy", strategy_name(strategy)}})["project_id"]
                           .get<std::string>();
  gateway.framing(project, {{"type", space.dimension(kType).attributes.front().name}, {"strictness", 0.0}});
  gateway.generate_library(project, {{"n", config.catalog_size}});

  std::vector<SyntheticUser> users;
  for (int u = 0; u < config.users; ++u) {
    auto user = make_user(fmt::format("user-{}", u + 1), derive_seed(seed, fmt::format("user|{}", u)), config.noise);
    std::vector<double> utilities;
    gateway.inspect(project, [&](const Project& p) {
      for (const auto* item : p.catalog().view()) utilities.push_back(user.utility(space, item->design_vector));
    });
    std::sort(utilities.begin(), utilities.end());
    const std::size_t mid = utilities.size() / 2;
    user.threshold = utilities.size() % 2 ? utilities[mid] : (utilities[mid - 1] + utilities[mid]) / 2.0;
    users.push_back(std::move(user));
  }

  std::vector<double> user_final;
  for (const auto& user : users) {
    Rng flips(derive_seed(seed, "noise|" + user.user_id));
    auto opened = gateway.open_session(project, {{"user_id", user.user_id}, {"gender", "F"}, {"height_cm", 165},
                                                 {"weight_kg", 55}});
    const auto session_id = opened["session_id"].get<std::string>();
    nlohmann::json round = opened["round"];
    while (!round.is_null()) {
      nlohmann::json last;
      const int round_index = round["round_index"].get<int>();
      for (const auto& item_doc : round["items"]) {
        const auto item_id = item_doc["item_id"].get<std::string>();
        const auto v = vector_from_json(space, item_doc["design_vector"]);
        for (const auto& brush : user.brush_policy(space, v)) {
          gateway.submit_interaction(session_id, {{"kind", "Brush"},
                                                  {"item_id", item_id},
                                                  {"polarity", brush.like ? "Like" : "Dislike"},
                                                  {"region", zone_region(space, brush.dimension)},
                                                  {"confirmed_dimensions", {brush.dimension}}});
        }
        int label = user.true_label(space, v);
        if (user.noise > 0 && flips.bernoulli(user.noise)) label = 1 - label;
        last = gateway.submit_vote(session_id, {{"item_id", item_id}, {"polarity", label ? "Like" : "Dislike"}});
      }
      gateway.inspect(project, [&](const Project& p) {
        const auto& s = *p.session(session_id);
        const auto m = measure(space, p, s, user);
        result.rounds.push_back({seed, strategy, user.user_id, round_index, s.label_count(), m.train_accuracy,
                                 m.heldout_accuracy, m.heldout_auc, m.mean_entropy});
      });
      round = last.value("session_closed", false) ? nlohmann::json() : last["next_round"];
    }
    user_final.push_back(result.rounds.back().heldout_auc);
  }
  final_auc[seed][strategy] = std::accumulate(user_final.begin(), user_final.end(), 0.0) / user_final.size();

  // Consensus recovery against planted desirability.
  const auto report = gateway.consensus(project);
  for (int d = 0; d < kDimensionCount; ++d) {
    std::vector<double> acs, planted;
    for (int a = 0; a < space.attribute_count(d); ++a) {
      const auto flat = static_cast<std::size_t>(space.flat_index({d, a}));
      acs.push_back(report["acs_raw"][flat].get<double>());
      double mean = 0;
      for (const auto& u : users) mean += u.weights[flat];
      planted.push_back(mean / static_cast<double>(users.size()));
    }
    result.consensus.push_back({seed, strategy, d, spearman(acs, planted)});
  }

  // Informed generation from the consensus winners.
  if (config.informed_items > 0) {
    nlohmann::json selection = nlohmann::json::object();
    for (int d = 0; d < kDimensionCount; ++d) {
      int best = 0;
      for (int a = 1; a < space.attribute_count(d); ++a) {
        const auto flat = static_cast<std::size_t>(space.flat_index({d, a}));
        if (report["acs_raw"][flat].get<double>() >
            report["acs_raw"][static_cast<std::size_t>(space.flat_index({d, best}))].get<double>()) {
          best = a;
        }
      }
      selection[space.dimension(d).name] = space.attribute_name({d, best});
    }
    const auto informed = gateway.informed(
        project, {{"selection", selection},
                  {"detail", {{space.dimension(kType).name, "a shape preferred by the panel"}}},
                  {"n", config.informed_items}});
    gateway.save_item(project, informed["items"][0]["item"]["item_id"].get<std::string>(), nlohmann::json::object());
  }
}

}  // namespace

SimulationResult simulate(const SimulationConfig& config, const DesignSpace& space) {
  config.validate();
  SimulationResult result;
  std::map<std::uint64_t, std::map<Strategy, double>> final_auc;
  for (int i = 0; i < config.seeds; ++i) {
    const std::uint64_t seed = config.seed_base + static_cast<std::uint64_t>(i);
    for (auto strategy : config.strategies) run_one(config, space, seed, strategy, result, final_auc);
  }
  const bool paired = std::count(config.strategies.begin(), config.strategies.end(), Strategy::Entropy) &&
                      std::count(config.strategies.begin(), config.strategies.end(), Strategy::Random);
  if (paired) {
    for (const auto& [seed, by_strategy] : final_auc) {
      result.comparison.push_back({seed, by_strategy.at(Strategy::Entropy), by_strategy.at(Strategy::Random)});
    }
  }
  return result;
}

double SimulationResult::mean_final_auc(Strategy strategy) const {
  // Last round per (seed, user) for the strategy.
  std::map<std::pair<std::uint64_t, std::string>, const RoundMetrics*> last;
  for (const auto& r : rounds) {
    if (r.strategy != strategy) continue;
    auto& slot = last[{r.seed, r.user_id}];
    if (!slot || r.round >= slot->round) slot = &r;
  }
  std::map<std::uint64_t, std::pair<double, int>> per_seed;
  for (const auto& [key, r] : last) {
    per_seed[key.first].first += r->heldout_auc;
    per_seed[key.first].second += 1;
  }
  if (per_seed.empty()) return 0.0;
  double total = 0;
  for (const auto& [seed, acc] : per_seed) total += acc.first / acc.second;
  return total / static_cast<double>(per_seed.size());
}

std::string SimulationResult::rounds_csv() const {
  std::string out = "seed,strategy,user_id,round,labels,train_accuracy,heldout_accuracy,heldout_auc,mean_entropy\n";
  for (const auto& r : rounds) {
    out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.seed, strategy_name(r.strategy),
                       csv_field(r.user_id), r.round, r.labels, r.train_accuracy, r.heldout_accuracy, r.heldout_auc,
                       r.mean_entropy);
  }
  return out;
}

std::string SimulationResult::consensus_csv(const DesignSpace& space) const {
  std::string out = "seed,strategy,dimension,spearman\n";
  for (const auto& c : consensus) {
    out += fmt::format("{},{},{},{:.6f}\n", c.seed, strategy_name(c.strategy), csv_field(space.dimension(c.dimension).name),
                       c.spearman);
  }
  return out;
}

std::string SimulationResult::comparison_csv() const {
  std::string out = "seed,auc_entropy,auc_random,difference,sign\n";
  double se = 0, sr = 0;
  auto sign = [](double x) { return x > 0 ? "+" : x < 0 ? "-" : "0"; };
  for (const auto& c : comparison) {
    const double diff = c.auc_entropy - c.auc_random;
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{}\n", c.seed, c.auc_entropy, c.auc_random, diff, sign(diff));
    se += c.auc_entropy;
    sr += c.auc_random;
  }
  if (!comparison.empty()) {
    const double n = static_cast<double>(comparison.size());
    const double diff = (se - sr) / n;
    out += fmt::format("mean,{:.6f},{:.6f},{:.6f},{}\n", se / n, sr / n, diff, sign(diff));
  }
  return out;
}

}  // namespace designbridge::sim
