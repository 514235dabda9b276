#include "designbridge/preference_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"
#include "designbridge/rng.hpp"

namespace designbridge {

namespace {

void append_le64(std::vector<std::uint8_t>& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

HybridFeature build_feature(const DesignSpace& space, const DesignItem& item) {
  HybridFeature f;
  const auto bits = encode_one_hot(space, item.design_vector);
  for (std::size_t i = 0; i < kAttributeCount; ++i) f.values[i] = bits.bits[i];
  for (std::size_t i = 0; i < kVisualSize; ++i) {
    if (!std::isfinite(item.visual_embedding[i])) {
      throw Error(ErrorCode::ValidationFailed, "visual embedding entry is not finite", {{"item_id", item.item_id}});
    }
    f.values[kAttributeCount + i] = item.visual_embedding[i];
  }
  return f;
}

Ppnn Ppnn::zeros() { return Ppnn(); }

Ppnn Ppnn::initialized(std::uint64_t seed) {
  Ppnn net;
  Rng rng(seed);
  const double limit1 = std::sqrt(6.0 / (kInputs + kHidden));
  for (std::size_t i = 0; i < kW1; ++i) net.params_[i] = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / (kHidden + 1));
  for (std::size_t j = 0; j < kHidden; ++j) net.params_[kW1 + kHidden + j] = rng.uniform(-limit2, limit2);
  return net;
}

double Ppnn::logit(std::span<const double, kInputs> x) const {
  double z = output_bias();
  for (int j = 0; j < kHidden; ++j) {
    const auto w = hidden_weights(j);
    double a = hidden_bias(j);
    for (int i = 0; i < kInputs; ++i) a += w[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    if (a > 0) z += output_weight(j) * a;
  }
  return z;
}

double Ppnn::probability(const HybridFeature& f) const { return sigmoid(logit(f)); }

std::string Ppnn::weights_hash() const {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(params_.size() * 8);
  for (double p : params_) append_le64(bytes, p);
  return sha256_hex(bytes);
}

double sigmoid(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

LossGradient loss_gradient(const Ppnn& net, std::span<const LabeledFeature> examples) {
  constexpr int I = Ppnn::kInputs, H = Ppnn::kHidden;
  constexpr std::size_t kB1 = static_cast<std::size_t>(H) * I, kW2 = kB1 + H, kB2 = kW2 + H;
  LossGradient out;
  out.gradient.assign(Ppnn::kParameterCount, 0.0);
  if (examples.empty()) return out;
  const auto params = net.parameters();
  std::array<double, H> act{};
  for (const auto& ex : examples) {
    const auto& x = ex.feature.values;
    double z = params[kB2];
    for (int j = 0; j < H; ++j) {
      const auto* w = params.data() + static_cast<std::size_t>(j) * I;
      double a = params[kB1 + static_cast<std::size_t>(j)];
      for (int i = 0; i < I; ++i) a += w[i] * x[static_cast<std::size_t>(i)];
      act[static_cast<std::size_t>(j)] = a;
      if (a > 0) z += params[kW2 + static_cast<std::size_t>(j)] * a;
    }
    const double y = ex.label;
    out.loss += softplus(z) - y * z;
    const double dz = sigmoid(z) - y;
    out.gradient[kB2] += dz;
    for (int j = 0; j < H; ++j) {
      const double a = act[static_cast<std::size_t>(j)];
      if (!(a > 0)) continue;
      out.gradient[kW2 + static_cast<std::size_t>(j)] += dz * a;
      const double da = dz * params[kW2 + static_cast<std::size_t>(j)];
      out.gradient[kB1 + static_cast<std::size_t>(j)] += da;
      auto* g = out.gradient.data() + static_cast<std::size_t>(j) * I;
      for (int i = 0; i < I; ++i) g[i] += da * x[static_cast<std::size_t>(i)];
    }
  }
  const double n = static_cast<double>(examples.size());
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  return out;
}

double loss(const Ppnn& net, std::span<const LabeledFeature> examples) {
  if (examples.empty()) return 0.0;
  double total = 0;
  for (const auto& ex : examples) {
    const double z = net.logit(ex.feature);
    total += softplus(z) - ex.label * z;
  }
  return total / static_cast<double>(examples.size());
}

Ppnn fit(Ppnn start, std::span<const LabeledFeature> examples, const TrainingConfig& config) {
  if (examples.empty()) return start;
  auto params = start.parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  double beta1_t = 1.0, beta2_t = 1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto lg = loss_gradient(start, examples);
    beta1_t *= config.beta1;
    beta2_t *= config.beta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = lg.gradient[i];
      m[i] = config.beta1 * m[i] + (1 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1 - config.beta2) * g * g;
      const double m_hat = m[i] / (1 - beta1_t);
      const double v_hat = v[i] / (1 - beta2_t);
      params[i] -= config.step_size * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  return start;
}

PreferenceModel PreferenceModel::fresh(std::uint64_t init_seed) {
  PreferenceModel m;
  m.init_seed = init_seed;
  m.net = Ppnn::initialized(init_seed);
  return m;
}

std::string PreferenceModel::history_hash() const {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : train_log) log.push_back({r.round_index, r.item_id, r.label});
  return sha256_hex(log.dump());
}

PreferenceModel train_increment(const PreferenceModel& model, std::span<const TrainingExample> batch,
                                const TrainingConfig& config) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "training batch is empty");
  PreferenceModel next = model;
  for (const auto& ex : batch) {
    if (ex.record.label != 0 && ex.record.label != 1) {
      throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1", {{"item_id", ex.record.item_id}});
    }
    next.train_log.push_back(ex.record);
    next.train_features.push_back(ex.feature);
  }
  std::vector<LabeledFeature> examples;
  examples.reserve(next.train_log.size());
  for (std::size_t i = 0; i < next.train_log.size(); ++i) {
    examples.push_back({next.train_features[i], next.train_log[i].label});
  }
  next.net = fit(Ppnn::initialized(next.init_seed), examples, config);
  ++next.version;
  return next;
}

Prediction predict(const PreferenceModel& model, const HybridFeature& feature) {
  const double z = model.net.logit(feature);
  return {sigmoid(z), z};
}

double entropy(double p) {
  p = std::clamp(p, kEntropyClamp, 1.0 - kEntropyClamp);
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::ColdStart: return "ColdStart";
    case Strategy::Entropy: return "Entropy";
    case Strategy::Random: return "Random";
  }
  return "Entropy";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "ColdStart") return Strategy::ColdStart;
  if (name == "Entropy") return Strategy::Entropy;
  if (name == "Random") return Strategy::Random;
  throw Error(ErrorCode::InvalidArgument, "unknown strategy " + std::string(name));
}

nlohmann::json RecommendationRound::to_json() const {
  return {{"round_index", round_index}, {"item_ids", item_ids}, {"strategy", strategy_name(strategy)}};
}

RecommendationRound RecommendationRound::from_json(const nlohmann::json& doc) {
  RecommendationRound r;
  r.round_index = doc.at("round_index").get<int>();
  r.item_ids = doc.at("item_ids").get<std::vector<std::string>>();
  r.strategy = strategy_from_name(doc.at("strategy").get<std::string>());
  return r;
}

std::vector<std::string> top_k_by_score(std::span<const std::string> ids, std::span<const double> scores, int k) {
  if (ids.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "ids and scores differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(order.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] < ids[b];
                    });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(ids[order[i]]);
  return out;
}

RecommendationRound select_next(const PreferenceModel& model, std::span<const Candidate> candidates, int round_index,
                                int k) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no unseen items left to recommend");
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (const auto& c : candidates) {
    ids.push_back(c.item_id);
    // Compared at the clamp resolution so that h(p) and h(1 - p), which differ
    // only by rounding, tie and fall back to the item id order.
    scores.push_back(std::round(entropy(predict(model, c.feature).probability) / kEntropyClamp));
  }
  return {round_index, top_k_by_score(ids, scores, k), Strategy::Entropy};
}

RecommendationRound select_random(std::span<const Candidate> candidates, int round_index, std::uint64_t seed, int k) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no unseen items left to recommend");
  std::vector<std::string> ids;
  for (const auto& c : candidates) ids.push_back(c.item_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  const auto take = std::min(ids.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < take; ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  ids.resize(take);
  return {round_index, ids, Strategy::Random};
}

RecommendationRound cold_start(const DesignSpace& space, std::span<const DesignItem* const> catalog,
                               std::span<const std::string> seed_ranking, int k) {
  if (catalog.empty()) throw Error(ErrorCode::NoCandidates, "catalog is empty");
  struct Entry {
    const DesignItem* item;
    OneHot51 bits;
    std::size_t position;
  };
  constexpr auto kUnranked = std::numeric_limits<std::size_t>::max();
  std::vector<Entry> pool;
  for (const auto* item : catalog) {
    const auto it = std::find(seed_ranking.begin(), seed_ranking.end(), item->item_id);
    const auto pos = it == seed_ranking.end() ? kUnranked : static_cast<std::size_t>(it - seed_ranking.begin());
    pool.push_back({item, encode_one_hot(space, item->design_vector), pos});
  }
  auto before = [](const Entry& a, const Entry& b) {
    if (a.position != b.position) return a.position < b.position;
    return a.item->item_id < b.item->item_id;
  };
  std::sort(pool.begin(), pool.end(), before);

  RecommendationRound round{0, {}, Strategy::ColdStart};
  const auto take = std::min(pool.size(), static_cast<std::size_t>(std::max(k, 0)));
  if (take == 0) return round;
  std::vector<int> min_dist(pool.size(), std::numeric_limits<int>::max());
  std::vector<bool> chosen(pool.size(), false);
  std::size_t pick = 0;  // head of the ranking, or the lowest id
  for (std::size_t n = 0; n < take; ++n) {
    if (n > 0) {
      int best = -1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!chosen[i] && min_dist[i] > best) {
          best = min_dist[i];
          pick = i;
        }
      }
    }
    chosen[pick] = true;
    round.item_ids.push_back(pool[pick].item->item_id);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!chosen[i]) min_dist[i] = std::min(min_dist[i], hamming(pool[i].bits, pool[pick].bits));
    }
  }
  return round;
}

void write_checkpoint(std::ostream& out, const PreferenceModel& model) {
  const nlohmann::json header = {{"architecture", "101-64relu-1sigmoid"},
                                 {"init_seed", model.init_seed},
                                 {"version", model.version},
                                 {"history_hash", model.history_hash()},
                                 {"parameter_count", Ppnn::kParameterCount}};
  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());
  std::array<char, 4> len_bytes{};
  for (int i = 0; i < 4; ++i) len_bytes[static_cast<std::size_t>(i)] = static_cast<char>((len >> (8 * i)) & 0xFF);
  out.write(len_bytes.data(), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double p : model.net.parameters()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p));
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b.data(), 4);
  }
  if (!out) throw Error(ErrorCode::StorageFull, "checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  auto read_u32 = [&]() {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw Error(ErrorCode::ValidationFailed, "truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  };
  const auto len = read_u32();
  if (len > (1u << 20)) throw Error(ErrorCode::ValidationFailed, "checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw Error(ErrorCode::ValidationFailed, "truncated checkpoint header");
  Checkpoint cp;
  cp.header = nlohmann::json::parse(text, nullptr, false);
  if (cp.header.is_discarded() || !cp.header.is_object()) {
    throw Error(ErrorCode::ValidationFailed, "checkpoint header is not a JSON object");
  }
  const auto count = cp.header.value("parameter_count", std::size_t{0});
  if (count != Ppnn::kParameterCount) throw Error(ErrorCode::ValidationFailed, "unexpected parameter count");
  cp.weights.reserve(count);
  for (std::size_t i = 0; i < count; ++i) cp.weights.push_back(std::bit_cast<float>(read_u32()));
  return cp;
}

}  // namespace designbridge
