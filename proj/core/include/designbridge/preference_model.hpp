#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "designbridge/catalog.hpp"
#include "designbridge/design_space.hpp"

namespace designbridge {

/// [one-hot(51) | visual(50)]
struct HybridFeature {
  std::array<double, kFeatureSize> values{};

  std::span<const double, kAttributeCount> onehot() const {
    return std::span<const double, kFeatureSize>(values).first<kAttributeCount>();
  }
  std::span<const double, kVisualSize> visual() const {
    return std::span<const double, kFeatureSize>(values).last<kVisualSize>();
  }
  bool operator==(const HybridFeature&) const = default;
};

HybridFeature build_feature(const DesignSpace& space, const DesignItem& item);

/// Personalized preference network: 101 -> 64 ReLU -> 1 logit -> sigmoid.
class Ppnn {
 public:
  static constexpr int kInputs = kFeatureSize;
  static constexpr int kHidden = 64;
  static constexpr std::size_t kParameterCount = kHidden * kInputs + kHidden + kHidden + 1;

  /// All weights zero; predicts 0.5 everywhere.
  static Ppnn zeros();
  /// Glorot-uniform hidden layer, small uniform output layer, zero biases.
  static Ppnn initialized(std::uint64_t seed);

  double logit(std::span<const double, kInputs> x) const;
  double logit(const HybridFeature& f) const { return logit(std::span<const double, kInputs>(f.values)); }
  double probability(const HybridFeature& f) const;

  /// Flat parameter view: W1 (row-major, hidden x inputs), b1, w2, b2.
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<const double> hidden_weights(int unit) const {
    return std::span<const double>(params_).subspan(static_cast<std::size_t>(unit) * kInputs, kInputs);
  }
  double hidden_bias(int unit) const { return params_[kW1 + static_cast<std::size_t>(unit)]; }
  double output_weight(int unit) const { return params_[kW1 + kHidden + static_cast<std::size_t>(unit)]; }
  double output_bias() const { return params_[kParameterCount - 1]; }

  /// SHA-256 over the little-endian bytes of every parameter.
  std::string weights_hash() const;

  bool operator==(const Ppnn&) const = default;

 private:
  static constexpr std::size_t kW1 = static_cast<std::size_t>(kHidden) * kInputs;
  Ppnn() : params_(kParameterCount, 0.0) {}
  std::vector<double> params_;
};

double sigmoid(double logit);

struct LabeledFeature {
  HybridFeature feature;
  int label = 0;
};

/// Mean binary cross-entropy over the examples and its gradient with
/// respect to every parameter (same layout as Ppnn::parameters()).
struct LossGradient {
  double loss = 0;
  std::vector<double> gradient;
};
LossGradient loss_gradient(const Ppnn& net, std::span<const LabeledFeature> examples);
double loss(const Ppnn& net, std::span<const LabeledFeature> examples);

struct TrainingConfig {
  int epochs = 200;
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Full-batch Adam on the cumulative history, starting from `start`.
Ppnn fit(Ppnn start, std::span<const LabeledFeature> examples, const TrainingConfig& config = {});

struct TrainRecord {
  int round_index = 0;
  std::string item_id;
  int label = 0;
  bool operator==(const TrainRecord&) const = default;
};

struct TrainingExample {
  TrainRecord record;
  HybridFeature feature;
};

/// Per-user model state. Training always refits from init_seed on the whole
/// label history, so the weights are a pure function of (seed, history).
struct PreferenceModel {
  Ppnn net = Ppnn::zeros();
  std::uint64_t init_seed = 0;
  std::vector<TrainRecord> train_log;
  std::vector<HybridFeature> train_features;
  int version = 0;

  static PreferenceModel fresh(std::uint64_t init_seed);
  /// SHA-256 of the canonical train_log.
  std::string history_hash() const;
};

/// Appends the batch to the history and refits. Throws EmptyBatch.
PreferenceModel train_increment(const PreferenceModel& model, std::span<const TrainingExample> batch,
                                const TrainingConfig& config = {});

struct Prediction {
  double probability = 0.5;
  double logit = 0;
};
Prediction predict(const PreferenceModel& model, const HybridFeature& feature);

inline constexpr double kEntropyClamp = 1e-12;

/// Binary entropy in bits, with p clamped to [1e-12, 1 - 1e-12].
double entropy(double p);

enum class Strategy { ColdStart, Entropy, Random };
std::string_view strategy_name(Strategy strategy);
Strategy strategy_from_name(std::string_view name);

struct RecommendationRound {
  int round_index = 0;
  std::vector<std::string> item_ids;
  Strategy strategy = Strategy::ColdStart;

  nlohmann::json to_json() const;
  static RecommendationRound from_json(const nlohmann::json& doc);
  bool operator==(const RecommendationRound&) const = default;
};

inline constexpr int kColdStartSize = 10;
inline constexpr int kRoundSize = 5;

struct Candidate {
  std::string item_id;
  HybridFeature feature;
};

/// Top-k candidates by predicted entropy (compared at 1e-12 resolution),
/// ties by ascending item id. Throws NoCandidates.
RecommendationRound select_next(const PreferenceModel& model, std::span<const Candidate> candidates, int round_index,
                                int k = kRoundSize);

/// Same ordering rule over precomputed scores; exposed for invariance tests.
std::vector<std::string> top_k_by_score(std::span<const std::string> ids, std::span<const double> scores, int k);

/// k uniformly random candidates (baseline strategy). Throws NoCandidates.
RecommendationRound select_random(std::span<const Candidate> candidates, int round_index, std::uint64_t seed,
                                  int k = kRoundSize);

/// Diversity-seeded first round: the seed-ranking head, then greedy max-min
/// Hamming distance in one-hot space, ties by seed-ranking position then id.
RecommendationRound cold_start(const DesignSpace& space, std::span<const DesignItem* const> catalog,
                               std::span<const std::string> seed_ranking, int k = kColdStartSize);

/// Checkpoint layout: u32 little-endian header length, JSON header
/// {architecture, init_seed, version, history_hash, parameter_count},
/// then every parameter as a little-endian float32.
void write_checkpoint(std::ostream& out, const PreferenceModel& model);

struct Checkpoint {
  nlohmann::json header;
  std::vector<float> weights;
};
Checkpoint read_checkpoint(std::istream& in);

}  // namespace designbridge
