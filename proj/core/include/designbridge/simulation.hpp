#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "designbridge/design_space.hpp"
#include "designbridge/preference_model.hpp"

namespace designbridge::sim {

/// Planted-truth user: linear utility over the one-hot encoding, labels by
/// thresholding at the median catalog utility, optional label flips.
struct SyntheticUser {
  std::string user_id;
  std::array<double, kAttributeCount> weights{};
  double noise = 0.0;
  double threshold = 0.0;

  double utility(const DesignSpace& space, const DesignVector& v) const;
  /// Noise-free label.
  int true_label(const DesignSpace& space, const DesignVector& v) const;

  struct Brush {
    int dimension = 0;
    bool like = true;
  };
  /// Brushes for the two dimensions whose chosen attribute carries the
  /// largest |weight|; polarity follows the weight's sign.
  std::vector<Brush> brush_policy(const DesignSpace& space, const DesignVector& v) const;
};

/// Draws N(0,1)-like weights (sum of uniforms) from the seed.
SyntheticUser make_user(std::string user_id, std::uint64_t seed, double noise);

struct SimulationConfig {
  int users = 3;
  int catalog_size = 200;
  int rounds = 6;
  int seeds = 20;
  std::uint64_t seed_base = 1;
  std::vector<Strategy> strategies{Strategy::Entropy, Strategy::Random};
  double noise = 0.0;
  int informed_items = 1;

  /// Throws InvalidArgument.
  void validate() const;
};

struct RoundMetrics {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Entropy;
  std::string user_id;
  int round = 0;
  int labels = 0;
  double train_accuracy = 0;
  double heldout_accuracy = 0;
  double heldout_auc = 0;
  double mean_entropy = 0;
};

struct ConsensusMetrics {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Entropy;
  int dimension = 0;
  double spearman = 0;
};

struct ComparisonRow {
  std::uint64_t seed = 0;
  double auc_entropy = 0;
  double auc_random = 0;
};

struct SimulationResult {
  std::vector<RoundMetrics> rounds;
  std::vector<ConsensusMetrics> consensus;
  std::vector<ComparisonRow> comparison;
  /// Final-round held-out AUC averaged over users, per (strategy, seed).
  double mean_final_auc(Strategy strategy) const;

  std::string rounds_csv() const;
  std::string consensus_csv(const DesignSpace& space) const;
  /// Per-seed paired AUCs plus a trailing "mean" row with the sign of the difference.
  std::string comparison_csv() const;
};

/// Drives the in-process gateway through framing, elicitation, consensus and
/// informed generation for every (seed, strategy).
SimulationResult simulate(const SimulationConfig& config, const DesignSpace& space = DesignSpace::canonical());

/// Area under the ROC curve (Mann-Whitney, ties count half). 0.5 if a class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Spearman rank correlation with average ranks for ties; 0 if either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& text);

}  // namespace designbridge::sim
