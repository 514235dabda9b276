#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "designbridge/preference_model.hpp"

namespace designbridge {

using DimensionValues = std::array<double, kDimensionCount>;

struct AttributionConfig {
  HybridFeature baseline;
};

/// Mean hybrid feature over the given items.
HybridFeature mean_feature(const DesignSpace& space, std::span<const DesignItem* const> items);

/// Combines per-coalition values into exact Shapley values. values[mask] is
/// the game value of the coalition whose dimensions are the set bits of mask.
DimensionValues shapley_from_values(std::span<const double, 512> values);

/// Exact Shapley contribution of each dimension block to the model logit.
/// Coalition members take instance values, the rest baseline values; the
/// visual block always stays at the instance.
DimensionValues shapley_exact(const DesignSpace& space, const Ppnn& net, const HybridFeature& instance,
                              const AttributionConfig& config);

struct UserAttribution {
  std::string user_id;
  DimensionValues phi{};
  double logit = 0;
  double probability = 0.5;
  double baseline_logit = 0;
};

struct ShapleyReport {
  std::vector<UserAttribution> per_user;
  DimensionValues mean_abs{};
  std::vector<std::string> summary;

  nlohmann::json to_json(const DesignSpace& space) const;
};

UserAttribution attribute_user(const DesignSpace& space, const std::string& user_id, const Ppnn& net,
                               const HybridFeature& instance, const AttributionConfig& config);

/// Mean |phi| per dimension plus a one-line summary per user naming the
/// dimension with the largest |phi| and its direction.
ShapleyReport aggregate(const DesignSpace& space, std::vector<UserAttribution> per_user);

}  // namespace designbridge
