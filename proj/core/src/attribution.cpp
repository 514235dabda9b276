#include "designbridge/attribution.hpp"

#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "designbridge/error.hpp"

namespace designbridge {

HybridFeature mean_feature(const DesignSpace& space, std::span<const DesignItem* const> items) {
  HybridFeature mean;
  if (items.empty()) return mean;
  for (const auto* item : items) {
    const auto f = build_feature(space, *item);
    for (std::size_t i = 0; i < kFeatureSize; ++i) mean.values[i] += f.values[i];
  }
  for (auto& v : mean.values) v /= static_cast<double>(items.size());
  return mean;
}

DimensionValues shapley_from_values(std::span<const double, 512> values) {
  // weight[s] = s! (8 - s)! / 9!
  std::array<double, kDimensionCount> weight{};
  std::array<double, kDimensionCount + 1> factorial{1};
  for (int i = 1; i <= kDimensionCount; ++i) {
    factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
  }
  for (int s = 0; s < kDimensionCount; ++s) {
    weight[static_cast<std::size_t>(s)] = factorial[static_cast<std::size_t>(s)] *
                                          factorial[static_cast<std::size_t>(kDimensionCount - 1 - s)] /
                                          factorial[kDimensionCount];
  }
  DimensionValues phi{};
  for (unsigned mask = 0; mask < 512; ++mask) {
    const auto s = static_cast<std::size_t>(std::popcount(mask));
    for (int d = 0; d < kDimensionCount; ++d) {
      const unsigned bit = 1u << d;
      if (mask & bit) continue;
      phi[static_cast<std::size_t>(d)] += weight[s] * (values[mask | bit] - values[mask]);
    }
  }
  return phi;
}

namespace {

std::array<double, 512> coalition_values(const DesignSpace& space, const Ppnn& net, const HybridFeature& instance,
                                         const HybridFeature& baseline) {
  constexpr int H = Ppnn::kHidden;
  // Per-dimension hidden pre-activation contributions for instance and baseline.
  std::array<std::array<double, H>, kDimensionCount> inst{}, base{};
  std::array<double, H> fixed{};
  for (int j = 0; j < H; ++j) {
    const auto w = net.hidden_weights(j);
    double v = net.hidden_bias(j);
    for (int i = kAttributeCount; i < kFeatureSize; ++i) v += w[static_cast<std::size_t>(i)] * instance.values[static_cast<std::size_t>(i)];
    fixed[static_cast<std::size_t>(j)] = v;
    for (int d = 0; d < kDimensionCount; ++d) {
      double a = 0, b = 0;
      const int begin = space.block_offset(d), end = begin + space.attribute_count(d);
      for (int i = begin; i < end; ++i) {
        a += w[static_cast<std::size_t>(i)] * instance.values[static_cast<std::size_t>(i)];
        b += w[static_cast<std::size_t>(i)] * baseline.values[static_cast<std::size_t>(i)];
      }
      inst[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] = a;
      base[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] = b;
    }
  }
  std::array<double, 512> values{};
  for (unsigned mask = 0; mask < 512; ++mask) {
    double z = net.output_bias();
    for (int j = 0; j < H; ++j) {
      double a = fixed[static_cast<std::size_t>(j)];
      for (int d = 0; d < kDimensionCount; ++d) {
        a += (mask >> d & 1u) ? inst[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)]
                              : base[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
      }
      if (a > 0) z += net.output_weight(j) * a;
    }
    values[mask] = z;
  }
  return values;
}

}  // namespace

DimensionValues shapley_exact(const DesignSpace& space, const Ppnn& net, const HybridFeature& instance,
                              const AttributionConfig& config) {
  const auto values = coalition_values(space, net, instance, config.baseline);
  return shapley_from_values(values);
}

UserAttribution attribute_user(const DesignSpace& space, const std::string& user_id, const Ppnn& net,
                               const HybridFeature& instance, const AttributionConfig& config) {
  const auto values = coalition_values(space, net, instance, config.baseline);
  UserAttribution out;
  out.user_id = user_id;
  out.phi = shapley_from_values(values);
  out.logit = values[511];
  out.probability = sigmoid(out.logit);
  out.baseline_logit = values[0];
  return out;
}

ShapleyReport aggregate(const DesignSpace& space, std::vector<UserAttribution> per_user) {
  if (per_user.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate needs at least one user report");
  ShapleyReport report;
  for (const auto& u : per_user) {
    for (std::size_t d = 0; d < kDimensionCount; ++d) report.mean_abs[d] += std::abs(u.phi[d]);
    std::size_t top = 0;
    for (std::size_t d = 1; d < kDimensionCount; ++d) {
      if (std::abs(u.phi[d]) > std::abs(u.phi[top])) top = d;
    }
    const double phi = u.phi[top];
    report.summary.push_back(fmt::format("{}: {} {} the prediction (phi = {:+.4f})", u.user_id,
                                         space.dimension(static_cast<int>(top)).name,
                                         phi > 0 ? "raises" : phi < 0 ? "lowers" : "does not move", phi));
  }
  for (auto& m : report.mean_abs) m /= static_cast<double>(per_user.size());
  report.per_user = std::move(per_user);
  return report;
}

nlohmann::json ShapleyReport::to_json(const DesignSpace& space) const {
  nlohmann::json dims = nlohmann::json::array();
  for (int d = 0; d < kDimensionCount; ++d) dims.push_back(space.dimension(d).name);
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : per_user) {
    users.push_back({{"user_id", u.user_id},
                     {"phi", u.phi},
                     {"logit", u.logit},
                     {"probability", u.probability},
                     {"baseline_logit", u.baseline_logit}});
  }
  return {{"dimensions", dims}, {"per_user", users}, {"mean_abs", mean_abs}, {"summary", summary}};
}

}  // namespace designbridge
