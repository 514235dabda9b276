#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "designbridge/design_space.hpp"
#include "designbridge/elicitation.hpp"

namespace designbridge {

struct VoteCounts {
  int likes = 0;
  int dislikes = 0;
  bool operator==(const VoteCounts&) const = default;
};

using AttributeCounts = std::array<VoteCounts, kAttributeCount>;

/// Per-user, per-attribute like/dislike counts derived from brush records.
struct PreferenceTally {
  std::map<std::string, AttributeCounts> counts;
  /// Records whose item could not be resolved.
  int skipped = 0;

  VoteCounts at(const std::string& user_id, int flat_index) const;
  bool operator==(const PreferenceTally&) const = default;
};

/// Each brush record adds one like or dislike to the garment's attribute in
/// every confirmed dimension. Overall votes are ignored.
PreferenceTally tally(const DesignSpace& space, const std::vector<InteractionRecord>& records,
                      const std::function<const DesignItem*(const std::string&)>& lookup);

/// Laplace-smoothed utility (L + 1) / (L + D + 2).
double upu(std::int64_t likes, std::int64_t dislikes);

inline constexpr double kAcsFloor = 0.01;
inline constexpr double kAcsCeiling = 0.99;

struct ConsensusReport {
  std::int64_t log_offset = 0;
  std::vector<std::string> users;
  std::map<std::string, std::array<double, kAttributeCount>> upu;
  std::array<double, kAttributeCount> acs_raw{};
  std::array<double, kAttributeCount> acs_norm{};

  int user_count() const { return static_cast<int>(users.size()); }
  nlohmann::json to_json(const DesignSpace& space) const;
};

/// Geometric mean of utilities across `users` (computed in log space),
/// then per-dimension min-max onto [0.01, 0.99]; constant dimensions map to 0.5.
/// Users missing from the tally contribute the uninformative 0.5.
ConsensusReport consensus(const DesignSpace& space, const PreferenceTally& tally, std::vector<std::string> users,
                          std::int64_t log_offset = 0);

/// Attributes of one dimension by descending acs_norm, ties by attribute index.
std::vector<int> palette_order(const DesignSpace& space, const ConsensusReport& report, int dimension);

}  // namespace designbridge
