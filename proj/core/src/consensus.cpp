#include "designbridge/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "designbridge/error.hpp"

namespace designbridge {

VoteCounts PreferenceTally::at(const std::string& user_id, int flat_index) const {
  auto it = counts.find(user_id);
  if (it == counts.end()) return {};
  return it->second[static_cast<std::size_t>(flat_index)];
}

PreferenceTally tally(const DesignSpace& space, const std::vector<InteractionRecord>& records,
                      const std::function<const DesignItem*(const std::string&)>& lookup) {
  PreferenceTally out;
  for (const auto& r : records) {
    if (r.kind != InteractionKind::Brush) continue;
    const DesignItem* item = lookup(r.item_id);
    if (!item) {
      ++out.skipped;
      continue;
    }
    auto& counts = out.counts[r.user_id];
    for (int d : r.confirmed_dimensions) {
      auto& c = counts[static_cast<std::size_t>(space.flat_index(item->design_vector.at(d)))];
      (r.polarity == Polarity::Like ? c.likes : c.dislikes) += 1;
    }
  }
  return out;
}

double upu(std::int64_t likes, std::int64_t dislikes) {
  if (likes < 0 || dislikes < 0) throw Error(ErrorCode::InvalidArgument, "vote counts must be non-negative");
  return static_cast<double>(likes + 1) / static_cast<double>(likes + dislikes + 2);
}

ConsensusReport consensus(const DesignSpace& space, const PreferenceTally& tally, std::vector<std::string> users,
                          std::int64_t log_offset) {
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  if (users.empty()) throw Error(ErrorCode::InvalidArgument, "consensus needs at least one user");
  ConsensusReport report;
  report.log_offset = log_offset;
  report.users = users;
  std::array<double, kAttributeCount> log_sum{};
  for (const auto& user : users) {
    auto& row = report.upu[user];
    for (int i = 0; i < kAttributeCount; ++i) {
      const auto c = tally.at(user, i);
      row[static_cast<std::size_t>(i)] = upu(c.likes, c.dislikes);
      log_sum[static_cast<std::size_t>(i)] += std::log(row[static_cast<std::size_t>(i)]);
    }
  }
  const double n = static_cast<double>(users.size());
  for (std::size_t i = 0; i < kAttributeCount; ++i) report.acs_raw[i] = std::exp(log_sum[i] / n);

  for (int d = 0; d < kDimensionCount; ++d) {
    const int begin = space.block_offset(d), end = begin + space.attribute_count(d);
    double lo = report.acs_raw[static_cast<std::size_t>(begin)], hi = lo;
    for (int i = begin; i < end; ++i) {
      lo = std::min(lo, report.acs_raw[static_cast<std::size_t>(i)]);
      hi = std::max(hi, report.acs_raw[static_cast<std::size_t>(i)]);
    }
    for (int i = begin; i < end; ++i) {
      auto& out = report.acs_norm[static_cast<std::size_t>(i)];
      if (hi == lo) {
        out = 0.5;
      } else {
        const double t = (report.acs_raw[static_cast<std::size_t>(i)] - lo) / (hi - lo);
        out = std::clamp(kAcsFloor + t * (kAcsCeiling - kAcsFloor), kAcsFloor, kAcsCeiling);
      }
    }
  }
  return report;
}

nlohmann::json ConsensusReport::to_json(const DesignSpace& space) const {
  nlohmann::json attributes = nlohmann::json::array();
  for (int i = 0; i < kAttributeCount; ++i) attributes.push_back(space.qualified_name(space.from_flat(i)));
  nlohmann::json upu_table = nlohmann::json::object();
  for (const auto& [user, row] : upu) upu_table[user] = row;
  return {{"log_offset", log_offset}, {"n", user_count()},        {"users", users},
          {"attributes", attributes}, {"upu", upu_table},         {"acs_raw", acs_raw},
          {"acs_norm", acs_norm}};
}

std::vector<int> palette_order(const DesignSpace& space, const ConsensusReport& report, int dimension) {
  std::vector<int> order(static_cast<std::size_t>(space.attribute_count(dimension)));
  std::iota(order.begin(), order.end(), 0);
  const int base = space.block_offset(dimension);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return report.acs_norm[static_cast<std::size_t>(base + a)] > report.acs_norm[static_cast<std::size_t>(base + b)];
  });
  return order;
}

}  // namespace designbridge
