#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "designbridge/error.hpp"
#include "designbridge/simulation.hpp"
#include "support.hpp"

using namespace dbt;
using namespace designbridge::sim;

TEST(Metrics, AucByHand) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  // Positive/negative pairs: (0.35 > 0.1), (0.35 < 0.4), (0.8 > both) = 3 / 4.
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  const std::vector<double> tied = {0.5, 0.5};
  const std::vector<int> ty = {0, 1};
  EXPECT_DOUBLE_EQ(auc(tied, ty), 0.5);
  const std::vector<int> one_class = {1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, one_class), 0.5);
}

TEST(Metrics, SpearmanByHand) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {5, 6, 7, 8, 7};
  // Ranks of b: 1, 2, 3.5, 5, 3.5.  d^2 sum = 0+0+0.25+1+2.25 = 3.5, but with ties
  // use Pearson on ranks: r = cov / (sd_a sd_b).
  const std::vector<double> ra = {1, 2, 3, 4, 5}, rb = {1, 2, 3.5, 5, 3.5};
  double ma = 3, mb = 3, cov = 0, va = 0, vb = 0;
  for (int i = 0; i < 5; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  EXPECT_NEAR(spearman(a, b), cov / std::sqrt(va * vb), 1e-12);
  const std::vector<double> reversed = {5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(a, reversed), -1.0);
  const std::vector<double> flat = {2, 2, 2, 2, 2};
  EXPECT_EQ(spearman(a, flat), 0.0);
}

TEST(Metrics, CsvQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(SyntheticUsers, LabelsFollowPlantedWeights) {
  const auto u = make_user("u", 5, 0.0);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vector(rng);
    EXPECT_EQ(u.true_label(space(), v), u.utility(space(), v) > u.threshold ? 1 : 0);
    const auto brushes = u.brush_policy(space(), v);
    ASSERT_EQ(brushes.size(), 2u);
    for (const auto& b : brushes) {
      const double w = u.weights[static_cast<std::size_t>(space().flat_index({b.dimension, v[b.dimension]}))];
      EXPECT_EQ(b.like, w > 0);
    }
  }
  EXPECT_EQ(make_user("u", 5, 0.0).weights, u.weights);
}

TEST(Simulation, ConfigValidation) {
  SimulationConfig c;
  c.users = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.noise = 0.7;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.catalog_size = 5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Simulation, SameConfigSameCsvBytes) {
  SimulationConfig c;
  c.seeds = 1;
  c.users = 2;
  c.catalog_size = 60;
  c.rounds = 3;
  const auto a = simulate(c), b = simulate(c);
  EXPECT_EQ(a.rounds_csv(), b.rounds_csv());
  EXPECT_EQ(a.consensus_csv(space()), b.consensus_csv(space()));
  EXPECT_EQ(a.comparison_csv(), b.comparison_csv());
  std::istringstream in(a.rounds_csv());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "seed,strategy,user_id,round,labels,train_accuracy,heldout_accuracy,heldout_auc,mean_entropy");
  std::istringstream cmp(a.comparison_csv());
  std::getline(cmp, header);
  EXPECT_EQ(header, "seed,auc_entropy,auc_random,difference,sign");
}

TEST(Simulation, NoiselessTrainingFitsAndEntropyTrendsDown) {
  SimulationConfig c;
  c.strategies = {Strategy::Entropy};
  const auto r = simulate(c);
  std::map<std::pair<std::uint64_t, int>, std::pair<double, int>> mean_entropy;
  int labelled_rounds = 0;
  for (const auto& m : r.rounds) {
    if (m.round == c.rounds - 1) {
      EXPECT_EQ(m.train_accuracy, 1.0) << m.seed << " " << m.user_id;
    }
    auto& [sum, n] = mean_entropy[{m.seed, m.round}];
    sum += m.mean_entropy;
    ++n;
    ++labelled_rounds;
  }
  EXPECT_EQ(labelled_rounds, c.seeds * c.users * c.rounds);
  int transitions = 0, non_increasing = 0;
  for (auto it = mean_entropy.begin(); it != mean_entropy.end(); ++it) {
    auto next = std::next(it);
    if (next == mean_entropy.end() || next->first.first != it->first.first) continue;
    ++transitions;
    const double before = it->second.first / it->second.second;
    const double after = next->second.first / next->second.second;
    non_increasing += after <= before;
  }
  ASSERT_EQ(transitions, c.seeds * (c.rounds - 1));
  EXPECT_GE(non_increasing, 0.7 * transitions) << non_increasing << " of " << transitions;
}
