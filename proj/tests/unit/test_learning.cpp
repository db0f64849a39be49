#include <gtest/gtest.h>

#include "gridshield/learning.hpp"
#include "gridshield/shielding.hpp"
#include "toy_models.hpp"

using namespace gridshield;

namespace {

QTable table(std::vector<double> values) {
  const std::size_t n = values.size();
  std::vector<Action> acts;
  for (std::size_t i = 0; i < n; ++i) acts.push_back({static_cast<ActionId>(i), "a" + std::to_string(i)});
  return QTable(PartitionSpec({0.0}, {1.0}, {1.0}), acts, std::move(values), std::vector<std::uint32_t>(n, 1));
}

}  // namespace

TEST(GreedyAction, Basics) {
  auto q = table({3, 7, 7});
  EXPECT_EQ(greedy_action(q, 0, ActionSet::single(0)), 0);
  EXPECT_EQ(greedy_action(q, 0, ActionSet(0b011)), 1);
  // ties go to the lowest id
  EXPECT_EQ(greedy_action(q, 0, ActionSet(0b110)), 1);
  EXPECT_THROW(greedy_action(q, 0, ActionSet{}), Error);
}

TEST(GreedyAction, TranslationInvariant) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const double shift = uniform(rng, -100, 100);
    auto shifted = v;
    for (double& x : shifted) x += shift;
    const ActionSet menu(static_cast<std::uint8_t>(1 + uniform_index(rng, 7)));
    ASSERT_EQ(greedy_action(table(v), 0, menu), greedy_action(table(shifted), 0, menu));
  }
}

TEST(GreedyAction, OffGridIsUniformOverMenu) {
  auto q = table({0, 9});
  Rng rng(1);
  int ones = 0;
  for (int i = 0; i < 1000; ++i) ones += greedy_action(q, State{5.0}, ActionSet::all(2), rng);
  EXPECT_GT(ones, 400);
  EXPECT_LT(ones, 600);
}

TEST(QUpdate, Examples) {
  auto q = table({0});
  EXPECT_EQ(q_update(q, 0, 0, 5.0, 0, ActionSet::single(0), 1.0, 0.0), 5.0);

  auto fixed = table({4, 8});
  // value already at reward + discount * max
  EXPECT_EQ(q_update(fixed, 0, 0, 0.0, 0, ActionSet::all(2), 0.3, 0.5), 4.0);

  auto loop = table({0});
  for (int i = 0; i < 200; ++i) q_update(loop, 0, 0, 1.0, 0, ActionSet::single(0), 0.5, 0.5);
  EXPECT_NEAR(loop.value(0, 0), 2.0, 1e-12);

  auto terminal = table({1});
  EXPECT_EQ(q_update(terminal, 0, 0, -3.0, std::nullopt, ActionSet{}, 1.0, 1.0), -3.0);
}

TEST(LearnConfig, Schedules) {
  LearnConfig c;
  c.episodes = 100;
  EXPECT_EQ(c.epsilon(0), 1.0);
  EXPECT_NEAR(c.epsilon(40), 1.0 + (0.05 - 1.0) * 0.5, 1e-12);
  EXPECT_EQ(c.epsilon(80), 0.05);
  EXPECT_EQ(c.epsilon(99), 0.05);
  EXPECT_EQ(c.alpha(0), 1.0);
  EXPECT_NEAR(c.alpha(100), 0.5, 1e-12);
  c.discount = 2;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Train, CorridorMatchesValueIteration) {
  toy::Corridor m;
  const PartitionSpec spec = m.default_partition();
  // Value iteration over cells 0 and 1 with cells >= 2 terminal.
  std::vector<double> v(4, 0.0);
  for (int sweep = 0; sweep < 10; ++sweep)
    for (int c = 1; c >= 0; --c) {
      double best = -1e18;
      for (ActionId a = 0; a < 2; ++a) {
        const int n = std::min(c + (a == 0 ? 1 : 2), 3);
        best = std::max(best, -m.cost({}, a, {}) + (n >= 2 ? 0.0 : v[n]));
      }
      v[c] = best;
    }
  std::vector<ActionId> optimal(2);
  for (int c = 0; c < 2; ++c) {
    double best = -1e18;
    for (ActionId a = 0; a < 2; ++a) {
      const int n = std::min(c + (a == 0 ? 1 : 2), 3);
      const double qv = -m.cost({}, a, {}) + (n >= 2 ? 0.0 : v[n]);
      if (qv > best) best = qv, optimal[c] = a;
    }
  }
  ASSERT_EQ(optimal, (std::vector<ActionId>{1, 0}));

  LearnConfig config;
  config.episodes = 2000;
  config.seed = 4;
  const QTable q = train(m, spec, config);
  for (CellIndex c = 0; c < 2; ++c) EXPECT_EQ(greedy_action(q, c, ActionSet::all(2)), optimal[c]) << c;
  EXPECT_NEAR(q.value(0, 1), v[0], 0.05);
}

TEST(Train, SingletonShieldDictatesPolicy) {
  toy::Corridor m;
  const PartitionSpec spec = m.default_partition();
  // only "step" in cell 0, only "jump" elsewhere
  MostPermissiveStrategy strat(spec, m.actions(), {0b01, 0b10, 0b10, 0b10});
  const Shield shield(strat);
  LearnConfig config;
  config.episodes = 300;
  const QTable q = train(m, spec, config, &shield);
  Rng rng(0);
  const Agent agent{&q};
  for (CellIndex c = 0; c < 2; ++c) {
    const ActionSet menu = strat.allowed(c);
    for (ActionId a = 0; a < 2; ++a)
      if (!menu.contains(a)) {
        EXPECT_EQ(q.visits(c, a), 0u);
      }
    EXPECT_EQ(agent.propose(spec.cell_box(c).low, menu, rng), menu.nth(0));
  }
}

TEST(Train, ShieldOnAnotherGridIsAMismatch) {
  toy::Corridor m;
  PartitionSpec coarse({0.0}, {4.0}, {2.0});
  const Shield shield(MostPermissiveStrategy(coarse, m.actions(), {3, 3}));
  try {
    train(m, m.default_partition(), LearnConfig{}, &shield);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Mismatch);
  }
}

TEST(Train, SeedDeterminism) {
  BouncingBall bb;
  const PartitionSpec spec = bb.partition({0.5, 0.5});
  LearnConfig config;
  config.episodes = 50;
  config.seed = 17;
  const QTable a = train(bb, spec, config);
  const QTable b = train(bb, spec, config);
  EXPECT_TRUE(a == b);
  config.seed = 18;
  EXPECT_FALSE(train(bb, spec, config) == a);
}

TEST(Agent, RandomAgentAndVisitedPreference) {
  Rng rng(3);
  const Agent random{};
  int counts[2] = {0, 0};
  for (int i = 0; i < 1000; ++i) ++counts[random.propose(State{0.5}, ActionSet::all(2), rng)];
  EXPECT_GT(counts[0], 400);
  EXPECT_GT(counts[1], 400);

  // Unvisited actions keep their initial value and are only used when
  // nothing in the menu was tried.
  QTable q(PartitionSpec({0.0}, {1.0}, {1.0}), {{0, "a"}, {1, "b"}}, std::vector<double>{-5.0, 0.0},
           std::vector<std::uint32_t>{3, 0});
  const Agent agent{&q};
  EXPECT_EQ(agent.propose(State{0.5}, ActionSet::all(2), rng), 0);
  EXPECT_EQ(agent.propose(State{0.5}, ActionSet::single(1), rng), 1);
  double prefs[2];
  agent.preferences(State{0.5}, prefs);
  EXPECT_EQ(prefs[0], -5.0);
  agent.preferences(State{3.0}, prefs);
  EXPECT_EQ(prefs[0], 0.0);
}
