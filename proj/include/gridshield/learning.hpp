#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gridshield/actions.hpp"
#include "gridshield/models.hpp"
#include "gridshield/partition.hpp"
#include "gridshield/rng.hpp"

namespace gridshield {

class Shield;

/// Tabular action values over grid cells, row-major cell x action.
class QTable {
 public:
  QTable(PartitionSpec spec, std::vector<Action> actions, double initial_value = 0.0);
  QTable(PartitionSpec spec, std::vector<Action> actions, std::vector<double> values,
         std::vector<std::uint32_t> visits);

  const PartitionSpec& spec() const noexcept { return spec_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  std::size_t action_count() const noexcept { return actions_.size(); }

  double value(CellIndex c, ActionId a) const noexcept { return values_[c * actions_.size() + a]; }
  double& value(CellIndex c, ActionId a) noexcept { return values_[c * actions_.size() + a]; }
  std::uint32_t visits(CellIndex c, ActionId a) const noexcept { return visits_[c * actions_.size() + a]; }
  void visit(CellIndex c, ActionId a) noexcept {
    auto& v = visits_[c * actions_.size() + a];
    if (v != UINT32_MAX) ++v;
  }
  std::span<const double> row(CellIndex c) const noexcept {
    return {values_.data() + c * actions_.size(), actions_.size()};
  }
  std::uint64_t visited_pairs() const noexcept;

  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::uint32_t>& visit_counts() const noexcept { return visits_; }

  friend bool operator==(const QTable& a, const QTable& b) {
    return a.spec_ == b.spec_ && a.values_ == b.values_ && a.visits_ == b.visits_;
  }

 private:
  PartitionSpec spec_;
  std::vector<Action> actions_;
  std::vector<double> values_;
  std::vector<std::uint32_t> visits_;
};

struct LearnConfig {
  std::size_t episodes = 4000;
  std::size_t max_steps = 0;  // 0: the model's horizon
  double alpha_decay = 0.01;  // alpha = 1 / (1 + alpha_decay * visits)
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.8;
  double discount = 1.0;
  double deterrence = 0.0;
  double initial_value = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on values outside their ranges.
  void validate() const;
  double epsilon(std::size_t episode) const noexcept;
  double alpha(std::uint32_t visits) const noexcept { return 1.0 / (1.0 + alpha_decay * visits); }
};

/// Argmax over the menu, ties to the lowest id. Throws EmptyMenu.
ActionId greedy_action(const QTable& q, CellIndex cell, ActionSet menu);
/// Uniform over the menu when s lies outside the grid.
ActionId greedy_action(const QTable& q, const State& s, ActionSet menu, Rng& rng);

/// One temporal-difference step; `next` empty means terminal.
/// Returns the updated value.
double q_update(QTable& q, CellIndex cell, ActionId a, double reward, std::optional<CellIndex> next,
                ActionSet next_menu, double alpha, double discount);

/// Epsilon-greedy Q-learning from the model's initial distribution. With a
/// shield, every choice is restricted to the shield's menu.
QTable train(const EnvironmentModel& model, const PartitionSpec& spec, const LearnConfig& config,
             const Shield* shield = nullptr);

/// What proposes actions during evaluation: greedy over a Q-table, or
/// uniformly random when no table is given.
struct Agent {
  const QTable* q = nullptr;

  ActionId propose(const State& s, ActionSet menu, Rng& rng) const;
  /// Agent values for every action at s; all zero for a random agent or a
  /// state outside the grid.
  void preferences(const State& s, std::span<double> out) const;
};

}  // namespace gridshield
