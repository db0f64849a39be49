#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridshield/learning.hpp"
#include "gridshield/safety_game.hpp"

namespace gridshield {

/// What the shield offers where the strategy is undefined.
enum class Fallback : std::uint8_t {
  Passthrough = 0,  // every action, flagged as unshielded
  Abort = 1,        // EmptyMenu
};

class Shield {
 public:
  explicit Shield(MostPermissiveStrategy strategy, Fallback fallback = Fallback::Passthrough)
      : strategy_(std::move(strategy)), fallback_(fallback) {}

  const MostPermissiveStrategy& strategy() const noexcept { return strategy_; }
  Fallback fallback() const noexcept { return fallback_; }
  const PartitionSpec& spec() const noexcept { return strategy_.spec(); }
  std::size_t action_count() const noexcept { return strategy_.actions().size(); }

  struct Menu {
    ActionSet actions;
    bool shielded = false;
  };
  /// Never empty: unshielded states get every action, or EmptyMenu under Abort.
  Menu menu(const State& s) const;

 private:
  MostPermissiveStrategy strategy_;
  Fallback fallback_;
};

inline Shield::Menu pre_shield_menu(const Shield& shield, const State& s) { return shield.menu(s); }

enum class CorrectionKind : std::uint8_t { UniformRandom, AgentPreference, MinimizeCost, MinimizeInterventions };

std::string_view to_string(CorrectionKind kind) noexcept;
std::optional<CorrectionKind> parse_correction(std::string_view name) noexcept;

/// Tabular learner consulted only at intervention points.
class SecondaryPolicy {
 public:
  explicit SecondaryPolicy(QTable table) : table_(std::move(table)) {}

  const QTable& table() const noexcept { return table_; }
  /// True if training never reached an intervention point.
  bool empty() const noexcept { return table_.visited_pairs() == 0; }
  /// Best visited action of the allowed set; uniform when the cell was never
  /// visited.
  ActionId choose(const State& s, ActionSet allowed, Rng& rng) const;

 private:
  QTable table_;
};

struct CorrectionPolicy {
  CorrectionKind kind = CorrectionKind::UniformRandom;
  const SecondaryPolicy* secondary = nullptr;  // MinimizeCost, MinimizeInterventions
};

struct Correction {
  ActionId action = 0;
  bool intervened = false;
  bool shielded = false;
};

/// Keeps `proposed` if allowed, otherwise replaces it with a member of the
/// allowed set chosen by the policy. agent_q holds the agent's value for every
/// action (AgentPreference only).
Correction post_shield_correct(const Shield& shield, const State& s, ActionId proposed,
                               const CorrectionPolicy& policy, std::span<const double> agent_q, Rng& rng);

struct InterventionRecord {
  State state;
  ActionId proposed = 0;
  ActionId chosen = 0;
};

class InterventionLog {
 public:
  explicit InterventionLog(bool keep_steps = false) : keep_steps_(keep_steps) {}

  void record(const State& s, const Correction& c, ActionId proposed);
  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const std::vector<InterventionRecord>& interventions() const noexcept { return records_; }

 private:
  bool keep_steps_;
  std::uint64_t count_ = 0;
  std::uint64_t steps_ = 0;
  std::vector<InterventionRecord> records_;
};

enum class SecondaryObjective : std::uint8_t { Cost, Interventions };

/// Learns which allowed action to substitute at intervention points while the
/// agent drives the post-shielded process. Updates are semi-Markov: reward is
/// accumulated from one intervention point to the next.
SecondaryPolicy train_secondary_policy(const EnvironmentModel& model, const Shield& shield, const Agent& agent,
                                       SecondaryObjective objective, const LearnConfig& config);

}  // namespace gridshield
