#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gridshield/actions.hpp"
#include "gridshield/models.hpp"
#include "gridshield/partition.hpp"
#include "gridshield/reachability.hpp"

namespace gridshield {

/// What a cell-level safety check can say about a region.
struct SafetyPredicate {
  std::function<BoxClass(const CellBox&)> classify;
  std::function<bool(const State&)> holds;

  static SafetyPredicate everything();
  static SafetyPredicate nothing();
  /// Safe means "not unsafe" for the given model.
  static SafetyPredicate of_model(const EnvironmentModel& model);
};

/// Dense membership over cell ordinals.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(CellIndex cells, bool value = false) : bits_(cells, value ? 1 : 0), count_(value ? cells : 0) {}

  CellIndex universe() const noexcept { return bits_.size(); }
  CellIndex count() const noexcept { return count_; }
  bool contains(CellIndex c) const noexcept { return c < bits_.size() && bits_[c]; }
  void insert(CellIndex c) noexcept {
    if (!bits_[c]) ++count_, bits_[c] = 1;
  }
  void erase(CellIndex c) noexcept {
    if (bits_[c]) --count_, bits_[c] = 0;
  }
  std::vector<CellIndex> members() const;

  friend bool operator==(const CellSet& a, const CellSet& b) noexcept { return a.bits_ == b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
  CellIndex count_ = 0;
};

/// How a successor outside the grid is judged.
enum class OobPolicy : std::uint8_t { Forbid = 0, AllowAll = 1 };

/// Cells whose whole box satisfies the predicate.
CellSet initial_safe_cells(const PartitionSpec& spec, const SafetyPredicate& safe);

struct GameReport {
  std::size_t iterations = 0;
  std::vector<CellIndex> removed_per_iteration;
  std::optional<bool> initial_state_safe;
};

/// Greatest subset of `initial` from which some action keeps every successor
/// in the subset. Each round removes the cells that lost their last closed
/// action; the report lists every round including the final empty one.
CellSet solve(const TransitionSystem& ts, const CellSet& initial, OobPolicy oob = OobPolicy::Forbid,
              GameReport* report = nullptr, const std::optional<State>& initial_state = std::nullopt);

inline CellSet solve(const TransitionSystem& ts, const SafetyPredicate& safe, OobPolicy oob = OobPolicy::Forbid,
                     GameReport* report = nullptr, const std::optional<State>& initial_state = std::nullopt) {
  return solve(ts, initial_safe_cells(ts.spec(), safe), oob, report, initial_state);
}

/// Same fixed point by naive repeated re-scans. Refuses more than 10^4 cells.
CellSet brute_force_solve(const TransitionSystem& ts, const CellSet& initial, OobPolicy oob = OobPolicy::Forbid);

/// Actions allowed per cell, plus the grid they apply to.
class MostPermissiveStrategy {
 public:
  MostPermissiveStrategy(PartitionSpec spec, std::vector<Action> actions, std::vector<std::uint8_t> masks,
                         OobPolicy oob = OobPolicy::Forbid);

  const PartitionSpec& spec() const noexcept { return spec_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  OobPolicy oob_policy() const noexcept { return oob_; }
  const std::vector<std::uint8_t>& masks() const noexcept { return masks_; }

  ActionSet allowed(CellIndex cell) const noexcept { return ActionSet(masks_[cell]); }

  struct Lifted {
    ActionSet allowed;
    bool shielded = false;  // false: the state is outside every winning cell
  };
  /// Allowed actions at a concrete state. Outside the winning region (or the
  /// grid) shielded is false and the set is empty under Forbid, every action
  /// under AllowAll.
  Lifted lift(const State& s) const;

  CellIndex winning_cells() const noexcept;

  friend bool operator==(const MostPermissiveStrategy& a, const MostPermissiveStrategy& b) {
    return a.spec_ == b.spec_ && a.masks_ == b.masks_ && a.oob_ == b.oob_ &&
           a.actions_.size() == b.actions_.size();
  }

 private:
  PartitionSpec spec_;
  std::vector<Action> actions_;
  std::vector<std::uint8_t> masks_;
  OobPolicy oob_;
};

/// Every action whose successors all lie in `winning`. Throws NotAFixpoint if
/// some winning cell ends up with no action.
MostPermissiveStrategy most_permissive(const TransitionSystem& ts, const CellSet& winning,
                                       OobPolicy oob = OobPolicy::Forbid);

}  // namespace gridshield
