#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gridshield/models.hpp"
#include "gridshield/partition.hpp"

namespace gridshield {

/// How random draws are covered when simulating from a supporting point.
enum class RandomnessPolicy : std::uint8_t {
  /// The model's pessimal value per dimension; both range ends where the
  /// model declares none.
  WorstCase = 0,
  /// m evenly spaced values per dimension, ends included.
  SampledGrid = 1,
};

struct SupportScheme {
  std::uint32_t n = 4;
  RandomnessPolicy randomness = RandomnessPolicy::WorstCase;
  std::uint32_t m = 3;
};

/// Evenly spaced lattice over a cell: the center for n = 1, otherwise n points
/// per dimension including both faces, the top face pulled inside by 1e-9 of
/// the cell width. Returns n^k points.
std::vector<State> supporting_points(const CellBox& box, std::uint32_t n);

/// Every combination of draw values the scheme simulates per supporting point.
std::vector<std::vector<double>> draw_combinations(std::span<const RandomDimension> dims,
                                                   const SupportScheme& scheme);

/// Sparse abstract transition relation: for every (cell, action) a sorted
/// list of successor cells. Successors outside the grid collapse into
/// kOutOfBounds, which sorts last.
class TransitionSystem {
 public:
  static constexpr CellIndex kOutOfBounds = std::numeric_limits<CellIndex>::max();

  TransitionSystem(PartitionSpec spec, std::vector<Action> actions);
  /// Builds from explicit per-key lists indexed cell * |actions| + action.
  TransitionSystem(PartitionSpec spec, std::vector<Action> actions,
                   const std::vector<std::vector<CellIndex>>& lists);
  TransitionSystem(PartitionSpec spec, std::vector<Action> actions, std::vector<std::uint64_t> offsets,
                   std::vector<CellIndex> successors);

  const PartitionSpec& spec() const noexcept { return spec_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  std::size_t action_count() const noexcept { return actions_.size(); }
  CellIndex cell_count() const noexcept { return spec_.cell_count(); }

  std::span<const CellIndex> successors(CellIndex cell, ActionId a) const noexcept {
    const std::size_t key = cell * actions_.size() + a;
    return {successors_.data() + offsets_[key], successors_.data() + offsets_[key + 1]};
  }
  bool contains(CellIndex from, ActionId a, CellIndex to) const noexcept;
  std::size_t transition_count() const noexcept { return successors_.size(); }
  std::size_t memory_bytes() const noexcept {
    return offsets_.size() * sizeof(std::uint64_t) + successors_.size() * sizeof(CellIndex);
  }

  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
  const std::vector<CellIndex>& flat_successors() const noexcept { return successors_; }

  friend bool operator==(const TransitionSystem& a, const TransitionSystem& b) {
    return a.spec_ == b.spec_ && a.offsets_ == b.offsets_ && a.successors_ == b.successors_ &&
           a.actions_.size() == b.actions_.size();
  }

 private:
  PartitionSpec spec_;
  std::vector<Action> actions_;
  std::vector<std::uint64_t> offsets_;
  std::vector<CellIndex> successors_;
};

/// Called once per distinct (cell, action, successor) with the simulation
/// that first witnessed it.
using WitnessFn = std::function<void(CellIndex cell, ActionId a, const State& point,
                                     std::span<const double> draws, CellIndex successor)>;

struct BuildOptions {
  std::size_t workers = 0;  // 0: GRIDSHIELD_WORKERS or hardware concurrency
  std::size_t memory_budget_bytes = std::size_t{4} << 30;
  WitnessFn on_witness;     // forces a single worker when set
};

struct BuildStats {
  double seconds = 0;
  CellIndex cells = 0;
  std::uint64_t simulations = 0;
  std::size_t transitions = 0;
};

/// Successor cells of one (cell, action) pair, sorted.
std::vector<CellIndex> successors(const EnvironmentModel& model, const PartitionSpec& spec, CellIndex cell,
                                  ActionId a, const SupportScheme& scheme);

TransitionSystem build_transition_system(const EnvironmentModel& model, const PartitionSpec& spec,
                                         const SupportScheme& scheme, const BuildOptions& options = {},
                                         BuildStats* stats = nullptr);

/// Exact successor cells of a random-walk cell: the image of a cell box under
/// one step is a box, so the answer is every grid cell meeting it.
/// Throws NotBoxAffine if the cell straddles a terminal boundary.
std::vector<CellIndex> exact_successors_box(const RandomWalk& model, const PartitionSpec& spec, CellIndex cell,
                                            ActionId a);

/// Transition system made of exact_successors_box for every key.
TransitionSystem build_exact_random_walk(const RandomWalk& model, const PartitionSpec& spec);

/// Fraction of uniformly sampled one-step transitions present in ts.
double accuracy_estimate(const EnvironmentModel& model, const TransitionSystem& ts, std::uint64_t num_samples,
                         std::uint64_t seed, std::size_t workers = 0);

}  // namespace gridshield
