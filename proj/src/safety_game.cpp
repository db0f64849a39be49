#include "gridshield/safety_game.hpp"

#include <algorithm>
#include <bit>

namespace gridshield {

SafetyPredicate SafetyPredicate::everything() {
  return {[](const CellBox&) { return BoxClass::Inside; }, [](const State&) { return true; }};
}

SafetyPredicate SafetyPredicate::nothing() {
  return {[](const CellBox&) { return BoxClass::Outside; }, [](const State&) { return false; }};
}

SafetyPredicate SafetyPredicate::of_model(const EnvironmentModel& model) {
  return {[&model](const CellBox& box) { return model.classify_safety(box); },
          [&model](const State& s) { return !model.is_unsafe(s); }};
}

std::vector<CellIndex> CellSet::members() const {
  std::vector<CellIndex> out;
  out.reserve(count_);
  for (CellIndex c = 0; c < bits_.size(); ++c)
    if (bits_[c]) out.push_back(c);
  return out;
}

CellSet initial_safe_cells(const PartitionSpec& spec, const SafetyPredicate& safe) {
  CellSet out(spec.cell_count());
  spec.iterate_cells([&](CellIndex c, const CellId& id) {
    if (safe.classify(spec.cell_box(id)) == BoxClass::Inside) out.insert(c);
  });
  return out;
}

namespace {

bool successor_ok(const CellSet& keep, CellIndex to, OobPolicy oob) {
  if (to == TransitionSystem::kOutOfBounds) return oob == OobPolicy::AllowAll;
  return keep.contains(to);
}

bool action_closed(const TransitionSystem& ts, const CellSet& keep, CellIndex c, ActionId a, OobPolicy oob) {
  for (CellIndex to : ts.successors(c, a))
    if (!successor_ok(keep, to, oob)) return false;
  return true;
}

void check_universe(const TransitionSystem& ts, const CellSet& initial) {
  if (initial.universe() != ts.cell_count())
    throw Error(ErrorCode::Mismatch, "initial cell set does not match the transition system");
}

}  // namespace

CellSet solve(const TransitionSystem& ts, const CellSet& initial, OobPolicy oob, GameReport* report,
              const std::optional<State>& initial_state) {
  check_universe(ts, initial);
  const CellIndex cells = ts.cell_count();
  const std::size_t actions = ts.action_count();
  CellSet keep = initial;

  // Reverse edges restricted to sources in the initial set: target -> keys.
  std::vector<std::uint64_t> rev_offsets(cells + 1, 0);
  for (CellIndex c = 0; c < cells; ++c) {
    if (!initial.contains(c)) continue;
    for (ActionId a = 0; a < actions; ++a)
      for (CellIndex to : ts.successors(c, a))
        if (to != TransitionSystem::kOutOfBounds) ++rev_offsets[to + 1];
  }
  for (CellIndex c = 0; c < cells; ++c) rev_offsets[c + 1] += rev_offsets[c];
  std::vector<std::uint64_t> rev_keys(rev_offsets.back());
  {
    std::vector<std::uint64_t> fill(rev_offsets.begin(), rev_offsets.end() - 1);
    for (CellIndex c = 0; c < cells; ++c) {
      if (!initial.contains(c)) continue;
      for (ActionId a = 0; a < actions; ++a)
        for (CellIndex to : ts.successors(c, a))
          if (to != TransitionSystem::kOutOfBounds) rev_keys[fill[to]++] = c * actions + a;
    }
  }

  // Per-cell bitmask of open actions (some successor outside keep).
  std::vector<std::uint8_t> open(cells, 0);
  std::vector<CellIndex> round;
  for (CellIndex c = 0; c < cells; ++c) {
    if (!initial.contains(c)) continue;
    for (ActionId a = 0; a < actions; ++a)
      if (!action_closed(ts, keep, c, a, oob)) open[c] |= static_cast<std::uint8_t>(1u << a);
    if (static_cast<std::size_t>(std::popcount(open[c])) == actions) round.push_back(c);
  }

  GameReport local;
  while (true) {
    ++local.iterations;
    local.removed_per_iteration.push_back(round.size());
    if (round.empty()) break;
    for (CellIndex c : round) keep.erase(c);
    std::vector<CellIndex> next;
    for (CellIndex removed : round) {
      for (auto k = rev_offsets[removed]; k < rev_offsets[removed + 1]; ++k) {
        const CellIndex c = rev_keys[k] / actions;
        const auto bit = static_cast<std::uint8_t>(1u << (rev_keys[k] % actions));
        if (!keep.contains(c) || (open[c] & bit)) continue;
        open[c] |= bit;
        if (static_cast<std::size_t>(std::popcount(open[c])) == actions) next.push_back(c);
      }
    }
    std::sort(next.begin(), next.end());
    round = std::move(next);
  }

  if (initial_state) {
    auto cell = ts.spec().try_index_of(*initial_state);
    local.initial_state_safe = cell && keep.contains(*cell);
  }
  if (report) *report = std::move(local);
  return keep;
}

CellSet brute_force_solve(const TransitionSystem& ts, const CellSet& initial, OobPolicy oob) {
  if (ts.cell_count() > 10000) throw Error(ErrorCode::SizeLimit, "brute-force solver is limited to 10^4 cells");
  check_universe(ts, initial);
  CellSet keep = initial;
  bool changed = true;
  while (changed) {
    changed = false;
    CellSet next = keep;
    for (CellIndex c = 0; c < ts.cell_count(); ++c) {
      if (!keep.contains(c)) continue;
      bool any = false;
      for (ActionId a = 0; a < ts.action_count() && !any; ++a) any = action_closed(ts, keep, c, a, oob);
      if (!any) {
        next.erase(c);
        changed = true;
      }
    }
    keep = std::move(next);
  }
  return keep;
}

// ---------------------------------------------------------------------------

MostPermissiveStrategy::MostPermissiveStrategy(PartitionSpec spec, std::vector<Action> actions,
                                               std::vector<std::uint8_t> masks, OobPolicy oob)
    : spec_(std::move(spec)), actions_(std::move(actions)), masks_(std::move(masks)), oob_(oob) {
  if (masks_.size() != spec_.cell_count())
    throw Error(ErrorCode::Mismatch, "strategy needs one mask per cell");
  if (actions_.empty() || actions_.size() > kMaxActions)
    throw Error(ErrorCode::ConfigError, "action count must be in 1..8");
  const auto full = ActionSet::all(actions_.size()).mask();
  for (auto m : masks_)
    if (m & ~full) throw Error(ErrorCode::FormatError, "strategy mask names an unknown action");
}

MostPermissiveStrategy::Lifted MostPermissiveStrategy::lift(const State& s) const {
  auto cell = spec_.try_index_of(s);
  if (cell && masks_[*cell] != 0) return {ActionSet(masks_[*cell]), true};
  return {oob_ == OobPolicy::AllowAll ? ActionSet::all(actions_.size()) : ActionSet{}, false};
}

CellIndex MostPermissiveStrategy::winning_cells() const noexcept {
  return static_cast<CellIndex>(std::count_if(masks_.begin(), masks_.end(), [](auto m) { return m != 0; }));
}

MostPermissiveStrategy most_permissive(const TransitionSystem& ts, const CellSet& winning, OobPolicy oob) {
  check_universe(ts, winning);
  std::vector<std::uint8_t> masks(ts.cell_count(), 0);
  for (CellIndex c = 0; c < ts.cell_count(); ++c) {
    if (!winning.contains(c)) continue;
    for (ActionId a = 0; a < ts.action_count(); ++a)
      if (action_closed(ts, winning, c, a, oob)) masks[c] |= static_cast<std::uint8_t>(1u << a);
    if (masks[c] == 0) throw Error(ErrorCode::NotAFixpoint, "a winning cell has no closed action");
  }
  return MostPermissiveStrategy(ts.spec(), ts.actions(), std::move(masks), oob);
}

}  // namespace gridshield
