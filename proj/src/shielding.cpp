#include "gridshield/shielding.hpp"

namespace gridshield {

Shield::Menu Shield::menu(const State& s) const {
  const auto lifted = strategy_.lift(s);
  if (lifted.shielded) return {lifted.allowed, true};
  if (fallback_ == Fallback::Abort)
    throw Error(ErrorCode::EmptyMenu, "state lies outside the shield's winning region");
  return {ActionSet::all(action_count()), false};
}

std::string_view to_string(CorrectionKind kind) noexcept {
  switch (kind) {
    case CorrectionKind::UniformRandom: return "uniform";
    case CorrectionKind::AgentPreference: return "agent-preference";
    case CorrectionKind::MinimizeCost: return "min-cost";
    case CorrectionKind::MinimizeInterventions: return "min-interventions";
  }
  return "unknown";
}

std::optional<CorrectionKind> parse_correction(std::string_view name) noexcept {
  for (auto k : {CorrectionKind::UniformRandom, CorrectionKind::AgentPreference, CorrectionKind::MinimizeCost,
                 CorrectionKind::MinimizeInterventions})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

namespace {

ActionId uniform_member(ActionSet set, Rng& rng) { return set.nth(uniform_index(rng, set.size())); }

}  // namespace

ActionId SecondaryPolicy::choose(const State& s, ActionSet allowed, Rng& rng) const {
  if (allowed.empty()) throw Error(ErrorCode::EmptyMenu, "no allowed action to choose from");
  auto cell = table_.spec().try_index_of(s);
  if (!cell) return uniform_member(allowed, rng);
  std::optional<ActionId> best;
  allowed.for_each([&](ActionId a) {
    if (table_.visits(*cell, a) == 0) return;
    if (!best || table_.value(*cell, a) > table_.value(*cell, *best)) best = a;
  });
  return best ? *best : uniform_member(allowed, rng);
}

Correction post_shield_correct(const Shield& shield, const State& s, ActionId proposed,
                               const CorrectionPolicy& policy, std::span<const double> agent_q, Rng& rng) {
  const auto menu = shield.menu(s);
  if (menu.actions.contains(proposed)) return {proposed, false, menu.shielded};
  const ActionSet allowed = menu.actions;
  ActionId chosen = allowed.nth(0);
  switch (policy.kind) {
    case CorrectionKind::UniformRandom:
      chosen = uniform_member(allowed, rng);
      break;
    case CorrectionKind::AgentPreference:
      allowed.for_each([&](ActionId a) {
        if (a < agent_q.size() && chosen < agent_q.size() && agent_q[a] > agent_q[chosen]) chosen = a;
      });
      break;
    case CorrectionKind::MinimizeCost:
    case CorrectionKind::MinimizeInterventions:
      if (policy.secondary && !policy.secondary->empty())
        chosen = policy.secondary->choose(s, allowed, rng);
      else
        chosen = uniform_member(allowed, rng);
      break;
  }
  return {chosen, true, menu.shielded};
}

void InterventionLog::record(const State& s, const Correction& c, ActionId proposed) {
  ++steps_;
  if (!c.intervened) return;
  ++count_;
  if (keep_steps_) records_.push_back({s, proposed, c.action});
}

SecondaryPolicy train_secondary_policy(const EnvironmentModel& model, const Shield& shield, const Agent& agent,
                                       SecondaryObjective objective, const LearnConfig& config) {
  config.validate();
  const PartitionSpec& spec = shield.spec();
  if (!model.matches(spec)) throw Error(ErrorCode::ConfigError, "model bounds differ from shield bounds");
  const ActionSet everything = ActionSet::all(model.actions().size());
  const std::size_t max_steps = config.max_steps ? config.max_steps : model.horizon();
  QTable q(spec, model.actions(), config.initial_value);

  struct Pending {
    CellIndex cell;
    ActionId action;
  };
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    Rng rng(mix_seed(config.seed, episode));
    RandomDraws draws(rng, model.randomness());
    const double eps = config.epsilon(episode);
    State s = model.initial_state(rng);
    double elapsed = 0;
    std::optional<Pending> pending;
    double segment = 0;

    for (std::size_t step = 0; step < max_steps; ++step) {
      const ActionId proposed = agent.propose(s, everything, rng);
      const auto menu = shield.menu(s);
      ActionId a = proposed;
      bool intervened = false;
      if (!menu.actions.contains(proposed)) {
        intervened = true;
        const auto cell = spec.try_index_of(s);
        if (cell) {
          a = uniform01(rng) < eps ? uniform_member(menu.actions, rng) : greedy_action(q, *cell, menu.actions);
          if (pending) {
            q_update(q, pending->cell, pending->action, segment, *cell, menu.actions,
                     config.alpha(q.visits(pending->cell, pending->action)), config.discount);
            q.visit(pending->cell, pending->action);
          }
          pending = Pending{*cell, a};
          segment = 0;
        } else {
          a = uniform_member(menu.actions, rng);
        }
      }

      const State next = model.step(s, a, draws);
      elapsed += model.period();
      const bool unsafe = model.violates(next, elapsed);
      if (objective == SecondaryObjective::Cost)
        segment -= model.cost(s, a, next) + (unsafe ? config.deterrence : 0.0);
      else if (intervened)
        segment -= 1.0;
      if (unsafe || model.is_goal(next, elapsed)) break;
      s = next;
    }
    if (pending) {
      q_update(q, pending->cell, pending->action, segment, std::nullopt, {},
               config.alpha(q.visits(pending->cell, pending->action)), config.discount);
      q.visit(pending->cell, pending->action);
    }
  }
  return SecondaryPolicy(std::move(q));
}

}  // namespace gridshield
