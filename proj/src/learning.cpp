#include "gridshield/learning.hpp"

#include <algorithm>
#include <cmath>

#include "gridshield/shielding.hpp"

namespace gridshield {

QTable::QTable(PartitionSpec spec, std::vector<Action> actions, double initial_value)
    : spec_(std::move(spec)), actions_(std::move(actions)) {
  if (actions_.empty() || actions_.size() > kMaxActions)
    throw Error(ErrorCode::ConfigError, "action count must be in 1..8");
  if (!std::isfinite(initial_value)) throw Error(ErrorCode::ConfigError, "initial value must be finite");
  values_.assign(spec_.cell_count() * actions_.size(), initial_value);
  visits_.assign(values_.size(), 0);
}

QTable::QTable(PartitionSpec spec, std::vector<Action> actions, std::vector<double> values,
               std::vector<std::uint32_t> visits)
    : spec_(std::move(spec)), actions_(std::move(actions)), values_(std::move(values)), visits_(std::move(visits)) {
  if (actions_.empty() || actions_.size() > kMaxActions)
    throw Error(ErrorCode::ConfigError, "action count must be in 1..8");
  const std::size_t n = spec_.cell_count() * actions_.size();
  if (values_.size() != n || visits_.size() != n)
    throw Error(ErrorCode::FormatError, "Q-table size does not match the partition");
}

std::uint64_t QTable::visited_pairs() const noexcept {
  return static_cast<std::uint64_t>(std::count_if(visits_.begin(), visits_.end(), [](auto v) { return v > 0; }));
}

void LearnConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::ConfigError, what); };
  if (episodes == 0) fail("episodes must be positive");
  if (!(alpha_decay >= 0) || !std::isfinite(alpha_decay)) fail("alpha_decay must be >= 0");
  if (!(epsilon_start >= 0 && epsilon_start <= 1)) fail("epsilon_start must lie in [0, 1]");
  if (!(epsilon_end >= 0 && epsilon_end <= 1)) fail("epsilon_end must lie in [0, 1]");
  if (!(epsilon_decay_fraction > 0 && epsilon_decay_fraction <= 1)) fail("epsilon_decay_fraction must lie in (0, 1]");
  if (!(discount >= 0 && discount <= 1)) fail("discount must lie in [0, 1]");
  if (!(deterrence >= 0) || !std::isfinite(deterrence)) fail("deterrence must be >= 0");
  if (!std::isfinite(initial_value)) fail("initial_value must be finite");
}

double LearnConfig::epsilon(std::size_t episode) const noexcept {
  const double span = epsilon_decay_fraction * static_cast<double>(episodes);
  const double t = static_cast<double>(episode);
  if (t >= span) return epsilon_end;
  return epsilon_start + (epsilon_end - epsilon_start) * (t / span);
}

ActionId greedy_action(const QTable& q, CellIndex cell, ActionSet menu) {
  if (menu.empty()) throw Error(ErrorCode::EmptyMenu, "greedy choice over an empty menu");
  ActionId best = menu.nth(0);
  double best_value = q.value(cell, best);
  menu.for_each([&](ActionId a) {
    if (q.value(cell, a) > best_value) {
      best = a;
      best_value = q.value(cell, a);
    }
  });
  return best;
}

ActionId greedy_action(const QTable& q, const State& s, ActionSet menu, Rng& rng) {
  if (menu.empty()) throw Error(ErrorCode::EmptyMenu, "greedy choice over an empty menu");
  auto cell = q.spec().try_index_of(s);
  if (!cell) return menu.nth(uniform_index(rng, menu.size()));
  return greedy_action(q, *cell, menu);
}

double q_update(QTable& q, CellIndex cell, ActionId a, double reward, std::optional<CellIndex> next,
                ActionSet next_menu, double alpha, double discount) {
  double target = reward;
  if (next && !next_menu.empty() && discount > 0) {
    double best = q.value(*next, next_menu.nth(0));
    next_menu.for_each([&](ActionId b) { best = std::max(best, q.value(*next, b)); });
    target += discount * best;
  }
  double& v = q.value(cell, a);
  v += alpha * (target - v);
  return v;
}

QTable train(const EnvironmentModel& model, const PartitionSpec& spec, const LearnConfig& config,
             const Shield* shield) {
  config.validate();
  if (!model.matches(spec)) throw Error(ErrorCode::ConfigError, "model bounds differ from partition bounds");
  if (shield && !(shield->spec() == spec))
    throw Error(ErrorCode::Mismatch, "shield partition differs from the learning partition");
  const std::size_t action_count = model.actions().size();
  const ActionSet everything = ActionSet::all(action_count);
  const std::size_t max_steps = config.max_steps ? config.max_steps : model.horizon();
  const auto menu_at = [&](const State& s) { return shield ? shield->menu(s).actions : everything; };

  QTable q(spec, model.actions(), config.initial_value);
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    Rng rng(mix_seed(config.seed, episode));
    RandomDraws draws(rng, model.randomness());
    const double eps = config.epsilon(episode);
    State s = model.initial_state(rng);
    double elapsed = 0;
    auto cell = spec.try_index_of(s);
    ActionSet menu = menu_at(s);
    for (std::size_t step = 0; step < max_steps; ++step) {
      ActionId a;
      if (!cell || uniform01(rng) < eps)
        a = menu.nth(uniform_index(rng, menu.size()));
      else
        a = greedy_action(q, *cell, menu);

      const State next = model.step(s, a, draws);
      elapsed += model.period();
      const bool unsafe = model.violates(next, elapsed);
      const bool done = unsafe || model.is_goal(next, elapsed);
      const double reward = -model.cost(s, a, next) - (unsafe ? config.deterrence : 0.0);
      const auto next_cell = spec.try_index_of(next);
      const ActionSet next_menu = done ? ActionSet{} : menu_at(next);
      if (cell) {
        q_update(q, *cell, a, reward, done ? std::nullopt : next_cell, next_menu, config.alpha(q.visits(*cell, a)),
                 config.discount);
        q.visit(*cell, a);
      }
      if (done) break;
      s = next;
      cell = next_cell;
      menu = next_menu;
    }
  }
  return q;
}

ActionId Agent::propose(const State& s, ActionSet menu, Rng& rng) const {
  if (menu.empty()) throw Error(ErrorCode::EmptyMenu, "agent asked to choose from an empty menu");
  if (!q) return menu.nth(uniform_index(rng, menu.size()));
  auto cell = q->spec().try_index_of(s);
  if (!cell) return menu.nth(uniform_index(rng, menu.size()));
  ActionSet tried;
  menu.for_each([&](ActionId a) {
    if (q->visits(*cell, a) > 0) tried.insert(a);
  });
  return greedy_action(*q, *cell, tried.empty() ? menu : tried);
}

void Agent::preferences(const State& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (!q) return;
  auto cell = q->spec().try_index_of(s);
  if (!cell) return;
  auto row = q->row(*cell);
  std::copy_n(row.begin(), std::min(row.size(), out.size()), out.begin());
}

}  // namespace gridshield
