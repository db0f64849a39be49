#include "gridshield/evaluation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "gridshield/parallel.hpp"

namespace gridshield {

namespace {

double log_binomial_pmf(std::uint64_t j, std::uint64_t n, double log_p, double log_q) {
  const double nn = static_cast<double>(n), jj = static_cast<double>(j);
  return std::lgamma(nn + 1) - std::lgamma(jj + 1) - std::lgamma(nn - jj + 1) + jj * log_p + (nn - jj) * log_q;
}

// Sum of pmf(j) for j in [lo, hi], scaled around the largest term.
double binomial_range(std::uint64_t lo, std::uint64_t hi, std::uint64_t n, double p) {
  const double log_p = std::log(p), log_q = std::log1p(-p);
  auto mode = static_cast<std::uint64_t>(std::floor((static_cast<double>(n) + 1) * p));
  mode = std::clamp(mode, lo, hi);
  const double ref = log_binomial_pmf(mode, n, log_p, log_q);
  double sum = 0;
  for (std::uint64_t j = lo; j <= hi; ++j) sum += std::exp(log_binomial_pmf(j, n, log_p, log_q) - ref);
  return std::exp(ref) * sum;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0) return 0.0;
  if (p >= 1) return 1.0;
  // Sum the side not holding the bulk of the mass so the result keeps its
  // relative precision when it is tiny.
  if (static_cast<double>(k) > static_cast<double>(n) * p) return std::min(1.0, binomial_range(k, n, n, p));
  return std::clamp(1.0 - binomial_range(0, k - 1, n, p), 0.0, 1.0);
}

double clopper_pearson_lower(std::uint64_t failures, std::uint64_t n, double confidence) {
  if (n == 0) throw Error(ErrorCode::DomainError, "confidence bound needs at least one trial");
  if (failures > n) throw Error(ErrorCode::DomainError, "more failures than trials");
  if (!(confidence > 0 && confidence < 1)) throw Error(ErrorCode::DomainError, "confidence must lie in (0, 1)");
  const double alpha = 1.0 - confidence;
  const std::uint64_t successes = n - failures;
  if (successes == 0) return 0.0;
  if (failures == 0) return std::pow(alpha, 1.0 / static_cast<double>(n));
  double lo = 0, hi = 1;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_upper_tail(successes, n, mid) < alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::string_view to_string(ShieldMode mode) noexcept {
  switch (mode) {
    case ShieldMode::None: return "unshielded";
    case ShieldMode::Pre: return "pre-shielded";
    case ShieldMode::Post: return "post-shielded";
  }
  return "unknown";
}

EpisodeResult run_episode(const EnvironmentModel& model, const Actor& actor, std::uint64_t seed,
                          std::uint64_t index, std::size_t max_steps, bool audit) {
  if (actor.mode != ShieldMode::None && !actor.shield)
    throw Error(ErrorCode::ConfigError, "shielded actor without a shield");
  if (max_steps == 0) max_steps = model.horizon();
  Rng rng(mix_seed(seed, index));
  RandomDraws draws(rng, model.randomness());
  const ActionSet everything = ActionSet::all(model.actions().size());
  std::array<double, kMaxActions> prefs{};
  std::span<double> pref_span(prefs.data(), model.actions().size());

  EpisodeResult out;
  State s = model.initial_state(rng);
  double elapsed = 0;
  for (std::size_t step = 0; step < max_steps; ++step) {
    ActionId a;
    if (actor.mode == ShieldMode::Pre) {
      const auto menu = actor.shield->menu(s);
      if (!menu.shielded) ++out.unshielded_steps;
      a = actor.agent.propose(s, menu.actions, rng);
    } else if (actor.mode == ShieldMode::Post) {
      const ActionId proposed = actor.agent.propose(s, everything, rng);
      if (actor.correction.kind == CorrectionKind::AgentPreference) actor.agent.preferences(s, pref_span);
      const auto c = post_shield_correct(*actor.shield, s, proposed, actor.correction, pref_span, rng);
      if (!c.shielded) ++out.unshielded_steps;
      if (c.intervened) {
        ++out.interventions;
        if (audit && !actor.shield->menu(s).actions.contains(c.action)) ++out.audit_failures;
      }
      a = c.action;
    } else {
      a = actor.agent.propose(s, everything, rng);
    }
    const State next = model.step(s, a, draws);
    elapsed += model.period();
    out.cost += model.cost(s, a, next);
    ++out.steps;
    if (model.violates(next, elapsed)) {
      out.violated = true;
      break;
    }
    if (model.is_goal(next, elapsed)) break;
    s = next;
  }
  return out;
}

EvaluationReport run_episodes(const EnvironmentModel& model, const Actor& actor, std::uint64_t episodes,
                              std::uint64_t seed, const EvalOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (episodes == 0) throw Error(ErrorCode::ConfigError, "episode count must be positive");
  const std::size_t max_steps = options.max_steps ? options.max_steps : model.horizon();
  std::vector<EpisodeResult> results(episodes);
  parallel_chunks(episodes, worker_count(options.workers), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) results[i] = run_episode(model, actor, seed, i, max_steps, options.audit);
  });

  EvaluationReport report;
  report.episodes = episodes;
  double cost = 0;
  for (const auto& r : results) {
    report.violations += r.violated ? 1 : 0;
    report.interventions += r.interventions;
    report.steps += r.steps;
    report.unshielded_steps += r.unshielded_steps;
    report.audit_failures += r.audit_failures;
    if (options.audit) report.audited_corrections += r.interventions;
    cost += r.cost;
  }
  report.average_cost = cost / static_cast<double>(episodes);
  report.mean_interventions = static_cast<double>(report.interventions) / static_cast<double>(episodes);
  report.ci = {clopper_pearson_lower(report.violations, episodes, options.confidence), 1.0, options.confidence};
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------

std::vector<SweepRow> deterrence_sweep(const EnvironmentModel& model, const Shield& shield,
                                       const std::vector<double>& deterrences, std::size_t repetitions,
                                       const SweepConfig& config) {
  if (deterrences.empty() || repetitions == 0)
    throw Error(ErrorCode::ConfigError, "sweep needs at least one deterrence value and one repetition");
  constexpr std::array kinds{ShieldMode::None, ShieldMode::Post, ShieldMode::Pre};
  const std::size_t tasks = deterrences.size() * repetitions;
  std::vector<SweepRow> rows(tasks * kinds.size());

  parallel_chunks(tasks, worker_count(config.workers), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t di = task / repetitions, rep = task % repetitions;
      LearnConfig learn = config.learn;
      learn.deterrence = deterrences[di];
      learn.seed = mix_seed(config.seed, rep);
      const QTable plain = train(model, shield.spec(), learn);
      const QTable pre = train(model, shield.spec(), learn, &shield);
      const std::uint64_t eval_seed = mix_seed(~config.seed, rep);
      EvalOptions eval;
      eval.workers = 1;
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        Actor actor;
        actor.mode = kinds[k];
        actor.agent.q = kinds[k] == ShieldMode::Pre ? &pre : &plain;
        actor.shield = kinds[k] == ShieldMode::None ? nullptr : &shield;
        const auto r = run_episodes(model, actor, config.eval_episodes, eval_seed, eval);
        rows[task * kinds.size() + k] = {deterrences[di], kinds[k], rep, r.average_cost, r.violations,
                                         r.mean_interventions};
      }
    }
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "deterrence,kind,repetition,mean_cost,violations,mean_interventions\n";
  for (const auto& r : rows) {
    out += format_double(r.deterrence) + "," + std::string(to_string(r.kind)) + "," + std::to_string(r.repetition) +
           "," + format_double(r.mean_cost) + "," + std::to_string(r.violations) + "," +
           format_double(r.mean_interventions) + "\n";
  }
  return out;
}

std::vector<PostOptRow> post_optimization_compare(const EnvironmentModel& model, const Shield& shield,
                                                  const QTable& agent, const std::vector<CorrectionKind>& policies,
                                                  const PostOptConfig& config, const QTable* pre_shielded_agent) {
  std::vector<CorrectionKind> order{CorrectionKind::UniformRandom};
  for (auto k : policies)
    if (k != CorrectionKind::UniformRandom) order.push_back(k);

  EvalOptions eval;
  eval.workers = config.workers;
  eval.audit = true;
  std::vector<PostOptRow> rows;
  for (auto kind : order) {
    std::optional<SecondaryPolicy> secondary;
    if (kind == CorrectionKind::MinimizeCost || kind == CorrectionKind::MinimizeInterventions) {
      const auto objective =
          kind == CorrectionKind::MinimizeCost ? SecondaryObjective::Cost : SecondaryObjective::Interventions;
      secondary.emplace(train_secondary_policy(model, shield, Agent{&agent}, objective, config.secondary));
    }
    Actor actor;
    actor.agent.q = &agent;
    actor.shield = &shield;
    actor.mode = ShieldMode::Post;
    actor.correction = {kind, secondary ? &*secondary : nullptr};
    const auto r = run_episodes(model, actor, config.episodes, config.seed, eval);
    rows.push_back({std::string(to_string(kind)), r.average_cost, r.mean_interventions, 0, 0, r.violations,
                    r.audit_failures});
  }
  if (pre_shielded_agent) {
    Actor actor;
    actor.agent.q = pre_shielded_agent;
    actor.shield = &shield;
    actor.mode = ShieldMode::Pre;
    const auto r = run_episodes(model, actor, config.episodes, config.seed, eval);
    rows.push_back({"pre-shielded", r.average_cost, r.mean_interventions, 0, 0, r.violations, 0});
  }
  const auto relative = [](double x, double base) { return base == 0 ? 0.0 : 100.0 * (x - base) / std::abs(base); };
  for (auto& row : rows) {
    row.relative_cost = relative(row.mean_cost, rows.front().mean_cost);
    row.relative_interventions = relative(row.mean_interventions, rows.front().mean_interventions);
  }
  return rows;
}

std::string post_opt_csv(const std::vector<PostOptRow>& rows) {
  std::string out =
      "policy,mean_cost,mean_interventions,relative_cost_pct,relative_interventions_pct,violations,audit_failures\n";
  for (const auto& r : rows) {
    out += r.label + "," + format_double(r.mean_cost) + "," + format_double(r.mean_interventions) + "," +
           format_double(r.relative_cost) + "," + format_double(r.relative_interventions) + "," +
           std::to_string(r.violations) + "," + std::to_string(r.audit_failures) + "\n";
  }
  return out;
}

}  // namespace gridshield
