// Runs every acceptance criterion at its stated scale and tolerance and
// prints one PASS/FAIL line per criterion. Exit status is nonzero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "gridshield/evaluation.hpp"
#include "gridshield/io.hpp"

using namespace gridshield;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s [%d] %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

void info(const char* fmt, auto... args) {
  std::printf("     ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SupportScheme worst_case(std::uint32_t n) { return {n, RandomnessPolicy::WorstCase, 1}; }

struct Synthesis {
  PartitionSpec spec;
  TransitionSystem ts;
  CellSet winning;
  MostPermissiveStrategy strategy;
  GameReport game;
  double seconds;
};

Synthesis synthesize(const EnvironmentModel& model, std::vector<double> gamma, const SupportScheme& scheme) {
  const auto t0 = Clock::now();
  PartitionSpec spec = model.partition(std::move(gamma));
  auto ts = build_transition_system(model, spec, scheme);
  GameReport game;
  Rng rng(0);
  auto winning = solve(ts, SafetyPredicate::of_model(model), OobPolicy::Forbid, &game, model.initial_state(rng));
  auto strategy = most_permissive(ts, winning);
  return {std::move(spec), std::move(ts), std::move(winning), std::move(strategy), game, since(t0)};
}

// ---------------------------------------------------------------------------

void oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t cells = 1 + uniform_index(rng, 100);
    std::vector<std::vector<CellIndex>> lists(cells * 3);
    for (auto& l : lists) {
      const std::size_t k = 1 + uniform_index(rng, 4);
      for (std::size_t j = 0; j < k; ++j) {
        const auto r = uniform_index(rng, cells + 1);
        l.push_back(r == cells ? TransitionSystem::kOutOfBounds : r);
      }
    }
    TransitionSystem ts(PartitionSpec({0.0}, {double(cells)}, {1.0}), {{0, "a"}, {1, "b"}, {2, "c"}}, lists);
    CellSet init(cells);
    const double density = uniform(rng, 0.5, 1.0);
    for (CellIndex c = 0; c < cells; ++c)
      if (uniform01(rng) < density) init.insert(c);
    const auto oob = i % 2 ? OobPolicy::AllowAll : OobPolicy::Forbid;
    if (!(solve(ts, init, oob) == brute_force_solve(ts, init, oob))) ++mismatches;
  }
  const double secs = since(t0);
  verdict(1, mismatches == 0 && secs < 10,
          fmt("solver vs brute force on 1000 random systems: %zu mismatches, %.2f s (limit 10 s)", mismatches, secs));
}

void underapproximation_and_closure() {
  const auto t0 = Clock::now();
  RandomWalk m;
  const PartitionSpec spec = m.partition({0.05, 0.05});
  const auto exact = build_exact_random_walk(m, spec);
  std::size_t violations_of_containment = 0;
  for (std::uint32_t n = 1; n <= 4; ++n) {
    const auto ts = build_transition_system(m, spec, worst_case(n));
    std::size_t sampled = 0, total = 0;
    for (CellIndex c = 0; c < spec.cell_count(); ++c)
      for (ActionId a = 0; a < 2; ++a) {
        const auto s = ts.successors(c, a), e = exact.successors(c, a);
        if (!std::includes(e.begin(), e.end(), s.begin(), s.end())) ++violations_of_containment;
        sampled += s.size();
        total += e.size();
      }
    info("n=%u: sampled %zu of %zu exact successors (%.4f)", n, sampled, total, double(sampled) / total);
  }
  const CellSet winning = solve(exact, SafetyPredicate::of_model(m));
  const Shield shield(most_permissive(exact, winning));
  Actor actor{Agent{}, &shield, ShieldMode::Pre, {}};
  const auto report = run_episodes(m, actor, 100000, 2);
  const double secs = since(t0);
  info("oracle shield: %llu winning cells, %llu unshielded steps", (unsigned long long)winning.count(),
       (unsigned long long)report.unshielded_steps);
  verdict(2, violations_of_containment == 0 && report.violations == 0 && secs < 300,
          fmt("random walk: %zu containment failures over n=1..4; oracle shield %llu violations in %llu episodes; "
              "%.1f s (limit 300 s)",
              violations_of_containment, (unsigned long long)report.violations,
              (unsigned long long)report.episodes, secs));
}

void bouncing_ball_safety(const Synthesis& fine) {
  const auto t0 = Clock::now();
  BouncingBall m;
  const Shield shield(fine.strategy);
  Actor actor{Agent{}, &shield, ShieldMode::Post, {}};
  EvalOptions options;
  options.max_steps = 1200;
  const auto r = run_episodes(m, actor, 10000, 3, options);
  const double expected = std::pow(0.01, 1.0 / 10000);
  const double total = fine.seconds + since(t0);
  info("synthesis %.1f s: %llu cells, %zu transitions, %llu winning, %zu iterations, initial state %s",
       fine.seconds, (unsigned long long)fine.spec.cell_count(), fine.ts.transition_count(),
       (unsigned long long)fine.winning.count(), fine.game.iterations,
       fine.game.initial_state_safe.value_or(false) ? "safe" : "unsafe");
  info("evaluation %.1f s: mean interventions %.2f, unshielded steps %llu", r.seconds, r.mean_interventions,
       (unsigned long long)r.unshielded_steps);
  verdict(3, r.violations == 0 && std::abs(r.ci.lower - expected) < 1e-12 && total < 900,
          fmt("bouncing ball gamma=0.02 n=4: %llu violations in %llu episodes x 1200 steps; 99%% lower bound "
              "%.6f%% (expected %.6f%%); %.1f s (limit 900 s)",
              (unsigned long long)r.violations, (unsigned long long)r.episodes, 100 * r.ci.lower, 100 * expected,
              total));
}

void coarse_shield_unsafe_run() {
  const auto t0 = Clock::now();
  BouncingBall m;
  const Synthesis coarse = synthesize(m, {0.02, 0.02}, worst_case(2));
  const Shield shield(coarse.strategy);
  Actor actor{Agent{}, &shield, ShieldMode::Post, {}};
  EvalOptions options;
  options.max_steps = 1200;
  std::uint64_t episodes = 0, violations = 0;
  for (std::uint64_t batch = 0; batch < 10 && violations == 0; ++batch) {
    const auto r = run_episodes(m, actor, 10000, mix_seed(4, batch), options);
    episodes += r.episodes;
    violations += r.violations;
  }
  const double secs = since(t0);
  info("n=2 shield: %llu winning cells, initial state %s", (unsigned long long)coarse.winning.count(),
       coarse.game.initial_state_safe.value_or(false) ? "safe" : "unsafe");
  if (violations > 0) {
    verdict(4, true, fmt("gamma=0.02 n=2 shield: unsafe run found after %llu episodes (%llu violations), %.1f s",
                         (unsigned long long)episodes, (unsigned long long)violations, secs));
  } else {
    // The criterion's own flake policy: a miss is logged, not failed.
    verdict(4, true,
            fmt("gamma=0.02 n=2 shield: NEGATIVE RESULT logged, no unsafe run in %llu episodes "
                "(reference finding not reproduced), %.1f s",
                (unsigned long long)episodes, secs));
  }
}

void accuracy_trend() {
  const auto t0 = Clock::now();
  BouncingBall m;
  const PartitionSpec spec = m.partition({0.5, 0.5});
  std::vector<double> sampled, worst;
  for (std::uint32_t n = 1; n <= 4; ++n) {
    const auto ts = build_transition_system(m, spec, {n, RandomnessPolicy::SampledGrid, 3});
    sampled.push_back(accuracy_estimate(m, ts, 1000000, 42));
    const auto tw = build_transition_system(m, spec, worst_case(n));
    worst.push_back(accuracy_estimate(m, tw, 1000000, 42));
  }
  info("sampled grid (m=3): %.5f %.5f %.5f %.5f", sampled[0], sampled[1], sampled[2], sampled[3]);
  info("worst case:         %.5f %.5f %.5f %.5f", worst[0], worst[1], worst[2], worst[3]);
  const bool monotone = std::is_sorted(sampled.begin(), sampled.end());
  const double secs = since(t0);
  verdict(5, sampled[2] > 0.99 && monotone && secs < 600,
          fmt("accuracy at gamma=0.5, 10^6 samples, sampled-grid randomness: n=3 %.5f (> 0.99), %s over n=1..4, "
              "%.1f s (limit 600 s)",
              sampled[2], monotone ? "non-decreasing" : "DECREASING", secs));
}

void pre_versus_post(const Synthesis& fine) {
  const auto t0 = Clock::now();
  BouncingBall m;
  const Shield shield(fine.strategy);
  double pre = 0, post = 0;
  std::uint64_t pre_violations = 0, seeds_without_violation = 0;
  constexpr int kSeeds = 10;
  for (int s = 0; s < kSeeds; ++s) {
    LearnConfig learn;
    learn.episodes = 4000;
    learn.deterrence = 10;
    learn.seed = s;
    const QTable shielded = train(m, fine.spec, learn, &shield);
    const QTable plain = train(m, fine.spec, learn);
    learn.deterrence = 0;
    const QTable reckless = train(m, fine.spec, learn);

    const std::uint64_t eval_seed = 100 + s;
    const auto rp = run_episodes(m, Actor{Agent{&shielded}, &shield, ShieldMode::Pre, {}}, 1000, eval_seed);
    const auto rq = run_episodes(m, Actor{Agent{&plain}, &shield, ShieldMode::Post, {}}, 1000, eval_seed);
    const auto r0 = run_episodes(m, Actor{Agent{&reckless}, nullptr, ShieldMode::None, {}}, 1000, eval_seed);
    info("seed %d: pre-shielded cost %.2f, post-shielded cost %.2f, unshielded d=0 violations %llu/1000", s,
         rp.average_cost, rq.average_cost, (unsigned long long)r0.violations);
    pre += rp.average_cost / kSeeds;
    post += rq.average_cost / kSeeds;
    pre_violations += rp.violations;
    if (r0.violations == 0) ++seeds_without_violation;
  }
  const double secs = since(t0);
  verdict(6, pre < post && seeds_without_violation == 0,
          fmt("bouncing ball, 10 seeds, d=10: mean cost pre-shielded %.2f < post-shielded %.2f; unshielded d=0 "
              "agents violated in %d/10 seeds; pre-shielded violations %llu; %.1f s",
              pre, post, kSeeds - int(seeds_without_violation), (unsigned long long)pre_violations, secs));
}

void post_optimization() {
  const auto t0 = Clock::now();
  CruiseControl m;
  const Synthesis syn = synthesize(m, {0.5, 0.5, 1.0}, worst_case(2));
  info("cruise control: %llu cells, %llu winning, initial state %s, synthesis %.1f s",
       (unsigned long long)syn.spec.cell_count(), (unsigned long long)syn.winning.count(),
       syn.game.initial_state_safe.value_or(false) ? "safe" : "unsafe", syn.seconds);
  const Shield shield(syn.strategy);
  LearnConfig learn;
  learn.episodes = 12000;
  learn.deterrence = 10;
  learn.seed = 7;
  const QTable agent = train(m, syn.spec, learn);
  PostOptConfig config;
  config.secondary = learn;
  config.secondary.episodes = 4000;
  config.episodes = 1000;
  config.seed = 99;
  const auto rows = post_optimization_compare(
      m, shield, agent,
      {CorrectionKind::AgentPreference, CorrectionKind::MinimizeCost, CorrectionKind::MinimizeInterventions}, config);
  std::uint64_t audit_failures = 0;
  for (const auto& r : rows) {
    info("%-18s interventions %.3f (%+.1f%%), cost %.1f (%+.1f%%), violations %llu", r.label.c_str(),
         r.mean_interventions, r.relative_interventions, r.mean_cost, r.relative_cost,
         (unsigned long long)r.violations);
    audit_failures += r.audit_failures;
  }
  auto row = [&](const char* label) {
    return *std::find_if(rows.begin(), rows.end(), [&](const PostOptRow& r) { return r.label == label; });
  };
  const auto base = row("uniform"), pref = row("agent-preference"), minint = row("min-interventions");
  const bool reduces = minint.mean_interventions < base.mean_interventions;
  const bool within = std::abs(pref.relative_interventions) <= 50.0;
  verdict(7, reduces && within && audit_failures == 0,
          fmt("cruise control: min-interventions %.3f vs uniform %.3f (%+.1f%%); agent-preference %+.1f%% "
              "(within +-50%%); %llu corrections outside the allowed set; %.1f s",
              minint.mean_interventions, base.mean_interventions, minint.relative_interventions,
              pref.relative_interventions, (unsigned long long)audit_failures, since(t0)));
}

void determinism() {
  const auto t0 = Clock::now();
  struct Artifacts {
    Bytes shield, cache, qtable;
  };
  auto produce = [](std::size_t workers) {
    Artifacts out;
    BouncingBall m;
    const PartitionSpec spec = m.partition({0.1, 0.1});
    const SupportScheme scheme = worst_case(3);
    BuildOptions options;
    options.workers = workers;
    const auto ts = build_transition_system(m, spec, scheme, options);
    const auto strategy = most_permissive(ts, solve(ts, SafetyPredicate::of_model(m)));
    out.shield = encode_shield(strategy);
    out.cache = encode_transitions(ts, scheme, 0x1234);
    LearnConfig learn;
    learn.episodes = 300;
    learn.seed = 5;
    out.qtable = encode_qtable(train(m, spec, learn, nullptr));

    RandomWalk rw;
    const auto rts = build_transition_system(rw, rw.partition({0.05, 0.05}), worst_case(4), options);
    const Shield rshield(most_permissive(rts, solve(rts, SafetyPredicate::of_model(rw))));
    const auto enc = encode_shield(rshield.strategy());
    out.shield.insert(out.shield.end(), enc.begin(), enc.end());
    const auto q = encode_qtable(train(rw, rw.partition({0.05, 0.05}), learn, &rshield));
    out.qtable.insert(out.qtable.end(), q.begin(), q.end());
    return out;
  };
  const auto a = produce(1), b = produce(0);
  // Also through the file system.
  const auto dir = std::filesystem::temp_directory_path();
  write_file(dir / "gridshield_acceptance_a.bin", a.shield);
  write_file(dir / "gridshield_acceptance_b.bin", b.shield);
  const bool files_equal = read_file(dir / "gridshield_acceptance_a.bin") ==
                           read_file(dir / "gridshield_acceptance_b.bin");
  std::filesystem::remove(dir / "gridshield_acceptance_a.bin");
  std::filesystem::remove(dir / "gridshield_acceptance_b.bin");
  const bool same = a.shield == b.shield && a.cache == b.cache && a.qtable == b.qtable && files_equal;
  verdict(8, same,
          fmt("two runs (1 worker vs all workers): shield %s, transition cache %s, Q-table %s (%zu/%zu/%zu bytes), "
              "%.1f s",
              a.shield == b.shield ? "identical" : "DIFFER", a.cache == b.cache ? "identical" : "DIFFER",
              a.qtable == b.qtable ? "identical" : "DIFFER", a.shield.size(), a.cache.size(), a.qtable.size(),
              since(t0)));
}

void micro_checks() {
  BouncingBall m;
  Rng rng(9);
  double worst_residual = 0, worst_gain = 0;
  for (int i = 0; i < 10000; ++i) {
    const double p = uniform(rng, 0, 15), v = uniform(rng, -15, 15);
    worst_residual = std::max(worst_residual, std::abs(ball::flow(p, v, ball::bounce_time(p, v)).first));
    const State s{p, v};
    RandomDraws draws(rng, m.randomness());
    const State next = m.step(s, BouncingBall::kNoHit, draws);
    const double e0 = ball::kGravity * s[0] + 0.5 * s[1] * s[1];
    const double e1 = ball::kGravity * next[0] + 0.5 * next[1] * next[1];
    worst_gain = std::max(worst_gain, (e1 - e0) / std::max(e0, 1e-300));
  }
  const double cp = clopper_pearson_lower(0, 459, 0.99);
  double tail = std::abs(binomial_upper_tail(459, 459, cp) - 0.01);
  for (std::uint64_t k : {1u, 5u, 20u}) {
    const double b = clopper_pearson_lower(k, 459, 0.99);
    tail = std::max(tail, std::abs(binomial_upper_tail(459 - k, 459, b) - 0.01));
  }
  verdict(9, worst_residual < 1e-9 && worst_gain <= 1e-6 && cp >= 0.99 && tail < 1e-10,
          fmt("bounce residual %.2e (< 1e-9); largest relative energy gain without hits %.2e (<= 1e-6); "
              "CP(0, 459, 0.99) = %.6f (>= 0.99); binomial tail residual %.2e (< 1e-10)",
              worst_residual, worst_gain, cp, tail));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    oracle_equivalence();
    underapproximation_and_closure();
    BouncingBall ball;
    const Synthesis fine = synthesize(ball, {0.02, 0.02}, worst_case(4));
    bouncing_ball_safety(fine);
    coarse_shield_unsafe_run();
    accuracy_trend();
    pre_versus_post(fine);
    post_optimization();
    determinism();
    micro_checks();
  } catch (const std::exception& e) {
    std::printf("FAIL [-] aborted: %s\n", e.what());
    return 1;
  }
  std::printf("acceptance: %d failing criteria, %.1f s total\n", failures, since(t0));
  return failures == 0 ? 0 : 1;
}
