#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridshield/learning.hpp"
#include "gridshield/shielding.hpp"

namespace gridshield {

struct ConfidenceInterval {
  double lower = 0;
  double upper = 1;
  double confidence = 0.99;
};

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p);

/// One-sided exact lower bound on the success probability after `failures`
/// out of `n` trials. Throws DomainError on invalid counts or confidence.
double clopper_pearson_lower(std::uint64_t failures, std::uint64_t n, double confidence);

enum class ShieldMode : std::uint8_t { None, Pre, Post };

std::string_view to_string(ShieldMode mode) noexcept;

/// How actions are picked during an evaluation run.
struct Actor {
  Agent agent;
  const Shield* shield = nullptr;
  ShieldMode mode = ShieldMode::None;
  CorrectionPolicy correction;
};

struct EvalOptions {
  std::size_t workers = 0;
  std::size_t max_steps = 0;  // 0: the model's horizon
  double confidence = 0.99;
  bool audit = false;         // check every correction lies in the allowed set
};

struct EpisodeResult {
  bool violated = false;
  double cost = 0;
  std::uint64_t steps = 0;
  std::uint64_t interventions = 0;
  std::uint64_t unshielded_steps = 0;
  std::uint64_t audit_failures = 0;
};

struct EvaluationReport {
  std::uint64_t episodes = 0;
  std::uint64_t violations = 0;
  std::uint64_t interventions = 0;
  double mean_interventions = 0;
  double average_cost = 0;
  std::uint64_t steps = 0;
  std::uint64_t unshielded_steps = 0;
  std::uint64_t audited_corrections = 0;
  std::uint64_t audit_failures = 0;
  ConfidenceInterval ci;
  double seconds = 0;
};

/// One seeded episode from the model's initial distribution. The episode ends
/// at the first unsafe state, at a goal state, or at the step cap.
EpisodeResult run_episode(const EnvironmentModel& model, const Actor& actor, std::uint64_t seed,
                          std::uint64_t index, std::size_t max_steps, bool audit = false);  // max_steps 0: horizon

/// N episodes with per-episode seeds mix_seed(seed, i), merged in index order.
EvaluationReport run_episodes(const EnvironmentModel& model, const Actor& actor, std::uint64_t episodes,
                              std::uint64_t seed, const EvalOptions& options = {});

struct SweepConfig {
  LearnConfig learn;                 // deterrence and seed are overridden per cell
  std::uint64_t eval_episodes = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

struct SweepRow {
  double deterrence = 0;
  ShieldMode kind = ShieldMode::None;
  std::size_t repetition = 0;
  double mean_cost = 0;
  std::uint64_t violations = 0;
  double mean_interventions = 0;
};

/// For every d and repetition: train an unshielded and a pre-shielded agent,
/// then evaluate unshielded, post-shielded and pre-shielded deployments.
/// Returns |d| * 3 * repetitions rows ordered by d, repetition, kind.
std::vector<SweepRow> deterrence_sweep(const EnvironmentModel& model, const Shield& shield,
                                       const std::vector<double>& deterrences, std::size_t repetitions,
                                       const SweepConfig& config);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct PostOptRow {
  std::string label;
  double mean_cost = 0;
  double mean_interventions = 0;
  double relative_cost = 0;           // vs. the uniform row, in percent
  double relative_interventions = 0;  // vs. the uniform row, in percent
  std::uint64_t violations = 0;
  std::uint64_t audit_failures = 0;
};

struct PostOptConfig {
  LearnConfig secondary;
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

/// Evaluates the agent under the post-shield with each correction policy,
/// training secondary learners where needed. The first row is always the
/// UniformRandom baseline; a pre-shielded agent adds a final row.
std::vector<PostOptRow> post_optimization_compare(const EnvironmentModel& model, const Shield& shield,
                                                  const QTable& agent, const std::vector<CorrectionKind>& policies,
                                                  const PostOptConfig& config,
                                                  const QTable* pre_shielded_agent = nullptr);

std::string post_opt_csv(const std::vector<PostOptRow>& rows);

}  // namespace gridshield
