#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gridshield/learning.hpp"
#include "gridshield/models.hpp"
#include "gridshield/reachability.hpp"
#include "gridshield/safety_game.hpp"
#include "gridshield/shielding.hpp"

namespace gridshield {

using ModelParams = std::variant<BouncingBallParams, RandomWalkParams, CruiseControlParams, DcDcParams, OilPumpParams>;

struct EvaluateConfig {
  std::uint64_t episodes = 10000;
  double confidence = 0.99;
  std::string correction = "uniform";
  std::vector<double> deterrences{0, 10, 100, 1000};
  std::size_t repetitions = 10;
  std::uint64_t trace_episodes = 1000;      // per sweep cell
  std::uint64_t secondary_episodes = 4000;  // post-optimization training
};

struct AccuracyConfig {
  std::uint64_t samples = 1000000;
  std::vector<double> gammas{0.5, 1.0};
  std::vector<std::uint32_t> ns{1, 2, 3, 4};
};

/// Everything a command needs; parsed from JSON with full defaults.
struct RunConfig {
  std::string model = "bouncing_ball";
  ModelParams params = BouncingBallParams{};
  SupportScheme scheme;
  OobPolicy oob = OobPolicy::Forbid;
  Fallback fallback = Fallback::Passthrough;
  LearnConfig learn;
  EvaluateConfig evaluate;
  AccuracyConfig accuracy;
  std::uint64_t seed = 0;
  std::uint64_t memory_budget_mb = 4096;
  std::size_t workers = 0;  // not part of the digest
  std::string cache_dir;    // empty: no transition cache

  /// Grid granularity from the model parameters.
  std::vector<double>& gamma();
  const std::vector<double>& gamma() const;
  /// Replaces the granularity; a single value applies to every dimension.
  void set_gamma(const std::vector<double>& g);
};

const std::vector<std::string>& model_names();

/// Default configuration for a model name. Throws ConfigError for unknown
/// names.
RunConfig default_config(const std::string& model);

/// Parses JSON text. Missing keys take defaults (model defaults for the
/// chosen model); unknown keys are a ConfigError.
RunConfig parse_config(const std::string& json_text);

/// Canonical JSON with every field spelled out.
std::string dump_config(const RunConfig& config, bool with_runtime = true);

/// FNV-1a of the canonical dump without runtime-only fields.
std::uint64_t config_digest(const RunConfig& config);

/// Digest of the fields that determine a transition system.
std::uint64_t transitions_digest(const RunConfig& config);

std::unique_ptr<EnvironmentModel> make_model(const RunConfig& config);

}  // namespace gridshield
