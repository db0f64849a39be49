#include "gridshield/gridshield.h"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <optional>
#include <string>

#include "gridshield/config.hpp"
#include "gridshield/evaluation.hpp"
#include "gridshield/io.hpp"

using namespace gridshield;

struct gs_config {
  RunConfig c;
};
struct gs_transitions {
  TransitionSystem ts;
  SupportScheme scheme;
  std::uint64_t digest;
};
struct gs_shield {
  MostPermissiveStrategy strategy;
};
struct gs_qtable {
  QTable q;
};

namespace {

thread_local std::string g_error;

gs_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return GS_ERR_CONFIG;
    case ErrorCode::MemoryBudget: return GS_ERR_MEMORY_BUDGET;
    case ErrorCode::Mismatch: return GS_ERR_MISMATCH;
    case ErrorCode::OutOfBounds: return GS_ERR_OUT_OF_BOUNDS;
    case ErrorCode::Overflow: return GS_ERR_OVERFLOW;
    case ErrorCode::NotBoxAffine: return GS_ERR_NOT_BOX_AFFINE;
    case ErrorCode::NotAFixpoint: return GS_ERR_NOT_A_FIXPOINT;
    case ErrorCode::SizeLimit: return GS_ERR_SIZE_LIMIT;
    case ErrorCode::EmptyMenu: return GS_ERR_EMPTY_MENU;
    case ErrorCode::DomainError: return GS_ERR_DOMAIN;
    case ErrorCode::FormatError: return GS_ERR_FORMAT;
    case ErrorCode::IoError: return GS_ERR_IO;
  }
  return GS_ERR_INTERNAL;
}

gs_status fail(gs_status status, std::string message) {
  g_error = std::move(message);
  return status;
}

template <class F>
gs_status guarded(F&& body) {
  g_error.clear();
  try {
    return body();
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(GS_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GS_ERR_MEMORY_BUDGET, "out of memory");
  } catch (const std::exception& e) {
    return fail(GS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GS_ERR_INTERNAL, "unknown failure");
  }
}

#define GS_REQUIRE(cond, what) \
  if (!(cond)) return fail(GS_ERR_INVALID_ARGUMENT, what)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

struct Setup {
  std::unique_ptr<EnvironmentModel> model;
  PartitionSpec spec;
};

Setup setup(const RunConfig& c) {
  auto model = make_model(c);
  auto spec = model->partition(c.gamma());
  return {std::move(model), std::move(spec)};
}

void require_same_grid(const PartitionSpec& a, const PartitionSpec& b, const char* what) {
  if (!(a == b)) throw Error(ErrorCode::Mismatch, std::string(what) + " was built for a different partition");
}

void require_same_bounds(const EnvironmentModel& model, const PartitionSpec& spec, const char* what) {
  if (!model.matches(spec)) throw Error(ErrorCode::Mismatch, std::string(what) + " does not fit the model's bounds");
}

// All sampled initial states lie in winning cells.
bool initial_states_safe(const EnvironmentModel& model, const MostPermissiveStrategy& strategy, std::uint64_t seed) {
  for (std::uint64_t i = 0; i < 64; ++i) {
    Rng rng(mix_seed(seed, i));
    if (!strategy.lift(model.initial_state(rng)).shielded) return false;
  }
  return true;
}

gs_transitions* build_or_load(const RunConfig& c, const EnvironmentModel& model, const PartitionSpec& spec,
                              gs_synthesis_report* report) {
  const std::uint64_t digest = transitions_digest(c);
  std::filesystem::path cache;
  if (!c.cache_dir.empty()) {
    char name[40];
    std::snprintf(name, sizeof name, "ts-%016llx.hsts", static_cast<unsigned long long>(digest));
    cache = std::filesystem::path(c.cache_dir) / name;
    if (std::filesystem::exists(cache)) {
      auto loaded = decode_transitions(read_file(cache));
      if (loaded.digest == digest && loaded.ts.spec() == spec) {
        if (report) {
          report->cells = spec.cell_count();
          report->transitions = loaded.ts.transition_count();
          report->from_cache = 1;
        }
        return new gs_transitions{std::move(loaded.ts), loaded.scheme, digest};
      }
    }
  }
  BuildOptions options;
  options.workers = c.workers;
  options.memory_budget_bytes = static_cast<std::size_t>(c.memory_budget_mb) << 20;
  BuildStats stats;
  auto ts = build_transition_system(model, spec, c.scheme, options, &stats);
  if (report) {
    report->cells = stats.cells;
    report->transitions = stats.transitions;
    report->simulations = stats.simulations;
    report->build_seconds = stats.seconds;
    report->from_cache = 0;
  }
  if (!cache.empty()) {
    std::filesystem::create_directories(cache.parent_path());
    write_file(cache, encode_transitions(ts, c.scheme, digest));
  }
  return new gs_transitions{std::move(ts), c.scheme, digest};
}

LearnConfig secondary_config(const RunConfig& c) {
  LearnConfig l = c.learn;
  l.episodes = c.evaluate.secondary_episodes;
  l.seed = mix_seed(c.learn.seed, 0x5ec0);
  return l;
}

void fill(gs_eval_report* out, const EvaluationReport& r) {
  out->episodes = r.episodes;
  out->violations = r.violations;
  out->interventions = r.interventions;
  out->steps = r.steps;
  out->unshielded_steps = r.unshielded_steps;
  out->audited_corrections = r.audited_corrections;
  out->audit_failures = r.audit_failures;
  out->mean_interventions = r.mean_interventions;
  out->average_cost = r.average_cost;
  out->ci_lower = r.ci.lower;
  out->ci_upper = r.ci.upper;
  out->confidence = r.ci.confidence;
  out->seconds = r.seconds;
}

}  // namespace

extern "C" {

const char* gs_last_error(void) { return g_error.c_str(); }

const char* gs_status_name(gs_status status) {
  switch (status) {
    case GS_OK: return "ok";
    case GS_ERR_CONFIG: return "config error";
    case GS_ERR_MEMORY_BUDGET: return "memory budget exceeded";
    case GS_ERR_INITIAL_UNSAFE: return "initial state unsafe";
    case GS_ERR_MISMATCH: return "partition mismatch";
    case GS_ERR_VIOLATION: return "safety violation";
    case GS_ERR_OUT_OF_BOUNDS: return "out of bounds";
    case GS_ERR_OVERFLOW: return "overflow";
    case GS_ERR_NOT_BOX_AFFINE: return "not box affine";
    case GS_ERR_NOT_A_FIXPOINT: return "not a fixpoint";
    case GS_ERR_SIZE_LIMIT: return "size limit";
    case GS_ERR_EMPTY_MENU: return "empty menu";
    case GS_ERR_DOMAIN: return "domain error";
    case GS_ERR_FORMAT: return "format error";
    case GS_ERR_IO: return "i/o error";
    case GS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void gs_string_free(char* s) { std::free(s); }

// --- configuration --------------------------------------------------------

gs_status gs_config_default(const char* model, gs_config** out) {
  GS_REQUIRE(model && out, "null argument");
  return guarded([&] {
    *out = new gs_config{default_config(model)};
    return GS_OK;
  });
}

gs_status gs_config_parse(const char* json, gs_config** out) {
  GS_REQUIRE(json && out, "null argument");
  return guarded([&] {
    *out = new gs_config{parse_config(json)};
    return GS_OK;
  });
}

gs_status gs_config_load(const char* path, gs_config** out) {
  GS_REQUIRE(path && out, "null argument");
  return guarded([&] {
    const auto bytes = read_file(path);
    *out = new gs_config{parse_config(std::string(bytes.begin(), bytes.end()))};
    return GS_OK;
  });
}

gs_status gs_config_set(gs_config* config, const char* pointer, const char* json_value) {
  GS_REQUIRE(config && pointer && json_value, "null argument");
  return guarded([&] {
    auto j = nlohmann::json::parse(dump_config(config->c));
    const auto value = nlohmann::json::parse(json_value);
    if (std::string_view(pointer) == "/model") {
      if (value != j["model"]) j.erase("params");
      j["model"] = value;
    } else {
      j[nlohmann::json::json_pointer(pointer)] = value;
    }
    config->c = parse_config(j.dump());
    return GS_OK;
  });
}

gs_status gs_config_set_gamma(gs_config* config, const double* gamma, size_t count) {
  GS_REQUIRE(config && gamma && count > 0, "null argument");
  return guarded([&] {
    RunConfig next = config->c;
    next.set_gamma(std::vector<double>(gamma, gamma + count));
    make_model(next)->partition(next.gamma());
    config->c = std::move(next);
    return GS_OK;
  });
}

gs_status gs_config_dump(const gs_config* config, char** json) {
  GS_REQUIRE(config && json, "null argument");
  return guarded([&] {
    *json = copy_string(dump_config(config->c));
    return GS_OK;
  });
}

gs_status gs_config_digest(const gs_config* config, uint64_t* digest) {
  GS_REQUIRE(config && digest, "null argument");
  return guarded([&] {
    *digest = config_digest(config->c);
    return GS_OK;
  });
}

gs_status gs_config_model(const gs_config* config, char** name) {
  GS_REQUIRE(config && name, "null argument");
  return guarded([&] {
    *name = copy_string(config->c.model);
    return GS_OK;
  });
}

void gs_config_free(gs_config* config) { delete config; }

// --- synthesis ------------------------------------------------------------

gs_status gs_build_transitions(const gs_config* config, gs_transitions** out, gs_synthesis_report* report) {
  GS_REQUIRE(config && out, "null argument");
  return guarded([&] {
    if (report) *report = {};
    auto s = setup(config->c);
    *out = build_or_load(config->c, *s.model, s.spec, report);
    return GS_OK;
  });
}

gs_status gs_transitions_save(const gs_transitions* ts, const char* path) {
  GS_REQUIRE(ts && path, "null argument");
  return guarded([&] {
    write_file(path, encode_transitions(ts->ts, ts->scheme, ts->digest));
    return GS_OK;
  });
}

gs_status gs_transitions_load(const char* path, gs_transitions** out) {
  GS_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto cache = decode_transitions(read_file(path));
    *out = new gs_transitions{std::move(cache.ts), cache.scheme, cache.digest};
    return GS_OK;
  });
}

void gs_transitions_free(gs_transitions* ts) { delete ts; }

gs_status gs_synthesize(const gs_config* config, const gs_transitions* ts, gs_shield** out,
                        gs_synthesis_report* report) {
  GS_REQUIRE(config && out, "null argument");
  return guarded([&] {
    gs_synthesis_report local{};
    const RunConfig& c = config->c;
    auto s = setup(c);
    std::unique_ptr<gs_transitions> owned;
    if (!ts) {
      owned.reset(build_or_load(c, *s.model, s.spec, &local));
      ts = owned.get();
    } else {
      require_same_grid(ts->ts.spec(), s.spec, "transition system");
      local.cells = ts->ts.cell_count();
      local.transitions = ts->ts.transition_count();
    }
    const auto started = std::chrono::steady_clock::now();
    const auto initial = initial_safe_cells(s.spec, SafetyPredicate::of_model(*s.model));
    GameReport game;
    const auto winning = solve(ts->ts, initial, c.oob, &game);
    auto strategy = most_permissive(ts->ts, winning, c.oob);
    local.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    local.initial_cells = initial.count();
    local.safe_cells = winning.count();
    local.iterations = game.iterations;
    local.initial_state_safe = initial_states_safe(*s.model, strategy, c.seed) ? 1 : 0;
    *out = new gs_shield{std::move(strategy)};
    if (report) *report = local;
    return GS_OK;
  });
}

gs_status gs_shield_save(const gs_shield* shield, const char* path) {
  GS_REQUIRE(shield && path, "null argument");
  return guarded([&] {
    write_file(path, encode_shield(shield->strategy));
    return GS_OK;
  });
}

gs_status gs_shield_load(const char* path, gs_shield** out) {
  GS_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new gs_shield{decode_shield(read_file(path))};
    return GS_OK;
  });
}

gs_status gs_shield_cells(const gs_shield* shield, uint64_t* cells, uint64_t* winning) {
  GS_REQUIRE(shield, "null argument");
  if (cells) *cells = shield->strategy.spec().cell_count();
  if (winning) *winning = shield->strategy.winning_cells();
  return GS_OK;
}

gs_status gs_shield_lift(const gs_shield* shield, const double* state, size_t dim, uint8_t* mask, int* shielded) {
  GS_REQUIRE(shield && state && mask, "null argument");
  return guarded([&] {
    if (dim != shield->strategy.spec().dim()) return fail(GS_ERR_INVALID_ARGUMENT, "state dimension mismatch");
    const auto lifted = shield->strategy.lift(State(std::span<const double>(state, dim)));
    *mask = lifted.allowed.mask();
    if (shielded) *shielded = lifted.shielded ? 1 : 0;
    return GS_OK;
  });
}

gs_status gs_shield_export_map(const gs_shield* shield, const double* fixed, size_t dim, char** csv) {
  GS_REQUIRE(shield && fixed && csv, "null argument");
  return guarded([&] {
    const PartitionSpec& spec = shield->strategy.spec();
    if (dim != spec.dim()) return fail(GS_ERR_INVALID_ARGUMENT, "slice needs one entry per dimension");
    std::vector<std::size_t> free_dims;
    CellId base(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      if (std::isnan(fixed[d])) {
        free_dims.push_back(d);
        continue;
      }
      if (!(fixed[d] >= spec.lower()[d] && fixed[d] < spec.upper()[d]))
        return fail(GS_ERR_OUT_OF_BOUNDS, "slice value for dimension " + std::to_string(d) + " is outside the bounds");
      base[d] = spec.index_along(d, fixed[d]);
    }
    if (free_dims.size() != 2) return fail(GS_ERR_INVALID_ARGUMENT, "exactly two dimensions must be free");
    const std::size_t a = free_dims[0], b = free_dims[1];
    std::string out = "dim" + std::to_string(a) + "_index,dim" + std::to_string(b) + "_index,dim" +
                      std::to_string(a) + "_low,dim" + std::to_string(b) + "_low,mask\n";
    char row[128];
    for (std::int64_t i = 0; i < spec.cells_along(a); ++i) {
      for (std::int64_t j = 0; j < spec.cells_along(b); ++j) {
        CellId id = base;
        id[a] = i;
        id[b] = j;
        const auto box = spec.cell_box(id);
        std::snprintf(row, sizeof row, "%lld,%lld,%.17g,%.17g,%u\n", static_cast<long long>(i),
                      static_cast<long long>(j), box.low[a], box.low[b],
                      static_cast<unsigned>(shield->strategy.allowed(spec.ordinal(id)).mask()));
        out += row;
      }
    }
    *csv = copy_string(out);
    return GS_OK;
  });
}

void gs_shield_free(gs_shield* shield) { delete shield; }

// --- learning -------------------------------------------------------------

gs_status gs_learn(const gs_config* config, const gs_shield* shield, gs_mode mode, gs_qtable** out) {
  GS_REQUIRE(config && out, "null argument");
  return guarded([&] {
    auto s = setup(config->c);
    std::optional<Shield> guard;
    if (mode == GS_MODE_PRE) {
      if (!shield) return fail(GS_ERR_INVALID_ARGUMENT, "pre-shielded learning needs a shield");
      require_same_grid(shield->strategy.spec(), s.spec, "shield");
      guard.emplace(shield->strategy, config->c.fallback);
    } else if (shield) {
      require_same_grid(shield->strategy.spec(), s.spec, "shield");
    }
    *out = new gs_qtable{train(*s.model, s.spec, config->c.learn, guard ? &*guard : nullptr)};
    return GS_OK;
  });
}

gs_status gs_qtable_save(const gs_qtable* q, const char* path) {
  GS_REQUIRE(q && path, "null argument");
  return guarded([&] {
    write_file(path, encode_qtable(q->q));
    return GS_OK;
  });
}

gs_status gs_qtable_load(const char* path, gs_qtable** out) {
  GS_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new gs_qtable{decode_qtable(read_file(path))};
    return GS_OK;
  });
}

void gs_qtable_free(gs_qtable* q) { delete q; }

// --- evaluation -----------------------------------------------------------

gs_status gs_evaluate(const gs_config* config, const gs_shield* shield, const gs_qtable* agent, gs_mode mode,
                      gs_eval_report* report) {
  GS_REQUIRE(config && report, "null argument");
  return guarded([&] {
    const RunConfig& c = config->c;
    auto model = make_model(c);
    if (mode != GS_MODE_NONE && !shield) return fail(GS_ERR_INVALID_ARGUMENT, "shielded evaluation needs a shield");
    std::optional<Shield> guard;
    if (shield) {
      require_same_bounds(*model, shield->strategy.spec(), "shield");
      guard.emplace(shield->strategy, c.fallback);
    }
    if (agent) require_same_bounds(*model, agent->q.spec(), "agent");
    Actor actor;
    actor.agent.q = agent ? &agent->q : nullptr;
    actor.shield = mode == GS_MODE_NONE ? nullptr : &*guard;
    actor.mode = mode == GS_MODE_PRE ? ShieldMode::Pre : mode == GS_MODE_POST ? ShieldMode::Post : ShieldMode::None;
    const auto kind = *parse_correction(c.evaluate.correction);
    std::optional<SecondaryPolicy> secondary;
    if (actor.mode == ShieldMode::Post &&
        (kind == CorrectionKind::MinimizeCost || kind == CorrectionKind::MinimizeInterventions)) {
      const auto objective =
          kind == CorrectionKind::MinimizeCost ? SecondaryObjective::Cost : SecondaryObjective::Interventions;
      secondary.emplace(train_secondary_policy(*model, *guard, actor.agent, objective, secondary_config(c)));
    }
    actor.correction = {kind, secondary ? &*secondary : nullptr};
    EvalOptions options;
    options.workers = c.workers;
    options.confidence = c.evaluate.confidence;
    options.audit = true;
    fill(report, run_episodes(*model, actor, c.evaluate.episodes, c.seed, options));
    return GS_OK;
  });
}

gs_status gs_deterrence_sweep(const gs_config* config, const gs_shield* shield, char** csv) {
  GS_REQUIRE(config && shield && csv, "null argument");
  return guarded([&] {
    const RunConfig& c = config->c;
    auto s = setup(c);
    require_same_grid(shield->strategy.spec(), s.spec, "shield");
    const Shield guard(shield->strategy, c.fallback);
    SweepConfig sweep;
    sweep.learn = c.learn;
    sweep.eval_episodes = c.evaluate.trace_episodes;
    sweep.seed = c.seed;
    sweep.workers = c.workers;
    *csv = copy_string(sweep_csv(deterrence_sweep(*s.model, guard, c.evaluate.deterrences, c.evaluate.repetitions, sweep)));
    return GS_OK;
  });
}

gs_status gs_post_optimization(const gs_config* config, const gs_shield* shield, const gs_qtable* agent,
                               const gs_qtable* pre_shielded_agent, char** csv) {
  GS_REQUIRE(config && shield && agent && csv, "null argument");
  return guarded([&] {
    const RunConfig& c = config->c;
    auto model = make_model(c);
    require_same_bounds(*model, shield->strategy.spec(), "shield");
    require_same_bounds(*model, agent->q.spec(), "agent");
    const Shield guard(shield->strategy, c.fallback);
    PostOptConfig post;
    post.secondary = secondary_config(c);
    post.episodes = c.evaluate.trace_episodes;
    post.seed = c.seed;
    post.workers = c.workers;
    const auto rows = post_optimization_compare(
        *model, guard, agent->q,
        {CorrectionKind::AgentPreference, CorrectionKind::MinimizeCost, CorrectionKind::MinimizeInterventions}, post,
        pre_shielded_agent ? &pre_shielded_agent->q : nullptr);
    *csv = copy_string(post_opt_csv(rows));
    return GS_OK;
  });
}

gs_status gs_accuracy(const gs_config* config, char** csv) {
  GS_REQUIRE(config && csv, "null argument");
  return guarded([&] {
    const RunConfig& base = config->c;
    std::string out = "gamma,n,randomness,samples,accuracy,transitions,build_seconds\n";
    char row[256];
    for (double g : base.accuracy.gammas) {
      for (auto n : base.accuracy.ns) {
        RunConfig c = base;
        c.set_gamma({g});
        c.scheme.n = n;
        auto s = setup(c);
        BuildOptions options;
        options.workers = c.workers;
        options.memory_budget_bytes = static_cast<std::size_t>(c.memory_budget_mb) << 20;
        BuildStats stats;
        const auto ts = build_transition_system(*s.model, s.spec, c.scheme, options, &stats);
        const double acc = accuracy_estimate(*s.model, ts, c.accuracy.samples, c.seed, c.workers);
        std::snprintf(row, sizeof row, "%.17g,%u,%s,%llu,%.17g,%zu,%.3f\n", g, n,
                      c.scheme.randomness == RandomnessPolicy::WorstCase ? "worst_case" : "sampled_grid",
                      static_cast<unsigned long long>(c.accuracy.samples), acc, stats.transitions, stats.seconds);
        out += row;
      }
    }
    *csv = copy_string(out);
    return GS_OK;
  });
}

gs_status gs_clopper_pearson_lower(uint64_t failures, uint64_t trials, double confidence, double* lower) {
  GS_REQUIRE(lower, "null argument");
  return guarded([&] {
    *lower = clopper_pearson_lower(failures, trials, confidence);
    return GS_OK;
  });
}

}  // extern "C"
