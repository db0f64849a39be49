// gridshield command-line front end. Talks to the library only through the
// C interface in gridshield.h.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridshield/gridshield.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMemory = 3;
constexpr int kExitInitialUnsafe = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitViolation = 6;

struct CliError {
  int code;
  std::string message;
};

int exit_code(gs_status s) {
  switch (s) {
    case GS_ERR_CONFIG:
    case GS_ERR_INVALID_ARGUMENT:
    case GS_ERR_OUT_OF_BOUNDS:
      return kExitConfig;
    case GS_ERR_MEMORY_BUDGET: return kExitMemory;
    case GS_ERR_INITIAL_UNSAFE: return kExitInitialUnsafe;
    case GS_ERR_MISMATCH: return kExitMismatch;
    case GS_ERR_VIOLATION: return kExitViolation;
    default: return kExitFailure;
  }
}

void check(gs_status s) {
  if (s != GS_OK) throw CliError{exit_code(s), std::string(gs_status_name(s)) + ": " + gs_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<gs_config, gs_config_free>;
using Shield = Handle<gs_shield, gs_shield_free>;
using QTable = Handle<gs_qtable, gs_qtable_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  gs_string_free(s);
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

struct Common {
  std::string config_path;
  std::string model;
  std::vector<double> gamma;
  std::optional<std::uint32_t> n;
  std::optional<std::uint32_t> m;
  std::string randomness;
  std::optional<std::uint64_t> seed;
  std::string oob;
  std::string fallback;
  std::string cache_dir;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c, bool gamma_is_partition = true) {
  app->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--model", c.model, "bouncing_ball, random_walk, cruise_control, dcdc or oil_pump");
  if (gamma_is_partition)
    app->add_option("--gamma", c.gamma, "grid granularity; one value applies to every dimension");
  app->add_option("--seed", c.seed, "seed for the run and for learning");
  app->add_option("--m", c.m, "randomness sample count for sampled_grid");
  app->add_option("--randomness", c.randomness, "worst_case or sampled_grid");
  app->add_option("--oob", c.oob, "forbid or allow_all");
  app->add_option("--fallback", c.fallback, "passthrough or abort");
  app->add_option("--cache-dir", c.cache_dir, "directory for transition caches");
  app->add_option("--set", c.sets, "override a config field: /json/pointer=value");
}

void set(gs_config* cfg, const std::string& pointer, const nlohmann::json& value) {
  check(gs_config_set(cfg, pointer.c_str(), value.dump().c_str()));
}

void load_config(const Common& c, Config& cfg) {
  if (!c.config_path.empty())
    check(gs_config_load(c.config_path.c_str(), cfg.out()));
  else
    check(gs_config_default(c.model.empty() ? "bouncing_ball" : c.model.c_str(), cfg.out()));
  if (!c.config_path.empty() && !c.model.empty()) set(cfg.get(), "/model", c.model);
  if (!c.gamma.empty()) check(gs_config_set_gamma(cfg.get(), c.gamma.data(), c.gamma.size()));
  if (c.n) set(cfg.get(), "/scheme/n", *c.n);
  if (c.m) set(cfg.get(), "/scheme/m", *c.m);
  if (!c.randomness.empty()) set(cfg.get(), "/scheme/randomness", c.randomness);
  if (c.seed) {
    set(cfg.get(), "/seed", *c.seed);
    set(cfg.get(), "/learn/seed", *c.seed);
  }
  if (!c.oob.empty()) set(cfg.get(), "/oob_policy", c.oob);
  if (!c.fallback.empty()) set(cfg.get(), "/fallback", c.fallback);
  if (!c.cache_dir.empty()) set(cfg.get(), "/cache_dir", c.cache_dir);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || s.empty() || s[0] != '/')
      throw CliError{kExitConfig, "--set expects /pointer=value, got '" + s + "'"};
    const std::string value = s.substr(eq + 1);
    // Bare words are taken as strings.
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    check(gs_config_set(cfg.get(), s.substr(0, eq).c_str(),
                        parsed.is_discarded() ? nlohmann::json(value).dump().c_str() : value.c_str()));
  }
}

nlohmann::json provenance(const gs_config* cfg) {
  std::uint64_t digest = 0;
  check(gs_config_digest(cfg, &digest));
  char* dumped = nullptr;
  check(gs_config_dump(cfg, &dumped));
  const auto j = nlohmann::json::parse(take(dumped));
  return {{"config_digest", hex64(digest)}, {"seed", j.at("seed")}, {"model", j.at("model")}};
}

std::string csv_preamble(const gs_config* cfg) {
  const auto p = provenance(cfg);
  return "# config_digest=" + p["config_digest"].get<std::string>() + " seed=" + p["seed"].dump() + "\n";
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CliError{kExitFailure, "cannot write " + path};
}

void print_report(const nlohmann::json& report) { std::cout << report.dump(2) << "\n"; }

gs_mode parse_mode(const std::string& s) {
  if (s == "none" || s == "unshielded") return GS_MODE_NONE;
  if (s == "pre") return GS_MODE_PRE;
  if (s == "post") return GS_MODE_POST;
  throw CliError{kExitConfig, "--mode must be pre, post or none"};
}

const char* mode_name(gs_mode m) { return m == GS_MODE_PRE ? "pre" : m == GS_MODE_POST ? "post" : "none"; }

void load_shield(const std::string& path, Shield& shield) {
  if (!path.empty()) check(gs_shield_load(path.c_str(), shield.out()));
}

// --- synthesize -----------------------------------------------------------

struct SynthesizeArgs {
  Common common;
  std::string out = "shield.shld";
  std::string transitions_out;
  bool require_initial_safe = false;
};

int run_synthesize(const SynthesizeArgs& a) {
  Config cfg;
  load_config(a.common, cfg);
  gs_synthesis_report r{};
  gs_transitions* ts = nullptr;
  check(gs_build_transitions(cfg.get(), &ts, &r));
  Handle<gs_transitions, gs_transitions_free> owned;
  *owned.out() = ts;
  if (!a.transitions_out.empty()) check(gs_transitions_save(ts, a.transitions_out.c_str()));
  Shield shield;
  gs_synthesis_report g{};
  check(gs_synthesize(cfg.get(), ts, shield.out(), &g));
  check(gs_shield_save(shield.get(), a.out.c_str()));
  auto report = provenance(cfg.get());
  report["command"] = "synthesize";
  report["shield"] = a.out;
  report["cells"] = r.cells;
  report["transitions"] = r.transitions;
  report["simulations"] = r.simulations;
  report["transitions_from_cache"] = r.from_cache != 0;
  report["initial_cells"] = g.initial_cells;
  report["safe_cells"] = g.safe_cells;
  report["iterations"] = g.iterations;
  report["initial_state_safe"] = g.initial_state_safe != 0;
  report["build_seconds"] = r.build_seconds;
  report["solve_seconds"] = g.solve_seconds;
  print_report(report);
  if (a.require_initial_safe && !g.initial_state_safe) {
    std::cerr << "initial state is not in the safe set\n";
    return kExitInitialUnsafe;
  }
  return 0;
}

// --- learn ----------------------------------------------------------------

struct LearnArgs {
  Common common;
  std::string shield;
  std::string mode = "none";
  std::string out = "agent.hsqt";
  std::optional<std::uint64_t> episodes;
  std::optional<double> deterrence;
};

int run_learn(const LearnArgs& a) {
  Config cfg;
  load_config(a.common, cfg);
  if (a.episodes) set(cfg.get(), "/learn/episodes", *a.episodes);
  if (a.deterrence) set(cfg.get(), "/learn/deterrence", *a.deterrence);
  const gs_mode mode = parse_mode(a.mode);
  if (mode != GS_MODE_NONE && a.shield.empty()) throw CliError{kExitConfig, "--mode pre/post needs --shield"};
  Shield shield;
  load_shield(a.shield, shield);
  QTable q;
  check(gs_learn(cfg.get(), shield.get(), mode, q.out()));
  check(gs_qtable_save(q.get(), a.out.c_str()));
  auto report = provenance(cfg.get());
  report["command"] = "learn";
  report["mode"] = mode_name(mode);
  report["agent"] = a.out;
  print_report(report);
  return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string shield;
  std::string agent;
  std::string pre_agent;
  std::string mode;
  std::string policy;
  std::string out;
  std::optional<std::uint64_t> episodes;
  std::vector<double> deterrence;
  std::optional<std::size_t> repetitions;
  std::optional<double> confidence;
  bool certify = false;
  bool sweep = false;
  bool post_opt = false;
};

int run_evaluate(const EvaluateArgs& a) {
  Config cfg;
  load_config(a.common, cfg);
  if (!a.policy.empty()) set(cfg.get(), "/evaluate/correction", a.policy);
  if (a.confidence) set(cfg.get(), "/evaluate/confidence", *a.confidence);
  if (!a.deterrence.empty()) set(cfg.get(), "/evaluate/deterrences", a.deterrence);
  if (a.repetitions) set(cfg.get(), "/evaluate/repetitions", *a.repetitions);
  Shield shield;
  load_shield(a.shield, shield);

  if (a.sweep) {
    if (a.episodes) set(cfg.get(), "/evaluate/trace_episodes", *a.episodes);
    if (!shield.get()) throw CliError{kExitConfig, "--sweep needs --shield"};
    char* csv = nullptr;
    check(gs_deterrence_sweep(cfg.get(), shield.get(), &csv));
    write_text(a.out, csv_preamble(cfg.get()) + take(csv));
    return 0;
  }
  QTable agent, pre_agent;
  if (!a.agent.empty()) check(gs_qtable_load(a.agent.c_str(), agent.out()));
  if (a.post_opt) {
    if (a.episodes) set(cfg.get(), "/evaluate/trace_episodes", *a.episodes);
    if (!shield.get() || !agent.get()) throw CliError{kExitConfig, "--post-opt needs --shield and --agent"};
    if (!a.pre_agent.empty()) check(gs_qtable_load(a.pre_agent.c_str(), pre_agent.out()));
    char* csv = nullptr;
    check(gs_post_optimization(cfg.get(), shield.get(), agent.get(), pre_agent.get(), &csv));
    write_text(a.out, csv_preamble(cfg.get()) + take(csv));
    return 0;
  }

  if (a.episodes) set(cfg.get(), "/evaluate/episodes", *a.episodes);
  const gs_mode mode = a.mode.empty() ? (shield.get() ? GS_MODE_POST : GS_MODE_NONE) : parse_mode(a.mode);
  gs_eval_report r{};
  check(gs_evaluate(cfg.get(), shield.get(), agent.get(), mode, &r));
  auto report = provenance(cfg.get());
  report["command"] = a.certify ? "certify" : "evaluate";
  report["mode"] = mode_name(mode);
  report["agent"] = a.agent.empty() ? "random" : a.agent;
  report["episodes"] = r.episodes;
  report["violations"] = r.violations;
  report["interventions"] = r.interventions;
  report["mean_interventions"] = r.mean_interventions;
  report["average_cost"] = r.average_cost;
  report["steps"] = r.steps;
  report["unshielded_steps"] = r.unshielded_steps;
  report["audited_corrections"] = r.audited_corrections;
  report["audit_failures"] = r.audit_failures;
  report["safety_lower_bound"] = r.ci_lower;
  report["safety_upper_bound"] = r.ci_upper;
  report["confidence"] = r.confidence;
  report["seconds"] = r.seconds;
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  print_report(report);
  if (a.certify && (r.violations > 0 || r.audit_failures > 0)) {
    std::cerr << r.violations << " violating episode(s)\n";
    return kExitViolation;
  }
  return 0;
}

// --- accuracy -------------------------------------------------------------

struct AccuracyArgs {
  Common common;
  std::vector<double> gammas;
  std::vector<std::uint32_t> ns;
  std::optional<std::uint64_t> samples;
  std::string out;
};

int run_accuracy(const AccuracyArgs& a) {
  Config cfg;
  load_config(a.common, cfg);
  if (!a.gammas.empty()) set(cfg.get(), "/accuracy/gammas", a.gammas);
  if (!a.ns.empty()) set(cfg.get(), "/accuracy/ns", a.ns);
  if (a.samples) set(cfg.get(), "/accuracy/samples", *a.samples);
  char* csv = nullptr;
  check(gs_accuracy(cfg.get(), &csv));
  write_text(a.out, csv_preamble(cfg.get()) + take(csv));
  return 0;
}

// --- export-strategy-map --------------------------------------------------

struct ExportArgs {
  std::string shield;
  std::vector<std::string> fix;
  std::string out;
};

int run_export(const ExportArgs& a) {
  Shield shield;
  check(gs_shield_load(a.shield.c_str(), shield.out()));
  std::vector<double> fixed;
  for (const auto& f : a.fix) {
    if (f == "*" || f == "free") {
      fixed.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    try {
      std::size_t used = 0;
      fixed.push_back(std::stod(f, &used));
      if (used != f.size()) throw std::invalid_argument(f);
    } catch (const std::exception&) {
      throw CliError{kExitConfig, "--fix values must be numbers or '*', got '" + f + "'"};
    }
  }
  if (fixed.empty()) fixed.assign(2, std::numeric_limits<double>::quiet_NaN());
  char* csv = nullptr;
  check(gs_shield_export_map(shield.get(), fixed.data(), fixed.size(), &csv));
  write_text(a.out, take(csv));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shield synthesis and shielded learning on grid abstractions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gridshield 1.0");

  SynthesizeArgs syn;
  auto* s = app.add_subcommand("synthesize", "build the abstraction and write a shield file");
  add_common(s, syn.common);
  s->add_option("--n", syn.common.n, "supporting points per dimension");
  s->add_option("--out", syn.out, "shield output path");
  s->add_option("--transitions-out", syn.transitions_out, "also write the transition cache here");
  s->add_flag("--require-initial-safe", syn.require_initial_safe, "exit 4 unless the initial state is safe");

  LearnArgs learn;
  auto* l = app.add_subcommand("learn", "train a tabular Q-learning agent");
  add_common(l, learn.common);
  l->add_option("--n", learn.common.n, "supporting points per dimension");
  l->add_option("--shield", learn.shield, "shield file");
  l->add_option("--mode", learn.mode, "pre, post or none");
  l->add_option("--episodes", learn.episodes, "training episodes");
  l->add_option("--deterrence", learn.deterrence, "extra penalty for unsafe states");
  l->add_option("--out", learn.out, "agent output path");

  EvaluateArgs ev;
  auto add_evaluate = [&](CLI::App* e) {
    add_common(e, ev.common);
    e->add_option("--n", ev.common.n, "supporting points per dimension");
    e->add_option("--shield", ev.shield, "shield file");
    e->add_option("--agent", ev.agent, "agent file; omitted means the random agent");
    e->add_option("--pre-agent", ev.pre_agent, "pre-shielded agent for --post-opt");
    e->add_option("--mode", ev.mode, "pre, post or none");
    e->add_option("--policy,--correction", ev.policy, "uniform, agent-preference, min-cost or min-interventions");
    e->add_option("--episodes", ev.episodes, "evaluation episodes");
    e->add_option("--deterrence", ev.deterrence, "deterrence values for --sweep");
    e->add_option("--repetitions", ev.repetitions, "repetitions per deterrence for --sweep");
    e->add_option("--confidence", ev.confidence, "confidence of the safety bound");
    e->add_option("--out", ev.out, "report or CSV path");
    e->add_flag("--sweep", ev.sweep, "deterrence sweep CSV");
    e->add_flag("--post-opt", ev.post_opt, "post-shield correction comparison CSV");
  };
  auto* e = app.add_subcommand("evaluate", "run episodes and report safety and cost");
  add_evaluate(e);
  e->add_flag("--certify", ev.certify, "exit 6 on any violation");
  auto* c = app.add_subcommand("certify", "evaluate and exit 6 on any violation");
  add_evaluate(c);

  AccuracyArgs acc;
  auto* a = app.add_subcommand("accuracy", "fraction of sampled transitions the abstraction covers");
  add_common(a, acc.common, false);
  a->add_option("--gamma", acc.gammas, "granularities to test");
  a->add_option("--n", acc.ns, "supporting point counts to test");
  a->add_option("--samples", acc.samples, "sampled transitions per row");
  a->add_option("--out", acc.out, "CSV path");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-strategy-map", "CSV of allowed actions on a 2D slice");
  x->add_option("--shield", ex.shield, "shield file")->required();
  x->add_option("--fix", ex.fix, "one value per dimension; '*' leaves it free")->delimiter(',');
  x->add_option("--out", ex.out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) return run_synthesize(syn);
    if (*l) return run_learn(learn);
    if (*e) return run_evaluate(ev);
    if (*c) {
      ev.certify = true;
      return run_evaluate(ev);
    }
    if (*a) return run_accuracy(acc);
    if (*x) return run_export(ex);
  } catch (const CliError& err) {
    std::cerr << "gridshield: " << err.message << "\n";
    return err.code;
  } catch (const std::exception& err) {
    std::cerr << "gridshield: " << err.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
