#include "gridshield/config.hpp"

#include <nlohmann/json.hpp>

#include <set>

#include "gridshield/io.hpp"

namespace gridshield {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Reads fields present in a JSON object and rejects keys no field claimed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_error(where_ + " must be an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) config_error("unknown key '" + it.key() + "' in " + where_);
  }
  template <class T>
  void operator()(const char* key, T& field) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const json::exception&) {
      config_error("bad value for '" + std::string(key) + "' in " + where_);
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

class ObjectWriter {
 public:
  template <class T>
  void operator()(const char* key, const T& field) {
    j[key] = field;
  }
  json j = json::object();
};

template <class F>
void fields(BouncingBallParams& p, F&& f) {
  f("lower", p.lower), f("upper", p.upper), f("gamma", p.gamma), f("gravity", p.gravity), f("period", p.period);
  f("damping_lo", p.damping_lo), f("damping_hi", p.damping_hi), f("hit_min_height", p.hit_min_height);
  f("hit_velocity", p.hit_velocity), f("hit_spread", p.hit_spread), f("max_bounces", p.max_bounces);
  f("dead_height", p.dead_height), f("dead_speed", p.dead_speed), f("episode_seconds", p.episode_seconds);
  f("hit_cost", p.hit_cost), f("death_penalty", p.death_penalty), f("init_p_lo", p.init_p_lo);
  f("init_p_hi", p.init_p_hi);
}

template <class F>
void fields(RandomWalkParams& p, F&& f) {
  f("lower", p.lower), f("upper", p.upper), f("gamma", p.gamma), f("slow_dx", p.slow_dx), f("slow_dt", p.slow_dt);
  f("fast_dx", p.fast_dx), f("fast_dt", p.fast_dt), f("epsilon", p.epsilon), f("x_goal", p.x_goal);
  f("t_limit", p.t_limit), f("slow_cost", p.slow_cost), f("fast_cost", p.fast_cost);
  f("violation_penalty", p.violation_penalty), f("horizon", p.horizon);
}

template <class F>
void fields(CruiseControlParams& p, F&& f) {
  f("lower", p.lower), f("upper", p.upper), f("gamma", p.gamma), f("ego_min", p.ego_min), f("ego_max", p.ego_max);
  f("front_min", p.front_min), f("front_max", p.front_max), f("sensor_range", p.sensor_range);
  f("period", p.period), f("acceleration", p.acceleration), f("substeps", p.substeps);
  f("distance_weight", p.distance_weight), f("crash_penalty", p.crash_penalty);
  f("init_ego_velocity", p.init_ego_velocity), f("init_front_velocity", p.init_front_velocity);
  f("init_distance", p.init_distance), f("horizon", p.horizon);
}

template <class F>
void fields(DcDcParams& p, F&& f) {
  f("lower", p.lower), f("upper", p.upper), f("gamma", p.gamma), f("input_voltage", p.input_voltage);
  f("reference_voltage", p.reference_voltage), f("tolerance", p.tolerance), f("inductance", p.inductance);
  f("capacitance", p.capacitance), f("period", p.period), f("substeps", p.substeps), f("load_drift", p.load_drift);
  f("load_min", p.load_min), f("load_max", p.load_max), f("startup_grace", p.startup_grace);
  f("switch_cost", p.switch_cost), f("error_weight", p.error_weight), f("violation_penalty", p.violation_penalty);
  f("init_current", p.init_current), f("init_voltage", p.init_voltage), f("init_load_lo", p.init_load_lo);
  f("init_load_hi", p.init_load_hi), f("horizon", p.horizon);
}

template <class F>
void fields(OilPumpParams& p, F&& f) {
  f("lower", p.lower), f("upper", p.upper), f("gamma", p.gamma), f("period", p.period), f("substeps", p.substeps);
  f("pump_rate", p.pump_rate), f("noise", p.noise), f("volume_min", p.volume_min), f("volume_max", p.volume_max);
  f("off_latency", p.off_latency), f("cycle", p.cycle), f("consumption", p.consumption);
  f("volume_weight", p.volume_weight), f("violation_penalty", p.violation_penalty), f("init_volume", p.init_volume);
  f("horizon", p.horizon);
}

template <class F>
void fields(LearnConfig& c, F&& f) {
  f("episodes", c.episodes), f("max_steps", c.max_steps), f("alpha_decay", c.alpha_decay);
  f("epsilon_start", c.epsilon_start), f("epsilon_end", c.epsilon_end);
  f("epsilon_decay_fraction", c.epsilon_decay_fraction), f("discount", c.discount), f("deterrence", c.deterrence);
  f("initial_value", c.initial_value), f("seed", c.seed);
}

template <class F>
void fields(EvaluateConfig& c, F&& f) {
  f("episodes", c.episodes), f("confidence", c.confidence), f("correction", c.correction);
  f("deterrences", c.deterrences), f("repetitions", c.repetitions), f("trace_episodes", c.trace_episodes);
  f("secondary_episodes", c.secondary_episodes);
}

template <class F>
void fields(AccuracyConfig& c, F&& f) {
  f("samples", c.samples), f("gammas", c.gammas), f("ns", c.ns);
}

template <class T>
json write_object(const T& value) {
  ObjectWriter w;
  fields(const_cast<T&>(value), w);
  return w.j;
}

template <class T>
void read_object(const json& j, T& value, const std::string& where) {
  ObjectReader r(j, where);
  fields(value, r);
}

const char* randomness_name(RandomnessPolicy p) { return p == RandomnessPolicy::WorstCase ? "worst_case" : "sampled_grid"; }

ModelParams default_params(const std::string& model) {
  if (model == "bouncing_ball") return BouncingBallParams{};
  if (model == "random_walk") return RandomWalkParams{};
  if (model == "cruise_control") return CruiseControlParams{};
  if (model == "dcdc") return DcDcParams{};
  if (model == "oil_pump") return OilPumpParams{};
  config_error("unknown model '" + model + "'");
}

}  // namespace

std::vector<double>& RunConfig::gamma() {
  return std::visit([](auto& p) -> std::vector<double>& { return p.gamma; }, params);
}

const std::vector<double>& RunConfig::gamma() const {
  return std::visit([](const auto& p) -> const std::vector<double>& { return p.gamma; }, params);
}

void RunConfig::set_gamma(const std::vector<double>& g) {
  auto& target = gamma();
  if (g.size() == 1)
    target.assign(target.size(), g[0]);
  else if (g.size() == target.size())
    target = g;
  else
    config_error("gamma needs 1 or " + std::to_string(target.size()) + " values for model " + model);
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"bouncing_ball", "random_walk", "cruise_control", "dcdc", "oil_pump"};
  return names;
}

RunConfig default_config(const std::string& model) {
  RunConfig c;
  c.model = model;
  c.params = default_params(model);
  return c;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    ObjectReader r(j, "config");
    std::string model = "bouncing_ball";
    r("model", model);
    c = default_config(model);
    if (const json* p = r.child("params"))
      std::visit([&](auto& params) { read_object(*p, params, "params"); }, c.params);
    if (const json* s = r.child("scheme")) {
      ObjectReader sr(*s, "scheme");
      std::string randomness = randomness_name(c.scheme.randomness);
      sr("n", c.scheme.n);
      sr("m", c.scheme.m);
      sr("randomness", randomness);
      if (randomness == "worst_case")
        c.scheme.randomness = RandomnessPolicy::WorstCase;
      else if (randomness == "sampled_grid")
        c.scheme.randomness = RandomnessPolicy::SampledGrid;
      else
        config_error("scheme.randomness must be worst_case or sampled_grid");
    }
    std::string oob = "forbid", fallback = "passthrough";
    r("oob_policy", oob);
    r("fallback", fallback);
    if (oob != "forbid" && oob != "allow_all") config_error("oob_policy must be forbid or allow_all");
    if (fallback != "passthrough" && fallback != "abort") config_error("fallback must be passthrough or abort");
    c.oob = oob == "forbid" ? OobPolicy::Forbid : OobPolicy::AllowAll;
    c.fallback = fallback == "passthrough" ? Fallback::Passthrough : Fallback::Abort;
    if (const json* l = r.child("learn")) read_object(*l, c.learn, "learn");
    if (const json* e = r.child("evaluate")) read_object(*e, c.evaluate, "evaluate");
    if (const json* a = r.child("accuracy")) read_object(*a, c.accuracy, "accuracy");
    r("seed", c.seed);
    r("memory_budget_mb", c.memory_budget_mb);
    r("workers", c.workers);
    r("cache_dir", c.cache_dir);
  }
  if (c.scheme.n < 1 || c.scheme.m < 1) config_error("scheme.n and scheme.m must be >= 1");
  if (!parse_correction(c.evaluate.correction)) config_error("unknown correction policy '" + c.evaluate.correction + "'");
  if (!(c.evaluate.confidence > 0 && c.evaluate.confidence < 1)) config_error("evaluate.confidence must lie in (0, 1)");
  if (c.memory_budget_mb == 0) config_error("memory_budget_mb must be positive");
  c.learn.validate();
  make_model(c);  // validates parameters
  return c;
}

std::string dump_config(const RunConfig& c, bool with_runtime) {
  json j;
  j["model"] = c.model;
  j["params"] = std::visit([](const auto& p) { return write_object(p); }, c.params);
  j["scheme"] = {{"n", c.scheme.n}, {"m", c.scheme.m}, {"randomness", randomness_name(c.scheme.randomness)}};
  j["oob_policy"] = c.oob == OobPolicy::Forbid ? "forbid" : "allow_all";
  j["fallback"] = c.fallback == Fallback::Passthrough ? "passthrough" : "abort";
  j["learn"] = write_object(c.learn);
  j["evaluate"] = write_object(c.evaluate);
  j["accuracy"] = write_object(c.accuracy);
  j["seed"] = c.seed;
  j["memory_budget_mb"] = c.memory_budget_mb;
  if (with_runtime) {
    j["workers"] = c.workers;
    j["cache_dir"] = c.cache_dir;
  }
  return j.dump(2);
}

std::uint64_t config_digest(const RunConfig& config) { return fnv1a64(dump_config(config, false)); }

std::uint64_t transitions_digest(const RunConfig& c) {
  json j;
  j["model"] = c.model;
  j["params"] = std::visit([](const auto& p) { return write_object(p); }, c.params);
  j["scheme"] = {{"n", c.scheme.n}, {"m", c.scheme.m}, {"randomness", randomness_name(c.scheme.randomness)}};
  return fnv1a64(j.dump());
}

std::unique_ptr<EnvironmentModel> make_model(const RunConfig& c) {
  return std::visit(
      [](const auto& p) -> std::unique_ptr<EnvironmentModel> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BouncingBallParams>) return std::make_unique<BouncingBall>(p);
        if constexpr (std::is_same_v<P, RandomWalkParams>) return std::make_unique<RandomWalk>(p);
        if constexpr (std::is_same_v<P, CruiseControlParams>) return std::make_unique<CruiseControl>(p);
        if constexpr (std::is_same_v<P, DcDcParams>) return std::make_unique<DcDcConverter>(p);
        if constexpr (std::is_same_v<P, OilPumpParams>) return std::make_unique<OilPump>(p);
      },
      c.params);
}

}  // namespace gridshield
