#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridshield/actions.hpp"
#include "gridshield/partition.hpp"
#include "gridshield/rng.hpp"

namespace gridshield {

/// Relation of a cell box to the safe set.
enum class BoxClass { Inside, Outside, Straddles };

/// One scalar random draw consumed by a simulation step. `worst` is the
/// safety-pessimal value when the model knows one.
struct RandomDimension {
  std::string name;
  double lo = 0;
  double hi = 0;
  std::optional<double> worst;
};

/// Supplies the random draws of one step. Models pull draws by dimension
/// index; the source decides whether they are sampled, fixed or worst case.
class DrawSource {
 public:
  virtual ~DrawSource() = default;
  virtual double draw(std::size_t dim) = 0;
};

class RandomDraws final : public DrawSource {
 public:
  RandomDraws(Rng& rng, std::span<const RandomDimension> dims) : rng_(rng), dims_(dims) {}
  double draw(std::size_t dim) override { return uniform(rng_, dims_[dim].lo, dims_[dim].hi); }

 private:
  Rng& rng_;
  std::span<const RandomDimension> dims_;
};

/// Returns the same preset value every time a dimension is asked for.
class FixedDraws final : public DrawSource {
 public:
  explicit FixedDraws(std::span<const double> values) : values_(values) {}
  double draw(std::size_t dim) override { return values_[dim]; }

 private:
  std::span<const double> values_;
};

/// Wraps another source and remembers every value it handed out.
class RecordingDraws final : public DrawSource {
 public:
  explicit RecordingDraws(DrawSource& inner) : inner_(inner) {}
  double draw(std::size_t dim) override {
    double v = inner_.draw(dim);
    record_.emplace_back(dim, v);
    return v;
  }
  const std::vector<std::pair<std::size_t, double>>& record() const noexcept { return record_; }

 private:
  DrawSource& inner_;
  std::vector<std::pair<std::size_t, double>> record_;
};

/// Replays a recorded draw sequence in order.
class ReplayDraws final : public DrawSource {
 public:
  explicit ReplayDraws(std::span<const std::pair<std::size_t, double>> record) : record_(record) {}
  double draw(std::size_t) override { return record_[next_++].second; }

 private:
  std::span<const std::pair<std::size_t, double>> record_;
  std::size_t next_ = 0;
};

/// Simulation view of a hybrid MDP: one control period under an action, plus
/// the predicates and costs the learner and the shield need.
class EnvironmentModel {
 public:
  virtual ~EnvironmentModel() = default;

  virtual std::string name() const = 0;
  virtual std::vector<double> lower() const = 0;
  virtual std::vector<double> upper() const = 0;
  virtual std::vector<double> default_gamma() const = 0;
  virtual const std::vector<Action>& actions() const = 0;
  virtual double period() const = 0;
  virtual const std::vector<RandomDimension>& randomness() const = 0;

  /// Applies the action and simulates one period. Deterministic in (s, a, draws).
  virtual State step(const State& s, ActionId a, DrawSource& draws) const = 0;

  virtual bool is_unsafe(const State& s) const = 0;
  /// Three-valued evaluation of the safety property on a cell box.
  virtual BoxClass classify_safety(const CellBox& box) const = 0;
  virtual bool is_goal(const State& s, double elapsed) const = 0;
  /// Violation check used during episodes; may depend on elapsed time.
  virtual bool violates(const State& s, double /*elapsed*/) const { return is_unsafe(s); }
  virtual double cost(const State& s, ActionId a, const State& next) const = 0;
  virtual State initial_state(Rng& rng) const = 0;
  /// Step cap of one episode.
  virtual std::size_t horizon() const = 0;

  std::size_t dim() const { return lower().size(); }
  PartitionSpec default_partition() const { return PartitionSpec(lower(), upper(), default_gamma()); }
  PartitionSpec partition(std::vector<double> gamma) const {
    return PartitionSpec(lower(), upper(), std::move(gamma));
  }
  bool matches(const PartitionSpec& spec) const { return spec.lower() == lower() && spec.upper() == upper(); }
};

// ---------------------------------------------------------------------------
// Bouncing ball

namespace ball {

inline constexpr double kGravity = 9.81;

/// Ballistic flow for t time units: height and velocity.
std::pair<double, double> flow(double p, double v, double t, double g = kGravity) noexcept;

/// Nonnegative delay until the ball reaches the ground; 0 if it is on the
/// ground and not rising.
double bounce_time(double p, double v, double g = kGravity) noexcept;

}  // namespace ball

struct BouncingBallParams {
  std::vector<double> lower{0.0, -15.0};
  std::vector<double> upper{15.0, 15.0};
  std::vector<double> gamma{0.02, 0.02};
  double gravity = ball::kGravity;
  double period = 0.1;
  double damping_lo = -0.97;
  double damping_hi = -0.85;
  double hit_min_height = 4.0;
  double hit_velocity = -4.0;
  double hit_spread = 0.1;
  int max_bounces = 32;
  double dead_height = 0.01;
  double dead_speed = 1.0;
  double episode_seconds = 120.0;
  double hit_cost = 1.0;
  double death_penalty = 1000.0;
  double init_p_lo = 7.0;
  double init_p_hi = 10.0;
};

struct BallTrace {
  State state;
  double elapsed = 0;
  int bounces = 0;
  bool zeno = false;
};

/// State (p, v). Random dimensions: 0 = bounce damping factor, 1 = position
/// of the post-hit velocity inside its interval for a rising ball.
class BouncingBall final : public EnvironmentModel {
 public:
  static constexpr ActionId kNoHit = 0;
  static constexpr ActionId kHit = 1;

  explicit BouncingBall(BouncingBallParams params = {});

  std::string name() const override { return "bouncing_ball"; }
  std::vector<double> lower() const override { return params_.lower; }
  std::vector<double> upper() const override { return params_.upper; }
  std::vector<double> default_gamma() const override { return params_.gamma; }
  const std::vector<Action>& actions() const override { return actions_; }
  double period() const override { return params_.period; }
  const std::vector<RandomDimension>& randomness() const override { return random_; }

  State step(const State& s, ActionId a, DrawSource& draws) const override;
  bool is_unsafe(const State& s) const override;
  BoxClass classify_safety(const CellBox& box) const override;
  bool is_goal(const State& s, double elapsed) const override;
  double cost(const State& s, ActionId a, const State& next) const override;
  State initial_state(Rng& rng) const override;
  std::size_t horizon() const override;

  /// Instantaneous effect of the action, before the period elapses.
  State apply_action(const State& s, ActionId a, DrawSource& draws) const;
  /// Flow with bounces for one period, reporting consumed time.
  BallTrace simulate(const State& s, ActionId a, DrawSource& draws) const;

  const BouncingBallParams& params() const noexcept { return params_; }

 private:
  BouncingBallParams params_;
  std::vector<Action> actions_;
  std::vector<RandomDimension> random_;
};

// ---------------------------------------------------------------------------
// Random walk

struct RandomWalkParams {
  std::vector<double> lower{0.0, 0.0};
  std::vector<double> upper{1.3, 1.3};
  std::vector<double> gamma{0.05, 0.05};
  double slow_dx = 0.1;
  double slow_dt = 0.12;
  double fast_dx = 0.17;
  double fast_dt = 0.05;
  double epsilon = 0.04;
  double x_goal = 1.0;
  double t_limit = 1.0;
  double slow_cost = 1.0;
  double fast_cost = 3.0;
  double violation_penalty = 1000.0;
  std::size_t horizon = 100;
};

/// State (x, t). Random dimensions: 0 = x noise, 1 = t noise. Goal and
/// violating states are absorbing.
class RandomWalk final : public EnvironmentModel {
 public:
  static constexpr ActionId kSlow = 0;
  static constexpr ActionId kFast = 1;

  explicit RandomWalk(RandomWalkParams params = {});

  std::string name() const override { return "random_walk"; }
  std::vector<double> lower() const override { return params_.lower; }
  std::vector<double> upper() const override { return params_.upper; }
  std::vector<double> default_gamma() const override { return params_.gamma; }
  const std::vector<Action>& actions() const override { return actions_; }
  double period() const override { return 1.0; }
  const std::vector<RandomDimension>& randomness() const override { return random_; }

  State step(const State& s, ActionId a, DrawSource& draws) const override;
  bool is_unsafe(const State& s) const override;
  BoxClass classify_safety(const CellBox& box) const override;
  bool is_goal(const State& s, double elapsed) const override;
  double cost(const State& s, ActionId a, const State& next) const override;
  State initial_state(Rng&) const override { return State{0.0, 0.0}; }
  std::size_t horizon() const override { return params_.horizon; }

  bool is_terminal(const State& s) const;
  std::pair<double, double> drift(ActionId a) const;
  const RandomWalkParams& params() const noexcept { return params_; }

 private:
  RandomWalkParams params_;
  std::vector<Action> actions_;
  std::vector<RandomDimension> random_;
};

// ---------------------------------------------------------------------------
// Cruise control

struct CruiseControlParams {
  std::vector<double> lower{-10.0, -8.0, 0.0};
  std::vector<double> upper{20.5, 20.5, 200.5};
  std::vector<double> gamma{0.5, 0.5, 0.5};
  double ego_min = -10.0;
  double ego_max = 20.0;
  double front_min = -8.0;
  double front_max = 20.0;
  double sensor_range = 200.0;
  double period = 1.0;
  double acceleration = 2.0;
  int substeps = 100;
  double distance_weight = 1.0;
  double crash_penalty = 1000.0;
  double init_ego_velocity = 0.0;
  double init_front_velocity = 0.0;
  double init_distance = 10.0;
  std::size_t horizon = 120;
};

/// State (ego velocity, front velocity, distance). The front car picks its
/// acceleration at random each period; distance saturates at sensor range.
class CruiseControl final : public EnvironmentModel {
 public:
  static constexpr ActionId kBackwards = 0;
  static constexpr ActionId kNeutral = 1;
  static constexpr ActionId kForwards = 2;

  explicit CruiseControl(CruiseControlParams params = {});

  std::string name() const override { return "cruise_control"; }
  std::vector<double> lower() const override { return params_.lower; }
  std::vector<double> upper() const override { return params_.upper; }
  std::vector<double> default_gamma() const override { return params_.gamma; }
  const std::vector<Action>& actions() const override { return actions_; }
  double period() const override { return params_.period; }
  const std::vector<RandomDimension>& randomness() const override { return random_; }

  State step(const State& s, ActionId a, DrawSource& draws) const override;
  bool is_unsafe(const State& s) const override { return s[2] <= 0.0; }
  BoxClass classify_safety(const CellBox& box) const override;
  bool is_goal(const State&, double) const override { return false; }
  double cost(const State& s, ActionId a, const State& next) const override;
  State initial_state(Rng&) const override;
  std::size_t horizon() const override { return params_.horizon; }

  const CruiseControlParams& params() const noexcept { return params_; }

 private:
  double clamp_accel(double velocity, double accel, std::size_t dim) const;

  CruiseControlParams params_;
  std::vector<Action> actions_;
  std::vector<RandomDimension> random_;
};

// ---------------------------------------------------------------------------
// DC-DC boost converter

struct DcDcParams {
  std::vector<double> lower{0.0, 14.0, 30.0};
  std::vector<double> upper{4.0, 16.0, 73.0};
  std::vector<double> gamma{0.05, 0.02, 1.0};
  double input_voltage = 10.0;
  double reference_voltage = 15.0;
  double tolerance = 0.5;
  double inductance = 450e-6;
  double capacitance = 220e-6;
  double period = 1e-5;
  int substeps = 100;
  double load_drift = 0.05;
  double load_min = 30.0;
  double load_max = 72.0;
  double startup_grace = 0.0;
  double switch_cost = 0.5;
  double error_weight = 1.0;
  double violation_penalty = 1000.0;
  double init_current = 0.75;
  double init_voltage = 15.0;
  double init_load_lo = 30.0;
  double init_load_hi = 40.0;
  std::size_t horizon = 1200;
};

/// State (inductor current, output voltage, load resistance). Action on closes
/// the switch (inductor charges, capacitor feeds the load); off releases the
/// inductor into the output.
class DcDcConverter final : public EnvironmentModel {
 public:
  static constexpr ActionId kOff = 0;
  static constexpr ActionId kOn = 1;

  explicit DcDcConverter(DcDcParams params = {});

  std::string name() const override { return "dcdc"; }
  std::vector<double> lower() const override { return params_.lower; }
  std::vector<double> upper() const override { return params_.upper; }
  std::vector<double> default_gamma() const override { return params_.gamma; }
  const std::vector<Action>& actions() const override { return actions_; }
  double period() const override { return params_.period; }
  const std::vector<RandomDimension>& randomness() const override { return random_; }

  State step(const State& s, ActionId a, DrawSource& draws) const override;
  bool is_unsafe(const State& s) const override;
  BoxClass classify_safety(const CellBox& box) const override;
  bool is_goal(const State&, double) const override { return false; }
  bool violates(const State& s, double elapsed) const override;
  double cost(const State& s, ActionId a, const State& next) const override;
  State initial_state(Rng& rng) const override;
  std::size_t horizon() const override { return params_.horizon; }

  const DcDcParams& params() const noexcept { return params_; }

 private:
  DcDcParams params_;
  std::vector<Action> actions_;
  std::vector<RandomDimension> random_;
};

// ---------------------------------------------------------------------------
// Oil pump

struct OilPumpParams {
  std::vector<double> lower{0.0, 0.0, 0.0, 0.0};
  std::vector<double> upper{20.0, 30.0, 2.0, 2.2};
  std::vector<double> gamma{0.2, 0.1, 1.0, 0.2};
  double period = 0.2;
  int substeps = 100;
  double pump_rate = 2.2;
  double noise = 0.1;
  double volume_min = 4.9;
  double volume_max = 25.1;
  double off_latency = 2.0;
  double cycle = 20.0;
  /// Piecewise-constant consumption: (start time within cycle, rate).
  std::vector<std::pair<double, double>> consumption{
      {0.0, 0.0}, {2.0, 1.2}, {4.0, 0.0}, {8.0, 1.2}, {10.0, 2.5},
      {14.0, 1.7}, {16.0, 0.5}, {18.0, 0.0}};
  double volume_weight = 1.0;
  double violation_penalty = 1000.0;
  double init_volume = 10.0;
  std::size_t horizon = 600;
};

/// State (time within consumption cycle, volume, pump on flag, remaining
/// off-lock time). The flag is 0 or 1 so that cell [1, 2) means "on".
class OilPump final : public EnvironmentModel {
 public:
  static constexpr ActionId kOff = 0;
  static constexpr ActionId kOn = 1;

  explicit OilPump(OilPumpParams params = {});

  std::string name() const override { return "oil_pump"; }
  std::vector<double> lower() const override { return params_.lower; }
  std::vector<double> upper() const override { return params_.upper; }
  std::vector<double> default_gamma() const override { return params_.gamma; }
  const std::vector<Action>& actions() const override { return actions_; }
  double period() const override { return params_.period; }
  const std::vector<RandomDimension>& randomness() const override { return random_; }

  State step(const State& s, ActionId a, DrawSource& draws) const override;
  bool is_unsafe(const State& s) const override;
  BoxClass classify_safety(const CellBox& box) const override;
  bool is_goal(const State&, double) const override { return false; }
  double cost(const State& s, ActionId a, const State& next) const override;
  State initial_state(Rng&) const override;
  std::size_t horizon() const override { return params_.horizon; }

  double consumption_at(double cycle_time) const;
  const OilPumpParams& params() const noexcept { return params_; }

 private:
  OilPumpParams params_;
  std::vector<Action> actions_;
  std::vector<RandomDimension> random_;
};

}  // namespace gridshield
