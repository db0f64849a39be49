#include "gridshield/models.hpp"

#include <algorithm>
#include <cmath>

namespace gridshield {

namespace {

// Classic RK4 over `substeps` equal slices of [t0, t0 + span]. `deriv` is
// called as deriv(t, x, dx) and `project` may clamp after every slice.
template <class Deriv, class Project>
State integrate_rk4(State x, double t0, double span, int substeps, Deriv&& deriv, Project&& project) {
  const std::size_t k = x.size();
  const double h = span / substeps;
  State k1(k), k2(k), k3(k), k4(k), tmp(k);
  for (int i = 0; i < substeps; ++i) {
    const double t = t0 + h * i;
    deriv(t, x, k1);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = x[d] + 0.5 * h * k1[d];
    deriv(t + 0.5 * h, tmp, k2);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = x[d] + 0.5 * h * k2[d];
    deriv(t + 0.5 * h, tmp, k3);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = x[d] + h * k3[d];
    deriv(t + h, tmp, k4);
    for (std::size_t d = 0; d < k; ++d) x[d] += h / 6.0 * (k1[d] + 2 * k2[d] + 2 * k3[d] + k4[d]);
    project(x);
  }
  return x;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ConfigError, what);
}

void require_bounds(const std::vector<double>& lower, const std::vector<double>& upper,
                    const std::vector<double>& gamma, std::size_t dim) {
  require(lower.size() == dim && upper.size() == dim && gamma.size() == dim,
          "model bounds and granularity must match the state dimension");
  for (std::size_t d = 0; d < dim; ++d) require(lower[d] < upper[d] && gamma[d] > 0, "invalid model bounds");
}

// Relation of [lo, hi) to the closed interval [a, b] (a <= b):
// whether they intersect, and whether [lo, hi) lies inside it.
bool half_open_meets_closed(double lo, double hi, double a, double b) { return lo <= b && hi > a; }
bool half_open_within_closed(double lo, double hi, double a, double b) { return lo >= a && hi <= b; }

}  // namespace

// ---------------------------------------------------------------------------
// Bouncing ball

namespace ball {

std::pair<double, double> flow(double p, double v, double t, double g) noexcept {
  return {-0.5 * g * t * t + v * t + p, -g * t + v};
}

double bounce_time(double p, double v, double g) noexcept {
  if (p <= 0 && v <= 0) return 0.0;
  const double root = std::sqrt(v * v + 2 * g * p);
  // (v + root) / g cancels badly for falling balls; use the conjugate form.
  if (v >= 0) return (v + root) / g;
  return 2 * p / (root - v);
}

}  // namespace ball

BouncingBall::BouncingBall(BouncingBallParams params) : params_(std::move(params)) {
  require_bounds(params_.lower, params_.upper, params_.gamma, 2);
  require(params_.period > 0 && params_.gravity > 0, "bouncing ball period and gravity must be positive");
  require(params_.damping_lo <= params_.damping_hi && params_.damping_hi < 0 && params_.damping_lo > -1,
          "bounce damping must lie in (-1, 0)");
  require(params_.max_bounces > 0, "max_bounces must be positive");
  actions_ = {{kNoHit, "nohit"}, {kHit, "hit"}};
  // Worst case for the bounce is maximal energy loss. The post-hit velocity
  // has no single pessimal value, so it gets none.
  random_ = {{"damping", params_.damping_lo, params_.damping_hi, params_.damping_hi},
             {"hit_spread", 0.0, 1.0, std::nullopt}};
}

State BouncingBall::apply_action(const State& s, ActionId a, DrawSource& draws) const {
  if (a != kHit || s[0] < params_.hit_min_height) return s;
  State out = s;
  const double v = s[1];
  if (v > 0) {
    // Uniform in [-v + hit_velocity, -(1 - spread) v + hit_velocity].
    out[1] = -v + params_.hit_velocity + draws.draw(1) * params_.hit_spread * v;
  } else if (v >= params_.hit_velocity) {
    out[1] = params_.hit_velocity;
  }
  return out;
}

BallTrace BouncingBall::simulate(const State& s, ActionId a, DrawSource& draws) const {
  const State kicked = apply_action(s, a, draws);
  const double g = params_.gravity;
  double p = std::max(kicked[0], 0.0);
  double v = kicked[1];
  double remaining = params_.period;
  BallTrace trace;
  while (true) {
    const double hit = ball::bounce_time(p, v, g);
    if (hit > remaining) {
      std::tie(p, v) = ball::flow(p, v, remaining, g);
      trace.elapsed += remaining;
      break;
    }
    v = ball::flow(p, v, hit, g).second;
    p = 0;
    trace.elapsed += hit;
    remaining -= hit;
    v *= draws.draw(0);
    if (++trace.bounces > params_.max_bounces) {
      p = 0;
      v = 0;
      trace.zeno = true;
      trace.elapsed += remaining;
      break;
    }
  }
  trace.state = State{std::max(p, 0.0), v};
  return trace;
}

State BouncingBall::step(const State& s, ActionId a, DrawSource& draws) const {
  return simulate(s, a, draws).state;
}

bool BouncingBall::is_unsafe(const State& s) const {
  return s[0] <= params_.dead_height && std::abs(s[1]) <= params_.dead_speed;
}

BoxClass BouncingBall::classify_safety(const CellBox& box) const {
  const double h = params_.dead_height, w = params_.dead_speed;
  const bool meets = box.low[0] <= h && half_open_meets_closed(box.low[1], box.high[1], -w, w);
  if (!meets) return BoxClass::Inside;
  const bool within = box.high[0] <= h && half_open_within_closed(box.low[1], box.high[1], -w, w);
  return within ? BoxClass::Outside : BoxClass::Straddles;
}

bool BouncingBall::is_goal(const State& s, double elapsed) const {
  return elapsed >= params_.episode_seconds - 1e-9 || is_unsafe(s);
}

double BouncingBall::cost(const State&, ActionId a, const State& next) const {
  double c = (a == kHit) ? params_.hit_cost : 0.0;
  if (is_unsafe(next)) c += params_.death_penalty;
  return c;
}

State BouncingBall::initial_state(Rng& rng) const {
  return State{uniform(rng, params_.init_p_lo, params_.init_p_hi), 0.0};
}

std::size_t BouncingBall::horizon() const {
  return static_cast<std::size_t>(std::llround(params_.episode_seconds / params_.period));
}

// ---------------------------------------------------------------------------
// Random walk

RandomWalk::RandomWalk(RandomWalkParams params) : params_(std::move(params)) {
  require_bounds(params_.lower, params_.upper, params_.gamma, 2);
  require(params_.epsilon >= 0, "random walk epsilon must be nonnegative");
  require(params_.horizon > 0, "random walk horizon must be positive");
  actions_ = {{kSlow, "slow"}, {kFast, "fast"}};
  const double e = params_.epsilon;
  // Least progress in x, most elapsed time.
  random_ = {{"x_noise", -e, e, -e}, {"t_noise", -e, e, e}};
}

std::pair<double, double> RandomWalk::drift(ActionId a) const {
  return a == kFast ? std::pair{params_.fast_dx, params_.fast_dt} : std::pair{params_.slow_dx, params_.slow_dt};
}

bool RandomWalk::is_terminal(const State& s) const {
  return s[0] >= params_.x_goal || s[1] >= params_.t_limit;
}

State RandomWalk::step(const State& s, ActionId a, DrawSource& draws) const {
  if (is_terminal(s)) return s;
  const auto [dx, dt] = drift(a);
  const double nx = draws.draw(0);
  const double nt = draws.draw(1);
  return State{s[0] + dx + nx, s[1] + dt + nt};
}

bool RandomWalk::is_unsafe(const State& s) const {
  return s[1] >= params_.t_limit && s[0] < params_.x_goal;
}

BoxClass RandomWalk::classify_safety(const CellBox& box) const {
  const bool meets = box.high[1] > params_.t_limit && box.low[0] < params_.x_goal;
  if (!meets) return BoxClass::Inside;
  const bool within = box.low[1] >= params_.t_limit && box.high[0] <= params_.x_goal;
  return within ? BoxClass::Outside : BoxClass::Straddles;
}

bool RandomWalk::is_goal(const State& s, double) const { return s[0] >= params_.x_goal; }

double RandomWalk::cost(const State&, ActionId a, const State& next) const {
  double c = (a == kFast) ? params_.fast_cost : params_.slow_cost;
  if (is_unsafe(next)) c += params_.violation_penalty;
  return c;
}

// ---------------------------------------------------------------------------
// Cruise control

CruiseControl::CruiseControl(CruiseControlParams params) : params_(std::move(params)) {
  require_bounds(params_.lower, params_.upper, params_.gamma, 3);
  require(params_.period > 0 && params_.acceleration > 0 && params_.substeps > 0,
          "cruise control rates must be positive");
  require(params_.ego_min < params_.ego_max && params_.front_min < params_.front_max,
          "cruise control velocity limits are inverted");
  require(params_.sensor_range > 0 && params_.sensor_range < params_.upper[2],
          "sensor range must lie inside the distance bounds");
  actions_ = {{kBackwards, "backwards"}, {kNeutral, "neutral"}, {kForwards, "forwards"}};
  // Front car choice in [0, 3): floor gives decelerate / keep / accelerate.
  random_ = {{"front_choice", 0.0, 3.0, std::nullopt}};
}

double CruiseControl::clamp_accel(double velocity, double accel, std::size_t dim) const {
  const double lo = dim == 0 ? params_.ego_min : params_.front_min;
  const double hi = dim == 0 ? params_.ego_max : params_.front_max;
  const double next = velocity + accel * params_.period;
  return (next > hi + 1e-9 || next < lo - 1e-9) ? 0.0 : accel;
}

State CruiseControl::step(const State& s, ActionId a, DrawSource& draws) const {
  const double acc = params_.acceleration;
  double ego_acc = a == kBackwards ? -acc : (a == kForwards ? acc : 0.0);
  const int choice = std::clamp(static_cast<int>(std::floor(draws.draw(0))), 0, 2);
  double front_acc = (choice - 1) * acc;
  ego_acc = clamp_accel(s[0], ego_acc, 0);
  front_acc = clamp_accel(s[1], front_acc, 1);
  State next = integrate_rk4(
      s, 0.0, params_.period, params_.substeps,
      [&](double, const State& x, State& dx) {
        dx[0] = ego_acc;
        dx[1] = front_acc;
        dx[2] = x[1] - x[0];
      },
      [](State&) {});
  next[2] = std::min(next[2], params_.sensor_range);
  return next;
}

BoxClass CruiseControl::classify_safety(const CellBox& box) const {
  if (box.low[2] > 0) return BoxClass::Inside;
  return box.high[2] <= 0 ? BoxClass::Outside : BoxClass::Straddles;
}

double CruiseControl::cost(const State&, ActionId, const State& next) const {
  double c = params_.distance_weight * std::max(next[2], 0.0);
  if (is_unsafe(next)) c += params_.crash_penalty;
  return c;
}

State CruiseControl::initial_state(Rng&) const {
  return State{params_.init_ego_velocity, params_.init_front_velocity, params_.init_distance};
}

// ---------------------------------------------------------------------------
// DC-DC boost converter

DcDcConverter::DcDcConverter(DcDcParams params) : params_(std::move(params)) {
  require_bounds(params_.lower, params_.upper, params_.gamma, 3);
  require(params_.inductance > 0 && params_.capacitance > 0 && params_.period > 0 && params_.substeps > 0,
          "DC-DC converter rates must be positive");
  require(params_.input_voltage > 0 && params_.tolerance > 0, "DC-DC voltages must be positive");
  require(params_.load_min > 0 && params_.load_min <= params_.load_max, "DC-DC load bounds are inverted");
  actions_ = {{kOff, "off"}, {kOn, "on"}};
  random_ = {{"load_drift", -params_.load_drift, params_.load_drift, std::nullopt}};
}

State DcDcConverter::step(const State& s, ActionId a, DrawSource& draws) const {
  const double vin = params_.input_voltage, l = params_.inductance, c = params_.capacitance;
  const double r = s[2];
  const bool on = a == kOn;
  State next = integrate_rk4(
      s, 0.0, params_.period, params_.substeps,
      [&](double, const State& x, State& dx) {
        if (on) {
          dx[0] = vin / l;
          dx[1] = -x[1] / (r * c);
        } else {
          // The diode blocks reverse current.
          const double current = std::max(x[0], 0.0);
          dx[0] = current > 0 || vin > x[1] ? (vin - x[1]) / l : 0.0;
          dx[1] = (current - x[1] / r) / c;
        }
        dx[2] = 0;
      },
      [](State& x) { x[0] = std::max(x[0], 0.0); });
  next[2] = std::clamp(r + draws.draw(0), params_.load_min, params_.load_max);
  return next;
}

bool DcDcConverter::is_unsafe(const State& s) const {
  return std::abs(s[1] - params_.reference_voltage) > params_.tolerance;
}

BoxClass DcDcConverter::classify_safety(const CellBox& box) const {
  const double a = params_.reference_voltage - params_.tolerance;
  const double b = params_.reference_voltage + params_.tolerance;
  if (half_open_within_closed(box.low[1], box.high[1], a, b)) return BoxClass::Inside;
  if (!half_open_meets_closed(box.low[1], box.high[1], a, b)) return BoxClass::Outside;
  return BoxClass::Straddles;
}

bool DcDcConverter::violates(const State& s, double elapsed) const {
  return elapsed >= params_.startup_grace && is_unsafe(s);
}

double DcDcConverter::cost(const State&, ActionId a, const State& next) const {
  double c = params_.error_weight * std::abs(next[1] - params_.reference_voltage);
  if (a == kOn) c += params_.switch_cost;
  if (is_unsafe(next)) c += params_.violation_penalty;
  return c;
}

State DcDcConverter::initial_state(Rng& rng) const {
  return State{params_.init_current, params_.init_voltage,
               uniform(rng, params_.init_load_lo, params_.init_load_hi)};
}

// ---------------------------------------------------------------------------
// Oil pump

OilPump::OilPump(OilPumpParams params) : params_(std::move(params)) {
  require_bounds(params_.lower, params_.upper, params_.gamma, 4);
  require(params_.pump_rate > 0 && params_.period > 0 && params_.cycle > 0 && params_.substeps > 0,
          "oil pump rates must be positive");
  require(params_.noise >= 0 && params_.off_latency >= 0, "oil pump noise and latency must be nonnegative");
  require(params_.volume_min < params_.volume_max, "oil pump volume bounds are inverted");
  require(!params_.consumption.empty() && params_.consumption.front().first == 0.0,
          "consumption pattern must start at time 0");
  for (const auto& [t, rate] : params_.consumption) require(rate >= 0, "consumption rates must be nonnegative");
  actions_ = {{kOff, "off"}, {kOn, "on"}};
  random_ = {{"consumption_noise", -params_.noise, params_.noise, std::nullopt}};
}

double OilPump::consumption_at(double cycle_time) const {
  double t = std::fmod(cycle_time, params_.cycle);
  if (t < 0) t += params_.cycle;
  double rate = params_.consumption.front().second;
  for (const auto& [start, r] : params_.consumption) {
    if (start <= t + 1e-12) rate = r;
    else break;
  }
  return rate;
}

State OilPump::step(const State& s, ActionId a, DrawSource& draws) const {
  bool on = s[2] >= 1.0;
  double lock = s[3];
  if (a == kOn && !on && lock <= 1e-9) on = true;
  if (a == kOff && on) {
    on = false;
    lock = params_.off_latency;
  }
  const double noise = draws.draw(0);
  const double pump = on ? params_.pump_rate : 0.0;
  const double t0 = s[0];
  State volume{s[1]};
  volume = integrate_rk4(
      volume, t0, params_.period, params_.substeps,
      [&](double t, const State&, State& dx) {
        const double base = consumption_at(t);
        dx[0] = pump - (base > 0 ? std::max(base + noise, 0.0) : 0.0);
      },
      [](State&) {});
  double t1 = std::fmod(t0 + params_.period, params_.cycle);
  if (params_.cycle - t1 < 1e-9) t1 = 0.0;
  lock = lock - params_.period;
  if (lock < 1e-9) lock = 0.0;
  return State{t1, volume[0], on ? 1.0 : 0.0, lock};
}

bool OilPump::is_unsafe(const State& s) const {
  return s[1] < params_.volume_min || s[1] > params_.volume_max;
}

BoxClass OilPump::classify_safety(const CellBox& box) const {
  const double a = params_.volume_min, b = params_.volume_max;
  if (half_open_within_closed(box.low[1], box.high[1], a, b)) return BoxClass::Inside;
  if (!half_open_meets_closed(box.low[1], box.high[1], a, b)) return BoxClass::Outside;
  return BoxClass::Straddles;
}

double OilPump::cost(const State&, ActionId, const State& next) const {
  double c = params_.volume_weight * next[1] * params_.period;
  if (is_unsafe(next)) c += params_.violation_penalty;
  return c;
}

State OilPump::initial_state(Rng&) const { return State{0.0, params_.init_volume, 0.0, 0.0}; }

}  // namespace gridshield
