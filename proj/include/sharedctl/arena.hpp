#pragma once

// A deterministic fixed-timestep car-ball arena. Cars are planar bodies with a
// heading and a signed speed; the ball moves on the plane and carries a
// height scalar that jump hits can raise. The only input path is one
// VirtualControllerState per car, read through the default game mapping.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sharedctl/arbitrator.hpp"
#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"
#include "sharedctl/protocol.hpp"

namespace sharedctl {

inline constexpr int kTickRate = 120;

struct ArenaConfig {
  // Field geometry, world units. Team 0 defends y = -half_length.
  double field_half_length = 5120.0;
  double field_half_width = 4096.0;
  double goal_half_width = 893.0;

  int tick_rate = kTickRate;
  double match_seconds = 300.0;
  bool golden_goal = false;

  // Cars
  double car_radius = 60.0;
  double car_acceleration = 1600.0;
  double brake_deceleration = 3500.0;
  double boost_thrust = 991.7;
  double max_speed = 2300.0;
  double max_reverse_speed = 1000.0;
  double car_friction = 525.0;
  double turn_rate = 2.6;               // rad/s at full steer and reference speed
  double turn_reference_speed = 500.0;  // speed at which the full turn rate applies
  double handbrake_turn_multiplier = 2.0;
  double handbrake_grip = 0.5;  // fraction of throttle force kept under handbrake
  double jump_air_seconds = 0.25;
  double jump_reach = 60.0;

  // Ball
  double ball_radius = 92.75;
  double ball_friction = 230.0;
  double ball_restitution = 0.6;
  double gravity = 650.0;
  double hit_height = 200.0;  // cars cannot touch a ball above this height
  double jump_hit_strength = 800.0;

  // Boost
  double boost_capacity = 100.0;
  double boost_drain = 33.3;  // per second
  double initial_boost = 33.3;
  double pad_recharge = 25.0;
  double pad_respawn_seconds = 10.0;
  double pad_radius = 160.0;

  int cars_per_team = 1;
  std::uint64_t seed = 0;

  double dt() const { return 1.0 / tick_rate; }
  std::uint64_t match_ticks() const {
    return static_cast<std::uint64_t>(std::llround(match_seconds * tick_rate));
  }
  int jump_air_ticks() const { return static_cast<int>(std::lround(jump_air_seconds * tick_rate)); }
  int pad_respawn_ticks() const {
    return static_cast<int>(std::lround(pad_respawn_seconds * tick_rate));
  }

  void validate() const {
    if (tick_rate != kTickRate) throw ConfigError("arena tick rate is fixed at 120");
    const std::array<std::pair<const char*, double>, 31> positive = {{
        {"field_half_length", field_half_length},
        {"field_half_width", field_half_width},
        {"goal_half_width", goal_half_width},
        {"match_seconds", match_seconds},
        {"car_radius", car_radius},
        {"car_acceleration", car_acceleration},
        {"brake_deceleration", brake_deceleration},
        {"boost_thrust", boost_thrust},
        {"max_speed", max_speed},
        {"max_reverse_speed", max_reverse_speed},
        {"car_friction", car_friction},
        {"turn_rate", turn_rate},
        {"turn_reference_speed", turn_reference_speed},
        {"handbrake_turn_multiplier", handbrake_turn_multiplier},
        {"handbrake_grip", handbrake_grip},
        {"jump_air_seconds", jump_air_seconds},
        {"jump_reach", jump_reach},
        {"ball_radius", ball_radius},
        {"ball_friction", ball_friction},
        {"ball_restitution", ball_restitution},
        {"gravity", gravity},
        {"hit_height", hit_height},
        {"jump_hit_strength", jump_hit_strength},
        {"boost_capacity", boost_capacity},
        {"boost_drain", boost_drain},
        {"initial_boost", initial_boost},
        {"pad_recharge", pad_recharge},
        {"pad_respawn_seconds", pad_respawn_seconds},
        {"pad_radius", pad_radius},
        {"cars_per_team", static_cast<double>(cars_per_team)},
        {"tick_rate", static_cast<double>(tick_rate)},
    }};
    for (const auto& [name, v] : positive) {
      if (!(std::isfinite(v) && v > 0.0)) {
        throw ConfigError(std::string("arena constant '") + name + "' must be strictly positive");
      }
    }
    if (goal_half_width >= field_half_width) throw ConfigError("goal wider than the field");
    if (initial_boost > boost_capacity) throw ConfigError("initial boost exceeds capacity");
  }
};

enum class Phase { Kickoff, Play, GoalScored, Ended };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Kickoff: return "kickoff";
    case Phase::Play: return "play";
    case Phase::GoalScored: return "goal_scored";
    case Phase::Ended: return "ended";
  }
  return "?";
}

struct BallBody {
  double x = 0.0, y = 0.0, z = 0.0;
  double vx = 0.0, vy = 0.0, vz = 0.0;

  double planar_speed() const { return std::hypot(vx, vy); }
  friend bool operator==(const BallBody&, const BallBody&) = default;
};

struct CarBody {
  int team = 0;
  bool is_bot = false;
  double x = 0.0, y = 0.0;
  double heading = 0.0;  // radians, counter-clockwise from +x
  double speed = 0.0;    // signed, along heading
  double boost = 0.0;
  int airborne_ticks = 0;
  bool jump_held = false;

  friend bool operator==(const CarBody&, const CarBody&) = default;
};

struct PadBody {
  double x = 0.0, y = 0.0;
  int respawn_ticks = 0;  // 0 while active

  friend bool operator==(const PadBody&, const PadBody&) = default;
};

struct SimWorld {
  std::uint64_t tick = 0;
  Phase phase = Phase::Kickoff;
  bool overtime = false;
  BallBody ball;
  std::vector<CarBody> cars;
  std::vector<PadBody> pads;
  std::array<int, 2> scores{0, 0};
  std::mt19937_64 rng;

  friend bool operator==(const SimWorld&, const SimWorld&) = default;
};

// Controls decoded from a controller through the default game mapping.
struct CarControls {
  double steer = 0.0;
  double accelerate = 0.0;
  double brake = 0.0;
  bool jump = false;
  bool boost = false;
  bool handbrake = false;
};

inline CarControls decode_controls(const VirtualControllerState& c) {
  return {c.get("LeftStick").x,  c.get("RightTrigger").x, c.get("LeftTrigger").x,
          c.get("A").x != 0.0,   c.get("B").x != 0.0,     c.get("X").x != 0.0};
}

// Team-0 kickoff spawns; team 1 spawns are the 180-degree rotation.
inline constexpr std::array<std::array<double, 2>, 5> kKickoffSpawns = {{
    {-2048.0, -2560.0},
    {2048.0, -2560.0},
    {-256.0, -3840.0},
    {256.0, -3840.0},
    {0.0, -4608.0},
}};

inline std::vector<PadBody> default_pads() {
  return {{-3072.0, -4096.0}, {3072.0, -4096.0}, {-3584.0, 0.0},
          {3584.0, 0.0},      {-3072.0, 4096.0}, {3072.0, 4096.0}};
}

// Fresh world in Kickoff phase; the first step performs the kickoff reset.
inline SimWorld make_world(const ArenaConfig& config) {
  config.validate();
  SimWorld w;
  w.rng.seed(config.seed);
  for (int team = 0; team < 2; ++team) {
    for (int k = 0; k < config.cars_per_team; ++k) {
      CarBody c;
      c.team = team;
      c.boost = config.initial_boost;
      w.cars.push_back(c);
    }
  }
  w.pads = default_pads();
  return w;
}

inline SimWorld reset_kickoff(SimWorld world, const ArenaConfig& config) {
  if (world.phase != Phase::Kickoff && world.phase != Phase::GoalScored) {
    throw DomainError("kickoff reset outside kickoff or goal phase");
  }
  world.ball = {};
  const auto variant = static_cast<std::size_t>(world.rng() % kKickoffSpawns.size());
  std::array<int, 2> seen{0, 0};
  for (auto& car : world.cars) {
    const auto slot = (variant + static_cast<std::size_t>(seen[car.team]++)) % kKickoffSpawns.size();
    const auto& spawn = kKickoffSpawns[slot];
    const double sign = car.team == 0 ? 1.0 : -1.0;
    car.x = sign * spawn[0];
    car.y = sign * spawn[1];
    car.heading = std::atan2(-car.y, -car.x);
    car.speed = 0.0;
    car.boost = config.initial_boost;
    car.airborne_ticks = 0;
    car.jump_held = false;
  }
  for (auto& pad : world.pads) pad.respawn_ticks = 0;
  world.phase = Phase::Play;
  return world;
}

// Fuel after one tick: drain while boosting, refill on pickup, clamped.
inline double next_fuel(double fuel, bool boosting, bool pickup, const ArenaConfig& config) {
  const double drained = fuel - (boosting ? config.boost_drain * config.dt() : 0.0) +
                         (pickup ? config.pad_recharge : 0.0);
  return std::clamp(drained, 0.0, config.boost_capacity);
}

struct StepResult {
  SimWorld world;
  std::vector<EventMessage> events;
};

namespace detail {

inline void step_car(CarBody& car, const CarControls& in, const ArenaConfig& cfg,
                     bool& jumped_now) {
  const double dt = cfg.dt();
  const bool boosting = in.boost && car.boost > 0.0;
  const double grip = in.handbrake ? cfg.handbrake_grip : 1.0;
  const double force = cfg.car_acceleration * in.accelerate * grip -
                       cfg.brake_deceleration * in.brake + (boosting ? cfg.boost_thrust : 0.0);
  if (force == 0.0) {
    const double decel = cfg.car_friction * dt;
    car.speed = car.speed > 0.0 ? std::max(0.0, car.speed - decel)
                                : std::min(0.0, car.speed + decel);
  } else {
    car.speed = std::clamp(car.speed + force * dt, -cfg.max_reverse_speed, cfg.max_speed);
  }

  // Positive steer turns right (clockwise); turning needs motion.
  const double turn = cfg.turn_rate * (in.handbrake ? cfg.handbrake_turn_multiplier : 1.0);
  const double speed_factor = std::clamp(car.speed / cfg.turn_reference_speed, -1.0, 1.0);
  car.heading = normalize_angle(car.heading - in.steer * turn * speed_factor * dt);

  car.x += std::cos(car.heading) * car.speed * dt;
  car.y += std::sin(car.heading) * car.speed * dt;
  const double max_x = cfg.field_half_width - cfg.car_radius;
  const double max_y = cfg.field_half_length - cfg.car_radius;
  if (std::abs(car.x) > max_x || std::abs(car.y) > max_y) {
    car.x = std::clamp(car.x, -max_x, max_x);
    car.y = std::clamp(car.y, -max_y, max_y);
    car.speed = 0.0;
  }

  jumped_now = false;
  if (car.airborne_ticks > 0) {
    --car.airborne_ticks;
  } else if (in.jump && !car.jump_held) {
    car.airborne_ticks = cfg.jump_air_ticks();
    jumped_now = true;
  }
  car.jump_held = in.jump;
}

inline void hit_ball(BallBody& ball, const CarBody& car, bool jumped_now, const ArenaConfig& cfg) {
  if (ball.z >= cfg.hit_height) return;
  const double contact = cfg.car_radius + cfg.ball_radius;
  const double reach = contact + (jumped_now ? cfg.jump_reach : 0.0);
  const double dx = ball.x - car.x;
  const double dy = ball.y - car.y;
  const double dist = std::hypot(dx, dy);
  if (dist >= reach) return;

  double nx = std::cos(car.heading);
  double ny = std::sin(car.heading);
  if (dist > 0.0) {
    nx = dx / dist;
    ny = dy / dist;
  }
  const double cvx = std::cos(car.heading) * car.speed;
  const double cvy = std::sin(car.heading) * car.speed;
  const double rel = (ball.vx - cvx) * nx + (ball.vy - cvy) * ny;
  if (rel < 0.0) {
    ball.vx -= (1.0 + cfg.ball_restitution) * rel * nx;
    ball.vy -= (1.0 + cfg.ball_restitution) * rel * ny;
  }
  if (dist < contact) {
    ball.x = car.x + nx * contact;
    ball.y = car.y + ny * contact;
  }
  if (jumped_now) ball.vz = std::max(ball.vz, cfg.jump_hit_strength);
}

inline void step_ball(BallBody& ball, const ArenaConfig& cfg) {
  const double dt = cfg.dt();
  if (ball.z > 0.0 || ball.vz != 0.0) {
    ball.vz -= cfg.gravity * dt;
    ball.z += ball.vz * dt;
    if (ball.z <= 0.0) {
      ball.z = 0.0;
      ball.vz = -ball.vz * cfg.ball_restitution;
      if (ball.vz < cfg.gravity * dt * 2.0) ball.vz = 0.0;
    }
  }
  if (ball.z == 0.0) {
    const double speed = ball.planar_speed();
    if (speed > 0.0) {
      const double scale = std::max(0.0, speed - cfg.ball_friction * dt) / speed;
      ball.vx *= scale;
      ball.vy *= scale;
    }
  }
  ball.x += ball.vx * dt;
  ball.y += ball.vy * dt;

  const double max_x = cfg.field_half_width - cfg.ball_radius;
  if (std::abs(ball.x) > max_x) {
    ball.x = std::copysign(max_x, ball.x);
    ball.vx = -ball.vx * cfg.ball_restitution;
  }
  // The end walls stop the ball except in the goal mouth, where the centre
  // may reach the goal line.
  const double max_y = cfg.field_half_length - cfg.ball_radius;
  if (std::abs(ball.y) > max_y && std::abs(ball.x) > cfg.goal_half_width) {
    ball.y = std::copysign(max_y, ball.y);
    ball.vy = -ball.vy * cfg.ball_restitution;
  }
}

}  // namespace detail

// Advances exactly one tick. Controllers are matched to cars by index; a
// missing controller reads as neutral.
inline void step_in_place(SimWorld& w, std::span<const VirtualControllerState> controllers,
                          const ArenaConfig& cfg, std::vector<EventMessage>& events) {
  if (w.phase == Phase::Ended) throw DomainError("step after match end");
  // Inputs only count during Play; the reset tick runs with neutral controls.
  const bool accept_input = w.phase == Phase::Play;
  if (!accept_input) {
    w = reset_kickoff(std::move(w), cfg);
    events.push_back({"kickoff", -1, w.tick});
  }

  for (auto& pad : w.pads) {
    if (pad.respawn_ticks > 0) --pad.respawn_ticks;
  }

  std::vector<bool> jumped(w.cars.size(), false);
  for (std::size_t i = 0; i < w.cars.size(); ++i) {
    auto& car = w.cars[i];
    const CarControls in = accept_input && i < controllers.size() ? decode_controls(controllers[i]) : CarControls{};
    const bool boosting = in.boost && car.boost > 0.0;
    bool jumped_now = false;
    detail::step_car(car, in, cfg, jumped_now);
    jumped[i] = jumped_now;

    bool pickup = false;
    if (car.boost < cfg.boost_capacity) {
      for (auto& pad : w.pads) {
        if (pad.respawn_ticks == 0 && std::hypot(car.x - pad.x, car.y - pad.y) < cfg.pad_radius) {
          pad.respawn_ticks = cfg.pad_respawn_ticks();
          pickup = true;
          break;
        }
      }
    }
    car.boost = next_fuel(car.boost, boosting, pickup, cfg);
  }

  for (std::size_t i = 0; i < w.cars.size(); ++i) detail::hit_ball(w.ball, w.cars[i], jumped[i], cfg);
  detail::step_ball(w.ball, cfg);

  ++w.tick;

  int scorer = -1;
  if (std::abs(w.ball.x) <= cfg.goal_half_width) {
    if (w.ball.y >= cfg.field_half_length) scorer = 0;
    if (w.ball.y <= -cfg.field_half_length) scorer = 1;
  }
  if (scorer >= 0) {
    ++w.scores[static_cast<std::size_t>(scorer)];
    w.phase = Phase::GoalScored;
    events.push_back({"goal", scorer, w.tick});
    if (w.overtime) {
      w.phase = Phase::Ended;
      events.push_back({"match_end", -1, w.tick});
      return;
    }
  }

  if (w.tick >= cfg.match_ticks() && !w.overtime) {
    if (cfg.golden_goal && w.scores[0] == w.scores[1]) {
      w.overtime = true;
    } else {
      w.phase = Phase::Ended;
      events.push_back({"match_end", -1, w.tick});
    }
  }
}

inline StepResult step(SimWorld world, std::span<const VirtualControllerState> controllers,
                       const ArenaConfig& config) {
  StepResult r{std::move(world), {}};
  step_in_place(r.world, controllers, config, r.events);
  return r;
}

inline GameState snapshot_state(const SimWorld& w, const ArenaConfig& cfg) {
  const double rate = cfg.tick_rate;
  GameState s;
  s.ball.location = {w.ball.x, w.ball.y, w.ball.z};
  s.ball.velocity = {w.ball.vx, w.ball.vy, w.ball.vz};
  for (const auto& c : w.cars) {
    CarState cs;
    cs.physics.location = {c.x, c.y, 0.0};
    cs.physics.rotation.yaw = c.heading;
    cs.physics.velocity = {std::cos(c.heading) * c.speed, std::sin(c.heading) * c.speed, 0.0};
    cs.team_id = c.team;
    cs.ground_contact = c.airborne_ticks == 0;
    cs.jumped = c.airborne_ticks > 0;
    cs.boost = c.boost;
    cs.is_bot = c.is_bot;
    s.cars.push_back(cs);
  }
  s.teams = {{0, w.scores[0]}, {1, w.scores[1]}};
  s.info.seconds_elapsed = static_cast<double>(w.tick) / rate;
  for (std::size_t i = 0; i < w.pads.size(); ++i) {
    const auto& p = w.pads[i];
    s.pads.push_back({static_cast<int>(i), p.respawn_ticks == 0, p.respawn_ticks / rate});
  }
  s.ui = w.phase == Phase::Play ? UiState::InGame : UiState::Other;
  s.tick = w.tick;
  return s;
}

// ---------------------------------------------------------------------------
// Trace hashing and replay

// FNV-1a over the exact bit patterns of the world state.
class TraceHasher {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(int v) { add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  void add(bool v) { add(static_cast<std::uint64_t>(v)); }

  void add(const SimWorld& w) {
    add(w.tick);
    add(static_cast<int>(w.phase));
    add(w.overtime);
    for (double v : {w.ball.x, w.ball.y, w.ball.z, w.ball.vx, w.ball.vy, w.ball.vz}) add(v);
    for (const auto& c : w.cars) {
      for (double v : {c.x, c.y, c.heading, c.speed, c.boost}) add(v);
      add(c.airborne_ticks);
      add(c.jump_held);
    }
    for (const auto& p : w.pads) add(p.respawn_ticks);
    add(w.scores[0]);
    add(w.scores[1]);
  }

  std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

// Per-tick controller state of every car.
struct InputLog {
  int tick_rate = kTickRate;
  std::size_t cars = 2;
  std::vector<std::vector<VirtualControllerState>> ticks;
};

struct ReplayResult {
  SimWorld world;
  std::uint64_t trace_hash = 0;
  std::vector<EventMessage> events;
};

inline ReplayResult replay(const InputLog& log, const ArenaConfig& config,
                           const SimWorld* initial = nullptr) {
  if (log.tick_rate != config.tick_rate) {
    throw ReplayError("log tick rate " + std::to_string(log.tick_rate) +
                      " does not match arena tick rate " + std::to_string(config.tick_rate));
  }
  ReplayResult r{initial ? *initial : make_world(config), 0, {}};
  if (log.cars != r.world.cars.size()) {
    throw ReplayError("log has " + std::to_string(log.cars) + " cars, arena has " +
                      std::to_string(r.world.cars.size()));
  }
  TraceHasher hasher;
  hasher.add(r.world);
  for (const auto& controllers : log.ticks) {
    if (r.world.phase == Phase::Ended) break;
    step_in_place(r.world, controllers, config, r.events);
    hasher.add(r.world);
  }
  r.trace_hash = hasher.value();
  return r;
}

// ---------------------------------------------------------------------------
// Scripted starting positions

// "open_goal_roll": play already running, the ball rolling toward the
// undefended goal at +y with team 0's car trailing it and team 1 parked in
// its far corner.
inline SimWorld make_scenario(const std::string& name, const ArenaConfig& config) {
  SimWorld w = make_world(config);
  if (name.empty() || name == "kickoff") return w;
  if (name == "open_goal_roll") {
    w = reset_kickoff(std::move(w), config);
    w.ball = {0.0, config.field_half_length - 1800.0, 0.0, 0.0, 900.0, 0.0};
    for (auto& car : w.cars) {
      if (car.team == 0) {
        car.x = 0.0;
        car.y = w.ball.y - 900.0;
        car.heading = kPi / 2.0;
      } else {
        car.x = -(config.field_half_width - 500.0);
        car.y = -(config.field_half_length - 500.0);
        car.heading = 0.0;
      }
      car.speed = 0.0;
    }
    return w;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// Controller-state JSON (input logs)

inline json controller_to_json(const VirtualControllerState& c,
                               const ControllerLayout& layout = standard_layout()) {
  json j = json::object();
  for (const auto& [id, v] : c.values()) {
    auto e = find_element(layout, id);
    if (e && e->kind == ElementKind::StickAxisPair) {
      j[id] = json::array({v.x, v.y});
    } else {
      j[id] = v.x;
    }
  }
  return j;
}

inline VirtualControllerState controller_from_json(const json& j,
                                                   const ControllerLayout& layout =
                                                       standard_layout()) {
  if (!j.is_object()) throw ProtocolError("controller record must be an object");
  VirtualControllerState c;
  for (const auto& [id, v] : j.items()) {
    auto e = find_element(layout, id);
    if (!e) throw ProtocolError("unknown element '" + id + "'");
    Intensity in;
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      in = {v[0].get<double>(), v[1].get<double>()};
    } else if (v.is_number()) {
      in = {v.get<double>(), 0.0};
    } else {
      throw ProtocolError("bad intensity for '" + id + "'");
    }
    if (!intensity_in_domain(e->kind, in)) {
      throw ProtocolError("intensity out of domain for '" + id + "'");
    }
    c.set(id, in);
  }
  return c;
}

}  // namespace sharedctl
