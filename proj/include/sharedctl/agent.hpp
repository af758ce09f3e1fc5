#pragma once

// Software copilot: a decision interface fed game-state snapshots on a fixed
// cadence, the schedule that repeats its last action vector between
// inferences, the mask that keeps it to its assigned actions, and a built-in
// deterministic chase-and-shoot policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"
#include "sharedctl/protocol.hpp"

namespace sharedctl {

struct AgentActionVector {
  double throttle = 0.0;  // [-1, 1]
  double steer = 0.0;     // [-1, 1], positive turns right
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;
  double jump = 0.0;  // {0, 1}
  double boost = 0.0;
  double handbrake = 0.0;

  bool valid() const {
    auto bipolar = [](double v) { return std::isfinite(v) && v >= -1.0 && v <= 1.0; };
    auto binary = [](double v) { return v == 0.0 || v == 1.0; };
    return bipolar(throttle) && bipolar(steer) && bipolar(pitch) && bipolar(yaw) &&
           bipolar(roll) && binary(jump) && binary(boost) && binary(handbrake);
  }

  friend bool operator==(const AgentActionVector&, const AgentActionVector&) = default;
};

inline json vector_to_json(const AgentActionVector& v) {
  return {{"throttle", v.throttle}, {"steer", v.steer},       {"pitch", v.pitch},
          {"yaw", v.yaw},           {"roll", v.roll},         {"jump", v.jump},
          {"boost", v.boost},       {"handbrake", v.handbrake}};
}

inline AgentActionVector vector_from_json(const json& j) {
  using detail::number;
  AgentActionVector v{number(j, "throttle", "vector"), number(j, "steer", "vector"),
                      number(j, "pitch", "vector"),    number(j, "yaw", "vector"),
                      number(j, "roll", "vector"),     number(j, "jump", "vector"),
                      number(j, "boost", "vector"),    number(j, "handbrake", "vector")};
  if (!v.valid()) throw ProtocolError("action vector component out of domain");
  return v;
}

// `agent_action` payload sent by protocol-client agents.
struct AgentActionMessage {
  std::uint64_t tick = 0;
  AgentActionVector vector;
};

inline json agent_action_to_json(const AgentActionMessage& m) {
  return {{"tick", m.tick}, {"vector", vector_to_json(m.vector)}};
}

inline AgentActionMessage agent_action_from_json(const json& j) {
  return {static_cast<std::uint64_t>(detail::integer(j, "tick", "payload")),
          vector_from_json(detail::field(j, "vector", "payload"))};
}

// What a policy sees at an inference tick.
struct AgentObservation {
  const GameState& state;
  std::size_t car_index;
  DerivedFeatures features;
  std::span<const InputEntry> pilot_entries;
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  virtual std::string id() const = 0;
  virtual AgentActionVector decide(const AgentObservation& obs) = 0;
};

struct AgentSchedule {
  std::uint64_t period = 15;
  AgentActionVector last;
  std::optional<std::uint64_t> last_inference_tick;
};

struct ScheduleOutcome {
  AgentActionVector vector;
  AgentSchedule schedule;
  bool inferred = false;
  std::optional<EventMessage> warning;
};

// Runs the policy on ticks that are multiples of the period and repeats the
// stored vector otherwise. A failing policy keeps the stored vector.
inline ScheduleOutcome schedule_tick(AgentSchedule sched, std::uint64_t tick,
                                     const AgentObservation& obs, AgentPolicy& policy) {
  if (sched.period < 1) throw DomainError("agent period must be at least 1");
  if (sched.last_inference_tick && tick < *sched.last_inference_tick) {
    throw DomainError("agent schedule moved backwards");
  }
  ScheduleOutcome out{sched.last, sched, false, std::nullopt};
  if (tick % sched.period != 0) return out;

  out.inferred = true;
  out.schedule.last_inference_tick = tick;
  try {
    auto v = policy.decide(obs);
    if (!v.valid()) throw DomainError("policy produced an out-of-domain vector");
    out.vector = v;
    out.schedule.last = v;
  } catch (const std::exception& e) {
    out.warning = EventMessage{"agent_failure", -1, tick, e.what()};
  }
  return out;
}

// Keeps only the actions the copilot is assigned. Throttle splits at 0 into
// Accelerate (positive part) and Brake (magnitude of the negative part); the
// flight axes have no arena action and are dropped.
inline std::vector<InputEntry> mask_actions(const AgentActionVector& v,
                                            const ActionAssignment& assignment,
                                            std::uint64_t tick,
                                            const ActionProfile& profile = arena_profile(),
                                            std::uint32_t source = 0) {
  const std::array<std::pair<std::string_view, double>, 6> values = {{
      {actions::kSteer, v.steer},
      {actions::kAccelerate, std::max(0.0, v.throttle)},
      {actions::kBrake, std::max(0.0, -v.throttle)},
      {actions::kJump, v.jump},
      {actions::kBoost, v.boost},
      {actions::kHandbrake, v.handbrake},
  }};
  std::vector<InputEntry> out;
  for (const auto& [id, value] : values) {
    auto action = find_action(profile, id);
    if (!action) continue;
    auto it = assignment.find(action->id);
    if (it == assignment.end() || !permits(it->second, Role::Copilot)) continue;
    out.emplace_back(*action, value, 1.0, Role::Copilot, tick, source);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heuristic chase-and-shoot policy

struct HeuristicParams {
  double k_steer = 2.0;
  double boost_cone = 0.3;      // rad
  double boost_reserve = 10.0;  // percent
  double jump_radius = 250.0;
  double jump_max_ball_height = 150.0;
  double drift_angle = 2.0;  // rad
  double approach_offset = 150.0;
  double field_half_length = 5120.0;
};

struct HeuristicTarget {
  double x = 0.0;
  double y = 0.0;
  double heading_error = 0.0;  // positive when the target lies to the right
};

// Aim point behind the ball on the line from the ball to the opponent goal.
inline HeuristicTarget heuristic_target(const GameState& state, std::size_t car_index,
                                        const HeuristicParams& p) {
  const auto& car = state.cars.at(car_index);
  const double goal_y = car.team_id == 0 ? p.field_half_length : -p.field_half_length;
  const double bx = state.ball.location.x;
  const double by = state.ball.location.y;
  double ux = 0.0 - bx;
  double uy = goal_y - by;
  const double len = std::hypot(ux, uy);
  if (len > 0.0) {
    ux /= len;
    uy /= len;
  }
  HeuristicTarget t{bx - ux * p.approach_offset, by - uy * p.approach_offset, 0.0};
  const double bearing =
      std::atan2(t.y - car.physics.location.y, t.x - car.physics.location.x);
  t.heading_error = -normalize_angle(bearing - car.physics.rotation.yaw);
  return t;
}

inline AgentActionVector heuristic_policy(const GameState& state, std::size_t car_index,
                                          const DerivedFeatures& features,
                                          const HeuristicParams& p) {
  const auto& car = state.cars.at(car_index);
  const auto target = heuristic_target(state, car_index, p);
  const double err = target.heading_error;
  AgentActionVector v;
  if (std::abs(err) <= kPi / 2.0) {
    v.throttle = 1.0;
    v.steer = std::clamp(p.k_steer * err, -1.0, 1.0);
  } else {
    // Reverse out of it: steering flips sign while rolling backwards.
    v.throttle = -0.5;
    v.steer = err > 0.0 ? -1.0 : 1.0;
  }
  v.boost = std::abs(err) <= p.boost_cone && car.boost > p.boost_reserve ? 1.0 : 0.0;
  v.jump = features.distance_car_ball < p.jump_radius &&
                   state.ball.location.z < p.jump_max_ball_height
               ? 1.0
               : 0.0;
  v.handbrake = std::abs(err) > p.drift_angle ? 1.0 : 0.0;
  return v;
}

class HeuristicPolicy : public AgentPolicy {
 public:
  explicit HeuristicPolicy(HeuristicParams params = {}) : params_(params) {}

  std::string id() const override { return "heuristic"; }

  AgentActionVector decide(const AgentObservation& obs) override {
    return heuristic_policy(obs.state, obs.car_index, obs.features, params_);
  }

  const HeuristicParams& params() const noexcept { return params_; }

 private:
  HeuristicParams params_;
};

// Emits the same vector every time; handy for composition tests.
class ConstantPolicy : public AgentPolicy {
 public:
  explicit ConstantPolicy(AgentActionVector v) : v_(v) {}
  std::string id() const override { return "constant"; }
  AgentActionVector decide(const AgentObservation&) override { return v_; }

 private:
  AgentActionVector v_;
};

}  // namespace sharedctl
