#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "sharedctl/agent.hpp"
#include "sharedctl/arbitrator.hpp"

using namespace sharedctl;

namespace {

GameState state(Vec3 car, double yaw, Vec3 ball, double boost = 50.0) {
  GameState s;
  s.cars.resize(2);
  s.cars[0].physics.location = car;
  s.cars[0].physics.rotation.yaw = yaw;
  s.cars[0].boost = boost;
  s.cars[1].team_id = 1;
  s.cars[1].physics.location = {0.0, 4000.0, 0.0};
  s.ball.location = ball;
  s.teams = {{0, 0}, {1, 0}};
  return s;
}

class CountingPolicy : public AgentPolicy {
 public:
  std::string id() const override { return "counting"; }
  AgentActionVector decide(const AgentObservation&) override {
    ++calls;
    AgentActionVector v;
    v.steer = (calls % 2) ? 0.5 : -0.5;
    v.throttle = calls / 100.0;
    return v;
  }
  int calls = 0;
};

class FailingPolicy : public AgentPolicy {
 public:
  std::string id() const override { return "failing"; }
  AgentActionVector decide(const AgentObservation&) override { throw std::runtime_error("no answer"); }
};

ActionAssignment assignment_from(int code) {
  ActionAssignment a;
  for (const auto& action : arena_profile()) {
    a[action.id] = static_cast<Control>(code % 3);
    code /= 3;
  }
  return a;
}

AgentActionVector full_vector(double throttle = 0.7) {
  return {throttle, -0.4, 0.3, 0.2, 0.1, 1.0, 1.0, 1.0};
}

}  // namespace

TEST(ActionVector, Validity) {
  EXPECT_TRUE(full_vector().valid());
  auto v = full_vector();
  v.jump = 0.5;
  EXPECT_FALSE(v.valid());
  v = full_vector();
  v.steer = 1.2;
  EXPECT_FALSE(v.valid());
  EXPECT_EQ(vector_from_json(vector_to_json(full_vector())), full_vector());
  auto j = vector_to_json(full_vector());
  j["boost"] = 2;
  EXPECT_THROW(vector_from_json(j), ProtocolError);
  AgentActionMessage m{30, full_vector()};
  auto back = agent_action_from_json(agent_action_to_json(m));
  EXPECT_EQ(back.tick, 30u);
  EXPECT_EQ(back.vector, m.vector);
}

TEST(Schedule, CadenceOverOneFiftyTicks) {
  const auto s = state({0, 0, 0}, 0, {100, 0, 0});
  AgentObservation obs{s, 0, compute_derived(s, 0), {}};
  CountingPolicy policy;
  AgentSchedule sched;
  AgentActionVector tick0;
  int inferred = 0;
  for (std::uint64_t t = 0; t < 150; ++t) {
    auto r = schedule_tick(sched, t, obs, policy);
    sched = r.schedule;
    inferred += r.inferred;
    EXPECT_EQ(r.inferred, t % 15 == 0);
    if (t == 0) tick0 = r.vector;
    if (t > 0 && t < 15) EXPECT_EQ(r.vector, tick0) << t;
  }
  // Oracle: multiples of 15 in [0, 150).
  int oracle = 0;
  for (int t = 0; t < 150; ++t) oracle += t % 15 == 0;
  EXPECT_EQ(inferred, oracle);
  EXPECT_EQ(inferred, 10);
  EXPECT_EQ(policy.calls, 10);
}

TEST(Schedule, InvocationCountFormula) {
  const auto s = state({0, 0, 0}, 0, {100, 0, 0});
  AgentObservation obs{s, 0, compute_derived(s, 0), {}};
  for (std::uint64_t period : {1u, 2u, 7u, 15u, 40u}) {
    for (std::uint64_t T : {1u, 14u, 15u, 16u, 151u}) {
      CountingPolicy policy;
      AgentSchedule sched;
      sched.period = period;
      for (std::uint64_t t = 0; t < T; ++t) sched = schedule_tick(sched, t, obs, policy).schedule;
      EXPECT_EQ(static_cast<std::uint64_t>(policy.calls), (T - 1) / period + 1);
    }
  }
}

TEST(Schedule, FailureKeepsLastVectorAndWarns) {
  const auto s = state({0, 0, 0}, 0, {100, 0, 0});
  AgentObservation obs{s, 0, compute_derived(s, 0), {}};
  ConstantPolicy good(full_vector());
  FailingPolicy bad;
  AgentSchedule sched;
  sched = schedule_tick(sched, 0, obs, good).schedule;
  auto r = schedule_tick(sched, 15, obs, bad);
  EXPECT_EQ(r.vector, full_vector());
  ASSERT_TRUE(r.warning);
  EXPECT_EQ(r.warning->kind, "agent_failure");
  EXPECT_EQ(r.warning->tick, 15u);
  EXPECT_EQ(r.schedule.last, full_vector());
}

TEST(Schedule, Preconditions) {
  const auto s = state({0, 0, 0}, 0, {100, 0, 0});
  AgentObservation obs{s, 0, compute_derived(s, 0), {}};
  ConstantPolicy p(full_vector());
  AgentSchedule sched;
  sched.period = 0;
  EXPECT_THROW(schedule_tick(sched, 0, obs, p), DomainError);
  sched.period = 15;
  sched.last_inference_tick = 30;
  EXPECT_THROW(schedule_tick(sched, 10, obs, p), DomainError);
}

TEST(Mask, JumpAndBoostOnly) {
  auto a = uniform_assignment(arena_profile(), Control::PilotOnly);
  a["Jump"] = Control::CopilotOnly;
  a["Boost"] = Control::Overlapping;
  auto entries = mask_actions(full_vector(), a, 4);
  ASSERT_EQ(entries.size(), 2u);
  std::set<std::string> actions;
  for (const auto& e : entries) {
    actions.insert(e.action());
    EXPECT_EQ(e.role(), Role::Copilot);
    EXPECT_EQ(e.confidence(), 1.0);
    EXPECT_EQ(e.tick(), 4u);
  }
  EXPECT_EQ(actions, (std::set<std::string>{"Jump", "Boost"}));
}

TEST(Mask, NothingAssigned) {
  EXPECT_TRUE(mask_actions(full_vector(), uniform_assignment(arena_profile(), Control::PilotOnly), 0).empty());
}

// Oracle table: throttle sign x Brake/Accelerate assignment.
TEST(Mask, ThrottleSplit) {
  struct Case {
    double throttle;
    double accelerate;
    double brake;
  };
  for (const auto& c : {Case{-0.6, 0.0, 0.6}, Case{0.6, 0.6, 0.0}, Case{0.0, 0.0, 0.0}, Case{-1.0, 0.0, 1.0}}) {
    for (auto brake_control : {Control::CopilotOnly, Control::PilotOnly}) {
      auto a = uniform_assignment(arena_profile(), Control::PilotOnly);
      a["Brake"] = brake_control;
      a["Accelerate"] = Control::Overlapping;
      auto v = full_vector(c.throttle);
      std::map<std::string, double> got;
      for (const auto& e : mask_actions(v, a, 0)) got[e.action()] = e.value();
      EXPECT_EQ(got.at("Accelerate"), c.accelerate);
      if (brake_control == Control::CopilotOnly) {
        EXPECT_EQ(got.at("Brake"), c.brake);
      } else {
        EXPECT_FALSE(got.contains("Brake"));
      }
    }
  }
}

TEST(Mask, ExhaustiveSoundness) {
  const auto v = full_vector(-0.3);
  for (int code = 0; code < 729; ++code) {
    const auto a = assignment_from(code);
    std::set<std::string> seen;
    for (const auto& e : mask_actions(v, a, 0)) {
      ASSERT_TRUE(permits(a.at(e.action()), Role::Copilot)) << code << " " << e.action();
      ASSERT_TRUE(value_in_domain(e.kind(), e.value()));
      seen.insert(e.action());
    }
    for (const auto& [action, control] : a) {
      EXPECT_EQ(seen.contains(action), permits(control, Role::Copilot));
    }
  }
}

TEST(Composition, ConstantPolicyPeriodOneIsTickInvariant) {
  const auto s = state({0, 0, 0}, 0, {100, 0, 0});
  AgentObservation obs{s, 0, compute_derived(s, 0), {}};
  ConstantPolicy p(full_vector());
  AgentSchedule sched;
  sched.period = 1;
  const auto a = uniform_assignment(arena_profile(), Control::CopilotOnly);
  const auto policies = default_policy_table(arena_profile());
  std::optional<std::vector<MergedAction>> first;
  for (std::uint64_t t = 0; t < 50; ++t) {
    auto r = schedule_tick(sched, t, obs, p);
    sched = r.schedule;
    auto f = arbitrate_frame(mask_actions(r.vector, a, t), policies, arena_profile(), t);
    if (!first) first = f.actions;
    EXPECT_EQ(f.actions, *first);
  }
}

TEST(Heuristic, BallAheadOnGoalLine) {
  // Car on the centre line facing +y, ball straight ahead toward the goal.
  const auto s = state({0, -1000, 0}, kPi / 2.0, {0, 1000, 0});
  const auto v = heuristic_policy(s, 0, compute_derived(s, 0), {});
  EXPECT_EQ(v.steer, 0.0);
  EXPECT_EQ(v.throttle, 1.0);
  EXPECT_EQ(v.boost, 1.0);
}

TEST(Heuristic, BallNinetyDegreesLeft) {
  HeuristicParams p;
  p.approach_offset = 0.0;
  // Facing +y; target on the -x side is to the left.
  const auto s = state({0, 0, 0}, kPi / 2.0, {-1000, 0, 0});
  const auto v = heuristic_policy(s, 0, compute_derived(s, 0), p);
  // Oracle: clamp(k_steer * (-pi/2)).
  EXPECT_EQ(v.steer, std::clamp(p.k_steer * (-kPi / 2.0), -1.0, 1.0));
  EXPECT_EQ(v.steer, -1.0);
  EXPECT_EQ(v.throttle, 1.0);
  const auto t = heuristic_target(s, 0, p);
  EXPECT_NEAR(t.heading_error, -kPi / 2.0, 1e-12);
}

TEST(Heuristic, NoFuelNoBoost) {
  const auto s = state({0, -1000, 0}, kPi / 2.0, {0, 1000, 0}, 0.0);
  EXPECT_EQ(heuristic_policy(s, 0, compute_derived(s, 0), {}).boost, 0.0);
}

TEST(Heuristic, BehindTurnsAround) {
  HeuristicParams p;
  p.approach_offset = 0.0;
  // Facing +y with the target straight behind.
  const auto s = state({0, 0, 0}, kPi / 2.0, {1.0, -2000, 0});
  const auto v = heuristic_policy(s, 0, compute_derived(s, 0), p);
  EXPECT_EQ(v.throttle, -0.5);
  EXPECT_EQ(std::abs(v.steer), 1.0);
  EXPECT_EQ(v.handbrake, 1.0);
}

TEST(Heuristic, JumpWhenClose) {
  const auto s = state({0, -200, 0}, kPi / 2.0, {0, 0, 0});
  EXPECT_EQ(heuristic_policy(s, 0, compute_derived(s, 0), {}).jump, 1.0);
  const auto far = state({0, -2000, 0}, kPi / 2.0, {0, 0, 0});
  EXPECT_EQ(heuristic_policy(far, 0, compute_derived(far, 0), {}).jump, 0.0);
  const auto high = state({0, -200, 0}, kPi / 2.0, {0, 0, 180});
  EXPECT_EQ(heuristic_policy(high, 0, compute_derived(high, 0), {}).jump, 0.0);
}

TEST(Heuristic, DeterministicAndValid) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-4000, 4000), ang(-kPi, kPi), fuel(0, 100);
  for (int i = 0; i < 2000; ++i) {
    const auto s = state({pos(rng), pos(rng), 0}, ang(rng), {pos(rng), pos(rng), 0}, fuel(rng));
    const auto a = heuristic_policy(s, 0, compute_derived(s, 0), {});
    EXPECT_TRUE(a.valid());
    EXPECT_EQ(a, heuristic_policy(s, 0, compute_derived(s, 0), {}));
  }
}

TEST(Heuristic, TeamOneAimsAtNegativeGoal) {
  GameState s = state({0, 0, 0}, 0, {0, 0, 0});
  s.cars[1].physics.location = {0, 1000, 0};
  s.cars[1].physics.rotation.yaw = -kPi / 2.0;
  s.ball.location = {0, -500, 0};
  const auto t = heuristic_target(s, 1, {});
  EXPECT_GT(t.y, s.ball.location.y);
  EXPECT_NEAR(t.heading_error, 0.0, 1e-12);
}
