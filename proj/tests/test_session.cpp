#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "sharedctl/session.hpp"

using namespace sharedctl;

namespace {

SessionConfig config_for(const std::string& mode, const std::string& pilot, const std::string& copilot,
                         double seconds) {
  ConfigSections s{{"session", {{"mode", mode}, {"match_seconds", std::to_string(seconds)}}},
                   {"player.pilot", {{"role", "pilot"}, {"source", pilot}}},
                   {"player.copilot", {{"role", "copilot"}, {"source", copilot}}}};
  return build_session_config(s);
}

InputMessage press(const std::string& player, InputCommand cmd, std::uint64_t tick) {
  return {player, std::move(cmd), tick};
}

std::shared_ptr<ScriptSource> random_script(const std::string& player, std::uint64_t ticks,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), bip(-1.0, 1.0);
  std::vector<InputMessage> msgs;
  for (std::uint64_t t = 0; t < ticks; t += 1 + rng() % 20) {
    msgs.push_back(press(player, InputCommand::stick("LeftStick", bip(rng), 0.0), t));
    msgs.push_back(press(player, InputCommand::trigger("RightTrigger", unit(rng)), t));
    msgs.push_back(press(player, InputCommand::button("A", rng() % 5 == 0 ? 1.0 : 0.0), t));
    msgs.push_back(press(player, InputCommand::button("B", rng() % 2 == 0 ? 1.0 : 0.0), t));
  }
  return std::make_shared<ScriptSource>(std::move(msgs));
}

class CountingPolicy : public AgentPolicy {
 public:
  std::string id() const override { return "counting"; }
  AgentActionVector decide(const AgentObservation& obs) override {
    ticks.push_back(obs.state.tick);
    AgentActionVector v;
    v.steer = (ticks.size() % 2) ? 0.25 : -0.25;
    v.throttle = 0.5;
    return v;
  }
  std::vector<std::uint64_t> ticks;
};

}  // namespace

TEST(Pipeline, StageOrderPerTick) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 0.5);
  std::vector<std::pair<std::string, std::uint64_t>> trace;
  SessionHooks hooks;
  hooks.on_stage = [&](std::string_view s, std::uint64_t t) { trace.emplace_back(std::string(s), t); };
  run_match(c, hooks);
  const std::vector<std::string> order{"interpret", "agent", "arbitrate", "apply", "step"};
  ASSERT_EQ(trace.size(), 60u * order.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].first, order[i % order.size()]);
    EXPECT_EQ(trace[i].second, i / order.size());
  }
}

TEST(Match, FiveMinutesGiveThirtySixThousandFrames) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 300.0);
  const auto out = run_match(c);
  EXPECT_EQ(out.log.frames.size(), 36000u);
  EXPECT_EQ(out.log.controllers.size(), 36000u * 2);
  EXPECT_EQ(out.result.duration_seconds, 300.0);
  EXPECT_EQ(out.result.goal_differential, out.result.scores[0] - out.result.scores[1]);
  int goals = 0;
  for (const auto& e : out.result.events) goals += e.kind == "goal";
  EXPECT_EQ(goals, out.result.scores[0] + out.result.scores[1]);
  ASSERT_FALSE(out.result.events.empty());
  EXPECT_EQ(out.result.events.back().kind, "match_end");
}

TEST(Match, TickLogReplayReproducesResult) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 60.0);
  Session session(c);
  session.set_source("pilot", random_script("pilot", 7200, 3));
  const auto out = session.run();
  EXPECT_EQ(replay_log(out.log, c), out.result);
  // Through the NDJSON file as well.
  std::stringstream buf;
  write_tick_log(buf, out.log);
  EXPECT_EQ(replay_log(read_tick_log(buf), c), out.result);
}

TEST(Match, ReplayDetectsTamperedLog) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 10.0);
  auto out = run_match(c);
  auto log = out.log;
  log.controllers[2 * 500].state.set("RightTrigger", {0.0, 0.0});
  log.controllers[2 * 500].state.set("LeftStick", {1.0, 0.0});
  EXPECT_NE(replay_log(log, c).trace_hash, out.result.trace_hash);
}

TEST(Match, SeedChangesTrace) {
  auto a = config_for("partial_automation", "idle", "agent:heuristic", 5.0);
  auto b = a;
  b.arena.seed = a.arena.seed + 1;
  EXPECT_NE(run_match(a).result.trace_hash, run_match(b).result.trace_hash);
  EXPECT_EQ(run_match(a).result, run_match(a).result);
}

TEST(TickLogFile, RoundTrip) {
  auto c = config_for("hybrid", "idle", "agent:heuristic", 2.0);
  Session session(c);
  session.set_source("pilot", random_script("pilot", 240, 9));
  const auto out = session.run();
  std::stringstream buf;
  write_tick_log(buf, out.log);
  const auto back = read_tick_log(buf);
  EXPECT_EQ(back.tick_rate, out.log.tick_rate);
  EXPECT_EQ(back.cars, out.log.cars);
  EXPECT_EQ(back.inputs, out.log.inputs);
  EXPECT_EQ(back.frames, out.log.frames);
  EXPECT_EQ(back.controllers, out.log.controllers);
  EXPECT_EQ(back.events, out.log.events);
}

TEST(TickLogFile, Errors) {
  std::stringstream empty;
  EXPECT_THROW(read_tick_log(empty), ProtocolError);
  std::stringstream bad("{\"kind\":\"header\",\"tick_rate\":120,\"cars\":2}\n{\"kind\":\"mystery\"}\n");
  EXPECT_THROW(read_tick_log(bad), ProtocolError);
  std::stringstream truncated("{\"kind\":\"header\",\"tick_rate\":120,\"cars\":2}\n{\"kind\":\"frame\",\"ti");
  EXPECT_THROW(read_tick_log(truncated), ProtocolError);
}

TEST(TickLogFile, LogDirectoryOverride) {
  ::unsetenv("SHAREDCTL_LOG_DIR");
  EXPECT_EQ(resolve_log_path("match.ndjson"), std::filesystem::path("match.ndjson"));
  ::setenv("SHAREDCTL_LOG_DIR", "/tmp/sharedctl-logs", 1);
  EXPECT_EQ(resolve_log_path("match.ndjson"), std::filesystem::path("/tmp/sharedctl-logs/match.ndjson"));
  EXPECT_EQ(resolve_log_path("/var/abs.ndjson"), std::filesystem::path("/var/abs.ndjson"));
  ::unsetenv("SHAREDCTL_LOG_DIR");
}

TEST(Liveness, RemoteSourceDisconnectKeepsTicking) {
  auto c = config_for("human_cooperation", "remote", "remote", 2.0);
  Session session(c);
  auto pilot = std::dynamic_pointer_cast<RemoteSource>(session.source("pilot"));
  auto copilot = std::dynamic_pointer_cast<RemoteSource>(session.source("copilot"));
  ASSERT_TRUE(pilot && copilot);
  pilot->set_connected(true);
  copilot->set_connected(true);
  pilot->apply(InputCommand::trigger("RightTrigger", 1.0));
  SessionHooks hooks;
  std::uint64_t last_tick = 0;
  hooks.on_snapshot = [&](const GameState& s) {
    last_tick = s.tick;
    if (s.tick == 60) pilot->set_connected(false);
    if (s.tick == 120) pilot->set_connected(true);
  };
  const auto out = session.run(hooks);
  EXPECT_EQ(last_tick, 240u);
  EXPECT_EQ(out.log.frames.size(), 240u);
  std::vector<std::string> kinds;
  for (const auto& e : out.log.events) {
    if (e.kind.starts_with("source_")) {
      kinds.push_back(e.kind);
      EXPECT_EQ(e.detail, "pilot");
    }
  }
  EXPECT_EQ(kinds, (std::vector<std::string>{"source_disconnected", "source_reconnected"}));
  // No pilot input while disconnected; the copilot entries still flow.
  for (const auto& r : out.log.inputs) {
    if (r.tick >= 60 && r.tick < 120) {
      EXPECT_NE(r.source, "pilot") << r.tick;
    }
  }
}

TEST(Masking, PilotInputOnCopilotActionsIsInert) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 20.0);
  c.assignment = uniform_assignment(arena_profile(), Control::CopilotOnly);
  const auto baseline = run_match(c);
  Session session(c);
  session.set_source("pilot", random_script("pilot", 2400, 11));
  const auto pressed = session.run();
  EXPECT_EQ(pressed.result, baseline.result);
  EXPECT_EQ(pressed.log.controllers, baseline.log.controllers);
  for (const auto& r : pressed.log.inputs) EXPECT_EQ(r.role, Role::Copilot);
}

TEST(Cadence, SessionRunsAgentEveryFifteenTicks) {
  auto c = config_for("partial_automation", "idle", "agent:heuristic", 1.25);
  Session session(c);
  auto agent = std::make_shared<CountingPolicy>();
  session.set_policy("copilot", agent);
  const auto out = session.run();
  EXPECT_EQ(out.log.frames.size(), 150u);
  ASSERT_EQ(agent->ticks.size(), 10u);
  for (std::size_t i = 0; i < agent->ticks.size(); ++i) EXPECT_EQ(agent->ticks[i], 15 * i);
  // Merged Steer is constant inside each window.
  for (const auto& f : out.log.frames) {
    const auto& first = out.log.frames[f.tick / 15 * 15];
    EXPECT_EQ(f.frame.actions, first.frame.actions) << f.tick;
  }
}

TEST(Cadence, RemoteAgentMissedInference) {
  auto c = config_for("partial_automation", "idle", "agent:remote", 0.5);
  Session session(c);
  auto remote = std::dynamic_pointer_cast<RemoteAgentPolicy>(session.policy("copilot"));
  ASSERT_TRUE(remote);
  AgentActionVector v;
  v.throttle = 1.0;
  remote->deliver({0, v});
  const auto out = session.run();
  std::vector<std::uint64_t> missed;
  for (const auto& e : out.log.events) {
    if (e.kind == "missed_inference") missed.push_back(e.tick);
  }
  EXPECT_EQ(missed, (std::vector<std::uint64_t>{15, 30, 45}));
  // The stale vector keeps driving.
  for (const auto& f : out.log.frames) {
    for (const auto& a : f.frame.actions) {
      if (a.action == "Accelerate") {
        EXPECT_EQ(a.value, 1.0);
      }
    }
  }
}

TEST(Mediation, OpposingSteerKeepsHeading) {
  auto c = config_for("human_cooperation", "idle", "idle", 0.25);
  c.assignment = uniform_assignment(arena_profile(), Control::Overlapping);
  c.opponent = "idle";
  Session session(c);
  session.set_source("pilot", std::make_shared<ScriptSource>(std::vector<InputMessage>{
                                  press("pilot", InputCommand::stick("LeftStick", -1.0, 0.0), 0),
                                  press("pilot", InputCommand::trigger("RightTrigger", 1.0), 0)}));
  session.set_source("copilot", std::make_shared<ScriptSource>(std::vector<InputMessage>{
                                    press("copilot", InputCommand::stick("LeftStick", 1.0, 0.0), 0)}));
  const auto out = session.run();
  for (const auto& f : out.log.frames) {
    for (const auto& a : f.frame.actions) {
      if (a.action == "Steer") {
        EXPECT_EQ(a.value, 0.0);
      }
    }
  }
  EXPECT_LT(std::abs(session.last_world().cars[0].heading - kPi / 2.0), 1e-9);
  EXPECT_GT(session.last_world().cars[0].speed, 0.0);
}

TEST(Scenario, OpenGoalRollScoresOnce) {
  const auto c = load_session_config(std::string(SHAREDCTL_SOURCE_DIR) + "/configs/open_goal_roll.ini");
  for (const auto& [action, control] : c.assignment) EXPECT_EQ(control, Control::CopilotOnly) << action;
  const auto out = run_match(c);
  std::vector<EventMessage> goals;
  for (const auto& e : out.result.events) {
    if (e.kind == "goal") goals.push_back(e);
  }
  ASSERT_EQ(goals.size(), 1u);
  EXPECT_EQ(goals[0].team, 0);
  EXPECT_EQ(goals[0].tick, 170u);  // pinned from the first verified run
  EXPECT_EQ(out.result.scores, (std::array<int, 2>{1, 0}));
  EXPECT_EQ(run_match(c).result, out.result);
}

TEST(Overlay, RolesAreSeparated) {
  const auto& profile = arena_profile();
  std::vector<InputEntry> entries{
      {*find_action(profile, "Accelerate"), 0.8, 1.0, Role::Pilot, 5},
      {*find_action(profile, "Boost"), 1.0, 1.0, Role::Copilot, 5},
  };
  const auto r = overlay_for_tick(5, entries, default_policy_table(profile), profile);
  EXPECT_EQ(r.tick, 5u);
  EXPECT_EQ(r.pilot, (std::vector<ActiveElement>{{"RightTrigger", {0.8, 0.0}}}));
  EXPECT_EQ(r.copilot, (std::vector<ActiveElement>{{"B", {1.0, 0.0}}}));
  const auto idle = overlay_for_tick(6, {}, default_policy_table(profile), profile);
  EXPECT_TRUE(idle.pilot.empty());
  EXPECT_TRUE(idle.copilot.empty());
}

TEST(Overlay, ExportImportRoundTrip) {
  auto c = config_for("hybrid", "idle", "agent:heuristic", 1.0);
  Session session(c);
  session.set_source("pilot", random_script("pilot", 120, 21));
  std::vector<OverlayRecord> live;
  SessionHooks hooks;
  hooks.on_overlay = [&](const OverlayRecord& r) { live.push_back(r); };
  const auto out = session.run(hooks);
  std::stringstream buf;
  export_augmented_log(buf, out.log);
  const auto imported = import_augmented_log(buf);
  ASSERT_EQ(imported.size(), 120u);
  EXPECT_EQ(imported, augment_log(out.log));
  // Without override policies the offline overlay matches what was streamed.
  EXPECT_EQ(imported, live);
  bool any_pilot = false, any_copilot = false;
  for (const auto& r : imported) {
    any_pilot |= !r.pilot.empty();
    any_copilot |= !r.copilot.empty();
  }
  EXPECT_TRUE(any_pilot);
  EXPECT_TRUE(any_copilot);
}

TEST(Pause, InputSuspendedOutsideInGameUi) {
  auto c = load_session_config(std::string(SHAREDCTL_SOURCE_DIR) + "/configs/open_goal_roll.ini");
  c.assignment["Handbrake"] = Control::Overlapping;
  Session session(c);
  session.set_source("pilot", std::make_shared<ScriptSource>(std::vector<InputMessage>{
                                  press("pilot", InputCommand::button("X", 1.0), 0)}));
  const auto out = session.run();
  std::optional<std::uint64_t> goal;
  for (const auto& e : out.result.events) {
    if (e.kind == "goal" && !goal) goal = e.tick;
  }
  ASSERT_TRUE(goal);
  // The tick stamped on the goal is spent in the kickoff reset.
  std::set<std::uint64_t> pilot_ticks;
  for (const auto& r : out.log.inputs) {
    if (r.source == "pilot") pilot_ticks.insert(r.tick);
  }
  EXPECT_TRUE(pilot_ticks.contains(*goal - 1));
  EXPECT_FALSE(pilot_ticks.contains(*goal));
  EXPECT_TRUE(pilot_ticks.contains(*goal + 1));
}
