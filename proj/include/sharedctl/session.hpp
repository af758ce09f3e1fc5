#pragma once

// Match orchestration. Per tick: sample and interpret every human source,
// run the agent schedule and mask, arbitrate, render onto the virtual
// controller, step the arena and publish the snapshot. Everything that
// crosses the pipeline is recorded in the tick log.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sharedctl/agent.hpp"
#include "sharedctl/arbitrator.hpp"
#include "sharedctl/arena.hpp"
#include "sharedctl/config.hpp"
#include "sharedctl/error.hpp"
#include "sharedctl/interpreter.hpp"
#include "sharedctl/protocol.hpp"
#include "sharedctl/sources.hpp"

namespace sharedctl {

// ---------------------------------------------------------------------------
// Tick log

struct InputRecord {
  std::uint64_t tick = 0;
  Role role = Role::Pilot;
  std::string source;
  ActionId action;
  double value = 0.0;

  friend bool operator==(const InputRecord&, const InputRecord&) = default;
};

struct FrameRecord {
  std::uint64_t tick = 0;
  MergedActionFrame frame;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct ControllerRecord {
  std::uint64_t tick = 0;
  std::size_t car = 0;
  VirtualControllerState state;

  friend bool operator==(const ControllerRecord&, const ControllerRecord&) = default;
};

struct TickLog {
  int tick_rate = kTickRate;
  std::size_t cars = 2;
  std::vector<InputRecord> inputs;
  std::vector<FrameRecord> frames;
  std::vector<ControllerRecord> controllers;
  std::vector<EventMessage> events;

  InputLog input_log() const {
    InputLog log{tick_rate, cars, {}};
    for (const auto& r : controllers) {
      if (log.ticks.size() <= r.tick) log.ticks.resize(r.tick + 1, std::vector<VirtualControllerState>(cars));
      log.ticks[r.tick][r.car] = r.state;
    }
    return log;
  }
};

inline json frame_to_json(const MergedActionFrame& f) {
  json values = json::object();
  json roles = json::object();
  for (const auto& a : f.actions) {
    values[a.action] = a.value;
    json r = json::array();
    if (a.from_pilot) r.push_back("pilot");
    if (a.from_copilot) r.push_back("copilot");
    if (!r.empty()) roles[a.action] = std::move(r);
  }
  return {{"values", std::move(values)}, {"roles", std::move(roles)}};
}

// One NDJSON line per record: header, then per tick its inputs, frame,
// controllers and events.
inline void write_tick_log(std::ostream& out, const TickLog& log) {
  out << json{{"kind", "header"}, {"tick_rate", log.tick_rate}, {"cars", log.cars}}.dump() << '\n';
  std::size_t i = 0, c = 0, e = 0;
  for (const auto& f : log.frames) {
    for (; i < log.inputs.size() && log.inputs[i].tick <= f.tick; ++i) {
      const auto& r = log.inputs[i];
      out << json{{"kind", "input"}, {"tick", r.tick}, {"role", to_string(r.role)},
                  {"source", r.source}, {"action", r.action}, {"value", r.value}}
                 .dump()
          << '\n';
    }
    auto fj = frame_to_json(f.frame);
    fj["kind"] = "frame";
    fj["tick"] = f.tick;
    out << fj.dump() << '\n';
    for (; c < log.controllers.size() && log.controllers[c].tick <= f.tick; ++c) {
      const auto& r = log.controllers[c];
      out << json{{"kind", "controller"}, {"tick", r.tick}, {"car", r.car},
                  {"state", controller_to_json(r.state)}}
                 .dump()
          << '\n';
    }
    for (; e < log.events.size() && log.events[e].tick <= f.tick + 1; ++e) {
      out << json{{"kind", "event"}, {"tick", log.events[e].tick}, {"event", event_to_json(log.events[e])}}
                 .dump()
          << '\n';
    }
  }
  for (; e < log.events.size(); ++e) {
    out << json{{"kind", "event"}, {"tick", log.events[e].tick}, {"event", event_to_json(log.events[e])}}
               .dump()
        << '\n';
  }
}

inline TickLog read_tick_log(std::istream& in, const ActionProfile& profile = arena_profile()) {
  TickLog log;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = parse_line(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        log.tick_rate = j.at("tick_rate").get<int>();
        log.cars = j.at("cars").get<std::size_t>();
        header = true;
      } else if (kind == "input") {
        auto role = parse_role(j.at("role").get<std::string>());
        if (!role) throw ProtocolError("bad role");
        log.inputs.push_back({j.at("tick").get<std::uint64_t>(), *role,
                              j.at("source").get<std::string>(), j.at("action").get<std::string>(),
                              j.at("value").get<double>()});
      } else if (kind == "frame") {
        FrameRecord f;
        f.tick = j.at("tick").get<std::uint64_t>();
        f.frame.tick = f.tick;
        const auto& values = j.at("values");
        const json roles = j.value("roles", json::object());
        for (const auto& a : profile) {
          MergedAction m{a.id, values.at(a.id).get<double>()};
          if (roles.contains(a.id)) {
            for (const auto& r : roles.at(a.id)) {
              const auto role = parse_role(r.get<std::string>());
              if (!role) throw ProtocolError("bad role in frame record");
              (*role == Role::Pilot ? m.from_pilot : m.from_copilot) = true;
            }
          }
          f.frame.actions.push_back(std::move(m));
        }
        log.frames.push_back(std::move(f));
      } else if (kind == "controller") {
        log.controllers.push_back({j.at("tick").get<std::uint64_t>(), j.at("car").get<std::size_t>(),
                                   controller_from_json(j.at("state"))});
      } else if (kind == "event") {
        log.events.push_back(event_from_json(j.at("event")));
      } else {
        throw ProtocolError("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ProtocolError("log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError("log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw ProtocolError("log has no header record");
  return log;
}

// Relative log paths land under $SHAREDCTL_LOG_DIR when it is set.
inline std::filesystem::path resolve_log_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("SHAREDCTL_LOG_DIR"); dir && *dir) {
      return std::filesystem::path(dir) / p;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Overlay (which elements each role had active, per tick)

struct ActiveElement {
  ElementId element;
  Intensity intensity;

  friend bool operator==(const ActiveElement&, const ActiveElement&) = default;
};

struct OverlayRecord {
  std::uint64_t tick = 0;
  std::vector<ActiveElement> pilot;
  std::vector<ActiveElement> copilot;

  friend bool operator==(const OverlayRecord&, const OverlayRecord&) = default;
};

namespace detail {

inline std::vector<ActiveElement> active_elements(std::span<const InputEntry> entries,
                                                  const PolicyTable& policies,
                                                  const ActionProfile& profile,
                                                  std::uint64_t tick) {
  const auto frame = arbitrate_frame(entries, policies, profile, tick);
  std::vector<ActiveElement> out;
  const auto& layout = standard_layout();
  for (const auto& cmd : frame_to_commands(frame, default_game_mapping(), layout)) {
    if (cmd.intensity() != Intensity{}) out.push_back({cmd.element().id, cmd.intensity()});
  }
  return out;
}

inline json active_to_json(const std::vector<ActiveElement>& v) {
  json a = json::array();
  const auto& layout = standard_layout();
  for (const auto& e : v) {
    auto el = find_element(layout, e.element);
    json intensity = el && el->kind == ElementKind::StickAxisPair
                         ? json::array({e.intensity.x, e.intensity.y})
                         : json(e.intensity.x);
    a.push_back({{"element", e.element}, {"intensity", std::move(intensity)}});
  }
  return a;
}

inline std::vector<ActiveElement> active_from_json(const json& a) {
  std::vector<ActiveElement> out;
  for (const auto& e : a) {
    const auto& in = e.at("intensity");
    Intensity v = in.is_array() ? Intensity{in[0].get<double>(), in[1].get<double>()}
                                : Intensity{in.get<double>(), 0.0};
    out.push_back({e.at("element").get<std::string>(), v});
  }
  return out;
}

}  // namespace detail

// Each role's entries are merged on their own and rendered onto the default
// game elements, so a role's column shows what that role alone pressed.
inline OverlayRecord overlay_for_tick(std::uint64_t tick, std::span<const InputEntry> entries,
                                      const PolicyTable& policies, const ActionProfile& profile) {
  std::vector<InputEntry> pilot, copilot;
  for (const auto& e : entries) (e.role() == Role::Pilot ? pilot : copilot).push_back(e);
  return {tick, detail::active_elements(pilot, policies, profile, tick),
          detail::active_elements(copilot, policies, profile, tick)};
}

inline json overlay_to_json(const OverlayRecord& r) {
  return {{"tick", r.tick},
          {"pilot", detail::active_to_json(r.pilot)},
          {"copilot", detail::active_to_json(r.copilot)}};
}

inline OverlayRecord overlay_from_json(const json& j) {
  return {j.at("tick").get<std::uint64_t>(), detail::active_from_json(j.at("pilot")),
          detail::active_from_json(j.at("copilot"))};
}

inline std::vector<OverlayRecord> augment_log(const TickLog& log,
                                              const PolicyTable& policies =
                                                  default_policy_table(arena_profile()),
                                              const ActionProfile& profile = arena_profile()) {
  std::vector<OverlayRecord> out;
  std::size_t i = 0;
  for (const auto& f : log.frames) {
    std::vector<InputEntry> entries;
    for (; i < log.inputs.size() && log.inputs[i].tick <= f.tick; ++i) {
      const auto& r = log.inputs[i];
      if (r.tick != f.tick) continue;
      auto action = find_action(profile, r.action);
      if (!action) throw ProtocolError("log input for unknown action '" + r.action + "'");
      entries.emplace_back(*action, r.value, 1.0, r.role, r.tick);
    }
    // Base policies only: override predicates need live state.
    PolicyTable base = policies;
    for (auto& [action, p] : base) p.override_predicate.reset();
    out.push_back(overlay_for_tick(f.tick, entries, base, profile));
  }
  return out;
}

inline void export_augmented_log(std::ostream& out, const TickLog& log,
                                 const PolicyTable& policies = default_policy_table(arena_profile()),
                                 const ActionProfile& profile = arena_profile()) {
  for (const auto& r : augment_log(log, policies, profile)) out << overlay_to_json(r).dump() << '\n';
}

inline std::vector<OverlayRecord> import_augmented_log(std::istream& in) {
  std::vector<OverlayRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(overlay_from_json(parse_line(line)));
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("overlay record: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Match

struct MatchResult {
  std::array<int, 2> scores{0, 0};
  int goal_differential = 0;  // team 0 (the pilot's) scored minus conceded
  double duration_seconds = 0.0;
  std::vector<EventMessage> events;  // simulation events only; warnings stay in the log
  std::uint64_t trace_hash = 0;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

struct MatchOutcome {
  MatchResult result;
  TickLog log;
};

struct SessionHooks {
  // Pipeline stage trace: "interpret", "agent", "arbitrate", "apply", "step".
  std::function<void(std::string_view stage, std::uint64_t tick)> on_stage;
  std::function<void(const GameState&)> on_snapshot;
  std::function<void(const EventMessage&)> on_event;
  std::function<void(const OverlayRecord&)> on_overlay;
  std::function<bool()> should_stop;
};

// Agent driven by a protocol client. The client answers `state` messages with
// `agent_action`; decide() collects the freshest answer and fails when none
// arrived since the previous inference, so the schedule keeps the stale
// vector and reports a missed inference.
class RemoteAgentPolicy : public AgentPolicy {
 public:
  std::string id() const override { return "remote"; }

  void deliver(const AgentActionMessage& m) {
    std::lock_guard lock(mutex_);
    pending_ = m.vector;
  }

  AgentActionVector decide(const AgentObservation&) override {
    std::lock_guard lock(mutex_);
    if (!pending_) throw std::runtime_error("missed inference");
    auto v = *pending_;
    pending_.reset();
    return v;
  }

 private:
  std::mutex mutex_;
  std::optional<AgentActionVector> pending_;
};

class Session {
 public:
  explicit Session(SessionConfig config) : config_(std::move(config)) {
    config_.validate();
    predicates_ = PredicateRegistry::builtin(config_.arena.field_half_length);
    for (std::size_t i = 0; i < config_.players.size(); ++i) {
      const auto& p = config_.players[i];
      Slot slot;
      slot.name = p.name;
      slot.role = p.role;
      slot.source_id = static_cast<std::uint32_t>(i);
      if (is_human(p.source)) {
        slot.ctx = InterpreterContext{p.role,        p.mapping, config_.assignment, config_.profile,
                                      standard_layout(), config_.dead_zones, slot.source_id};
        switch (p.source) {
          case SourceKind::Idle: slot.input = std::make_shared<IdleSource>(); break;
          case SourceKind::Script:
            slot.input = std::make_shared<ScriptSource>(ScriptSource::from_file(p.source_detail));
            break;
          case SourceKind::Device: slot.input = std::make_shared<DeviceSource>(p.source_detail); break;
          case SourceKind::Remote: slot.input = std::make_shared<RemoteSource>(); break;
          default: break;
        }
      } else {
        slot.schedule.period = config_.agent_period;
        if (p.source == SourceKind::RemoteAgent) {
          slot.policy = std::make_shared<RemoteAgentPolicy>();
        } else {
          slot.policy = std::make_shared<HeuristicPolicy>(config_.agent_params);
        }
      }
      slots_.push_back(std::move(slot));
    }
    if (config_.opponent == "heuristic") {
      opponent_ = std::make_shared<HeuristicPolicy>(config_.agent_params);
    }
  }

  const SessionConfig& config() const noexcept { return config_; }

  void set_source(const std::string& player, std::shared_ptr<InputSource> source) {
    slot(player).input = std::move(source);
  }
  void set_policy(const std::string& player, std::shared_ptr<AgentPolicy> policy) {
    slot(player).policy = std::move(policy);
  }
  void set_opponent(std::shared_ptr<AgentPolicy> policy) { opponent_ = std::move(policy); }

  std::shared_ptr<InputSource> source(const std::string& player) { return slot(player).input; }
  std::shared_ptr<AgentPolicy> policy(const std::string& player) { return slot(player).policy; }

  // `live` paces ticks to wall-clock 120 Hz, stepping without sleeping to
  // catch up when behind; headless runs flat out.
  MatchOutcome run(const SessionHooks& hooks = {}, bool live = false) {
    const auto& cfg = config_.arena;
    SimWorld world = make_scenario(config_.scenario, cfg);
    for (std::size_t i = 0; i < world.cars.size(); ++i) {
      world.cars[i].is_bot = world.cars[i].team == 1 && opponent_ != nullptr;
    }
    MatchOutcome out;
    auto& log = out.log;
    log.cars = world.cars.size();
    log.tick_rate = cfg.tick_rate;

    auto emit = [&](const EventMessage& e) {
      log.events.push_back(e);
      if (hooks.on_event) hooks.on_event(e);
    };
    auto stage = [&](std::string_view s, std::uint64_t t) {
      if (hooks.on_stage) hooks.on_stage(s, t);
    };

    std::vector<EventMessage> sim_events;
    if (world.phase == Phase::Kickoff) {
      world = reset_kickoff(std::move(world), cfg);
      sim_events.push_back({"kickoff", -1, world.tick});
      emit(sim_events.back());
    }

    TraceHasher hasher;
    hasher.add(world);
    std::vector<VirtualControllerState> controllers(world.cars.size());
    AgentSchedule opponent_schedule;
    opponent_schedule.period = config_.agent_period;
    const auto opponent_assignment = uniform_assignment(config_.profile, Control::CopilotOnly);
    const auto base_policies = default_policy_table(config_.profile);
    std::vector<bool> disconnected(slots_.size(), false);

    const auto period = std::chrono::nanoseconds(1'000'000'000 / cfg.tick_rate);
    auto next_deadline = std::chrono::steady_clock::now();

    while (world.phase != Phase::Ended) {
      if (hooks.should_stop && hooks.should_stop()) break;
      const std::uint64_t t = world.tick;
      const GameState latest = snapshot_state(world, cfg);
      const bool suspended = suspend_on_pause(latest.ui);

      std::vector<InputEntry> entries;
      stage("interpret", t);
      for (std::size_t i = 0; i < slots_.size(); ++i) {
        auto& s = slots_[i];
        if (!s.input) continue;
        auto raw = s.input->sample(t);
        if (!raw) {
          if (!disconnected[i]) emit({"source_disconnected", -1, t, s.name});
          disconnected[i] = true;
          s.previous = {};
          continue;
        }
        if (disconnected[i]) emit({"source_reconnected", -1, t, s.name});
        disconnected[i] = false;
        if (suspended) continue;
        for (auto& e : interpret_state(*raw, s.ctx, t, s.previous)) entries.push_back(std::move(e));
        s.previous = std::move(*raw);
      }
      const std::size_t human_entries = entries.size();

      stage("agent", t);
      for (auto& s : slots_) {
        if (!s.policy) continue;
        const std::span<const InputEntry> pilot_view(entries.data(), human_entries);
        AgentObservation obs{latest, 0, compute_derived(latest, 0), pilot_view};
        auto r = schedule_tick(s.schedule, t, obs, *s.policy);
        s.schedule = r.schedule;
        if (r.warning) {
          auto w = *r.warning;
          if (w.detail == "missed inference") w.kind = "missed_inference";
          emit(w);
        }
        for (auto& e : mask_actions(r.vector, config_.assignment, t, config_.profile, s.source_id)) {
          entries.push_back(std::move(e));
        }
      }

      stage("arbitrate", t);
      std::vector<std::string> warnings;
      ArbitrationContext actx{&latest, &predicates_, &warnings};
      auto frame = arbitrate_frame(entries, config_.policies, config_.profile, t, actx);
      for (const auto& w : warnings) emit({"policy_warning", -1, t, w});

      stage("apply", t);
      const auto commands = frame_to_commands(frame, default_game_mapping());
      controllers[0] = virtual_apply(commands, controllers[0]);
      if (opponent_) {
        for (std::size_t i = 0; i < world.cars.size(); ++i) {
          if (world.cars[i].team != 1) continue;
          AgentObservation obs{latest, i, compute_derived(latest, i), {}};
          auto r = schedule_tick(opponent_schedule, t, obs, *opponent_);
          opponent_schedule = r.schedule;
          auto opp = mask_actions(r.vector, opponent_assignment, t, config_.profile);
          auto opp_frame = arbitrate_frame(opp, base_policies, config_.profile, t);
          const auto opp_cmds = frame_to_commands(opp_frame, default_game_mapping());
          controllers[i] = virtual_apply(opp_cmds, controllers[i]);
        }
      }

      for (const auto& e : entries) {
        const auto& name = e.source() < slots_.size() ? slots_[e.source()].name : std::string();
        log.inputs.push_back({t, e.role(), name, e.action(), e.value()});
      }
      log.frames.push_back({t, frame});
      for (std::size_t i = 0; i < controllers.size(); ++i) {
        log.controllers.push_back({t, i, controllers[i]});
      }
      if (hooks.on_overlay) {
        hooks.on_overlay(overlay_for_tick(t, entries, base_policies, config_.profile));
      }

      stage("step", t);
      std::vector<EventMessage> events;
      step_in_place(world, controllers, cfg, events);
      hasher.add(world);
      if (hooks.on_snapshot) hooks.on_snapshot(snapshot_state(world, cfg));
      for (const auto& e : events) {
        sim_events.push_back(e);
        emit(e);
      }

      if (live) {
        next_deadline += period;
        const auto now = std::chrono::steady_clock::now();
        if (next_deadline > now) {
          std::this_thread::sleep_until(next_deadline);
        }
      }
    }

    out.result.scores = world.scores;
    out.result.goal_differential = world.scores[0] - world.scores[1];
    out.result.duration_seconds = static_cast<double>(world.tick) / cfg.tick_rate;
    out.result.events = std::move(sim_events);
    out.result.trace_hash = hasher.value();
    last_world_ = world;
    return out;
  }

  const SimWorld& last_world() const noexcept { return last_world_; }

 private:
  struct Slot {
    std::string name;
    Role role = Role::Pilot;
    std::uint32_t source_id = 0;
    InterpreterContext ctx;
    std::shared_ptr<InputSource> input;
    ControllerState previous;  // last interpreted sample
    std::shared_ptr<AgentPolicy> policy;
    AgentSchedule schedule;
  };

  Slot& slot(const std::string& player) {
    for (auto& s : slots_) {
      if (s.name == player) return s;
    }
    throw ConfigError("no player named '" + player + "'");
  }

  SessionConfig config_;
  PredicateRegistry predicates_;
  std::vector<Slot> slots_;
  std::shared_ptr<AgentPolicy> opponent_;
  SimWorld last_world_;
};

inline MatchOutcome run_match(const SessionConfig& config, const SessionHooks& hooks = {},
                              bool live = false) {
  Session session(config);
  return session.run(hooks, live);
}

// Rebuilds the match from the controller records of a tick log.
inline MatchResult replay_log(const TickLog& log, const SessionConfig& config) {
  const auto& cfg = config.arena;
  SimWorld start = make_scenario(config.scenario, cfg);
  std::vector<EventMessage> events;
  if (start.phase == Phase::Kickoff) {
    start = reset_kickoff(std::move(start), cfg);
    events.push_back({"kickoff", -1, start.tick});
  }
  auto r = replay(log.input_log(), cfg, &start);
  MatchResult m;
  m.scores = r.world.scores;
  m.goal_differential = r.world.scores[0] - r.world.scores[1];
  m.duration_seconds = static_cast<double>(r.world.tick) / cfg.tick_rate;
  m.trace_hash = r.trace_hash;
  for (auto& e : r.events) events.push_back(std::move(e));
  m.events = std::move(events);
  return m;
}

}  // namespace sharedctl
