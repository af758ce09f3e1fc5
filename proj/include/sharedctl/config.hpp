#pragma once

// Session configuration: a sectioned key/value text file (INI syntax) with
// [session], [player.<name>], [mapping.<name>], [assignment], [policies],
// [arena], [agent] and [interpreter] sections. The same sections travel over
// the wire as a JSON object of objects.

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sharedctl/agent.hpp"
#include "sharedctl/arena.hpp"
#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"
#include "sharedctl/interpreter.hpp"

namespace sharedctl {

using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

}  // namespace detail

inline ConfigSections parse_config_text(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ConfigSections out;
  for (const auto& [section, body] : pt) {
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    auto& dst = out[section];
    for (const auto& [key, value] : body) dst[key] = detail::unquote(value.data());
  }
  return out;
}

inline ConfigSections load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline ConfigSections config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config payload must be an object of sections");
  ConfigSections out;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    auto& dst = out[section];
    for (const auto& [key, value] : body.items()) {
      dst[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return out;
}

inline json config_to_json(const ConfigSections& sections) {
  json j = json::object();
  for (const auto& [section, body] : sections) {
    j[section] = json::object();
    for (const auto& [key, value] : body) j[section][key] = value;
  }
  return j;
}

// ---------------------------------------------------------------------------

enum class Mode { HumanCooperation, PartialAutomation, Hybrid };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::HumanCooperation: return "human_cooperation";
    case Mode::PartialAutomation: return "partial_automation";
    case Mode::Hybrid: return "hybrid";
  }
  return "?";
}

enum class SourceKind { Idle, Script, Device, Remote, Agent, RemoteAgent };

inline bool is_human(SourceKind k) { return k != SourceKind::Agent && k != SourceKind::RemoteAgent; }

struct PlayerConfig {
  std::string name;
  Role role = Role::Pilot;
  SourceKind source = SourceKind::Idle;
  std::string source_detail;  // script path, device path or policy id
  ControllerMapping mapping;
};

struct SessionConfig {
  Mode mode = Mode::PartialAutomation;
  std::vector<PlayerConfig> players;
  ActionProfile profile = arena_profile();
  ActionAssignment assignment = uniform_assignment(arena_profile(), Control::Overlapping);
  PolicyTable policies = default_policy_table(arena_profile());
  ArenaConfig arena;
  std::string opponent = "heuristic";  // heuristic | idle
  std::string scenario = "kickoff";
  std::string log_path;
  std::uint64_t agent_period = 15;
  HeuristicParams agent_params;
  DeadZones dead_zones;
  ConfigSections sections;  // the raw text this was built from

  std::size_t human_count() const {
    std::size_t n = 0;
    for (const auto& p : players) n += is_human(p.source) ? 1 : 0;
    return n;
  }
  std::size_t agent_count() const { return players.size() - human_count(); }

  ValidationResult check() const {
    ValidationResult r;
    if (players.empty()) r.violations.push_back("no player sources configured");
    switch (mode) {
      case Mode::HumanCooperation:
        if (human_count() < 2) r.violations.push_back("human cooperation needs two human sources");
        break;
      case Mode::PartialAutomation:
        if (agent_count() < 1) r.violations.push_back("partial automation needs an agent source");
        break;
      case Mode::Hybrid:
        if (human_count() < 1 || agent_count() < 1) {
          r.violations.push_back("hybrid mode needs a human and an agent source");
        }
        break;
    }
    std::size_t pilots = 0;
    for (const auto& p : players) {
      if (p.role == Role::Pilot) ++pilots;
      if (!is_human(p.source) && p.role != Role::Copilot) {
        r.violations.push_back("agent source '" + p.name + "' must have the copilot role");
      }
      if (is_human(p.source)) {
        for (auto& v : validate_mapping(p.mapping, profile).violations) {
          r.violations.push_back("mapping." + p.name + ": " + v);
        }
      }
    }
    if (!players.empty() && pilots == 0) r.violations.push_back("no pilot configured");
    for (auto& v : validate_assignment(assignment, profile).violations) {
      r.violations.push_back("assignment: " + v);
    }
    for (auto& v : validate_policies(policies, profile).violations) {
      r.violations.push_back("policies: " + v);
    }
    if (opponent != "heuristic" && opponent != "idle") {
      r.violations.push_back("unknown opponent '" + opponent + "'");
    }
    if (agent_period < 1) r.violations.push_back("agent period must be at least 1");
    try {
      arena.validate();
    } catch (const ConfigError& e) {
      r.violations.push_back(std::string("arena: ") + e.what());
    }
    return r;
  }

  void validate() const {
    auto r = check();
    if (r.ok()) return;
    std::string msg = "invalid session config:";
    for (const auto& v : r.violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
};

namespace detail {

inline double to_double(const std::string& section, const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(section + "." + key + ": expected a number");
  return d;
}

inline bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(section + "." + key + ": expected a boolean");
}

inline ControllerMapping parse_mapping(const std::map<std::string, std::string>& body) {
  ControllerMapping m;
  for (const auto& [key, value] : body) {
    if (key == "preset") {
      if (value != "default") throw ConfigError("unknown mapping preset '" + value + "'");
      for (const auto& b : default_game_mapping().bindings) m.bindings.push_back(b);
      continue;
    }
    Binding b;
    b.action = value;
    std::string element = key;
    if (auto plus = element.find('+'); plus != std::string::npos) {
      b.paired = element.substr(plus + 1);
      element = element.substr(0, plus);
    } else if (element.ends_with(".x")) {
      element.resize(element.size() - 2);
    } else if (element.ends_with(".y")) {
      element.resize(element.size() - 2);
      b.axis = Axis::Vertical;
    }
    b.element = element;
    m.bindings.push_back(b);
  }
  return m;
}

inline std::pair<SourceKind, std::string> parse_source(const std::string& s) {
  if (s == "idle") return {SourceKind::Idle, ""};
  if (s == "remote") return {SourceKind::Remote, ""};
  if (s.starts_with("script:")) return {SourceKind::Script, s.substr(7)};
  if (s.starts_with("device:")) return {SourceKind::Device, s.substr(7)};
  if (s == "agent:remote") return {SourceKind::RemoteAgent, ""};
  if (s.starts_with("agent:")) {
    auto id = s.substr(6);
    if (id != "heuristic") throw ConfigError("unknown agent policy '" + id + "'");
    return {SourceKind::Agent, id};
  }
  throw ConfigError("unknown player source '" + s + "'");
}

}  // namespace detail

inline SessionConfig build_session_config(const ConfigSections& sections) {
  using namespace detail;
  SessionConfig c;
  c.sections = sections;
  auto section = [&](const std::string& name) -> const std::map<std::string, std::string>* {
    auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  };

  for (const auto& [name, body] : sections) {
    static const std::vector<std::string> known = {"session", "assignment", "policies",
                                                   "arena",   "agent",      "interpreter"};
    if (name.starts_with("player.") || name.starts_with("mapping.")) continue;
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }

  if (auto s = section("session")) {
    for (const auto& [k, v] : *s) {
      if (k == "mode") {
        if (v == "human_cooperation") {
          c.mode = Mode::HumanCooperation;
        } else if (v == "partial_automation") {
          c.mode = Mode::PartialAutomation;
        } else if (v == "hybrid") {
          c.mode = Mode::Hybrid;
        } else {
          throw ConfigError("unknown mode '" + v + "'");
        }
      } else if (k == "match_seconds") {
        c.arena.match_seconds = to_double("session", k, v);
      } else if (k == "log") {
        c.log_path = v;
      } else if (k == "opponent") {
        c.opponent = v;
      } else if (k == "scenario") {
        c.scenario = v;
      } else if (k == "golden_goal") {
        c.arena.golden_goal = to_bool("session", k, v);
      } else {
        throw ConfigError("unknown key session." + k);
      }
    }
  }

  for (const auto& [name, body] : sections) {
    if (!name.starts_with("player.")) continue;
    PlayerConfig p;
    p.name = name.substr(7);
    if (p.name.empty()) throw ConfigError("player section needs a name");
    auto role = body.find("role");
    if (role == body.end()) throw ConfigError("player." + p.name + ".role missing");
    auto r = parse_role(role->second);
    if (!r) throw ConfigError("player." + p.name + ": unknown role '" + role->second + "'");
    p.role = *r;
    auto src = body.find("source");
    if (src == body.end()) throw ConfigError("player." + p.name + ".source missing");
    std::tie(p.source, p.source_detail) = parse_source(src->second);
    if (auto m = section("mapping." + p.name)) {
      p.mapping = parse_mapping(*m);
    } else {
      p.mapping = default_game_mapping();
    }
    c.players.push_back(std::move(p));
  }
  for (const auto& [name, body] : sections) {
    if (!name.starts_with("mapping.")) continue;
    const auto player = name.substr(8);
    if (std::none_of(c.players.begin(), c.players.end(),
                     [&](const PlayerConfig& p) { return p.name == player; })) {
      throw ConfigError("[" + name + "] has no matching [player." + player + "]");
    }
  }

  if (auto s = section("assignment")) {
    ActionAssignment a;
    if (auto p = s->find("preset"); p != s->end()) {
      auto preset = study_preset(p->second);
      if (!preset) throw ConfigError("unknown assignment preset '" + p->second + "'");
      a = *preset;
    }
    for (const auto& [k, v] : *s) {
      if (k == "preset") continue;
      auto control = parse_control(v);
      if (!control) throw ConfigError("assignment." + k + ": unknown control '" + v + "'");
      a[k] = *control;
    }
    c.assignment = std::move(a);
  }

  if (auto s = section("policies")) {
    for (const auto& [k, v] : *s) {
      auto action = find_action(c.profile, k);
      c.policies[k] = parse_policy(v, action ? action->kind : ValueKind::BipolarContinuous);
    }
  }

  if (auto s = section("arena")) {
    auto& a = c.arena;
    const std::map<std::string, double*> numbers = {
        {"field_half_length", &a.field_half_length},
        {"field_half_width", &a.field_half_width},
        {"goal_half_width", &a.goal_half_width},
        {"car_radius", &a.car_radius},
        {"car_acceleration", &a.car_acceleration},
        {"brake_deceleration", &a.brake_deceleration},
        {"boost_thrust", &a.boost_thrust},
        {"max_speed", &a.max_speed},
        {"max_reverse_speed", &a.max_reverse_speed},
        {"car_friction", &a.car_friction},
        {"turn_rate", &a.turn_rate},
        {"turn_reference_speed", &a.turn_reference_speed},
        {"handbrake_turn_multiplier", &a.handbrake_turn_multiplier},
        {"handbrake_grip", &a.handbrake_grip},
        {"jump_air_seconds", &a.jump_air_seconds},
        {"jump_reach", &a.jump_reach},
        {"ball_radius", &a.ball_radius},
        {"ball_friction", &a.ball_friction},
        {"ball_restitution", &a.ball_restitution},
        {"gravity", &a.gravity},
        {"hit_height", &a.hit_height},
        {"jump_hit_strength", &a.jump_hit_strength},
        {"boost_capacity", &a.boost_capacity},
        {"boost_drain", &a.boost_drain},
        {"initial_boost", &a.initial_boost},
        {"pad_recharge", &a.pad_recharge},
        {"pad_respawn_seconds", &a.pad_respawn_seconds},
        {"pad_radius", &a.pad_radius},
    };
    for (const auto& [k, v] : *s) {
      if (auto it = numbers.find(k); it != numbers.end()) {
        *it->second = to_double("arena", k, v);
      } else if (k == "seed") {
        a.seed = static_cast<std::uint64_t>(to_double("arena", k, v));
      } else if (k == "tick_rate") {
        a.tick_rate = static_cast<int>(to_double("arena", k, v));
      } else if (k == "cars_per_team") {
        a.cars_per_team = static_cast<int>(to_double("arena", k, v));
      } else {
        throw ConfigError("unknown key arena." + k);
      }
    }
  }
  c.agent_params.field_half_length = c.arena.field_half_length;

  if (auto s = section("agent")) {
    auto& p = c.agent_params;
    const std::map<std::string, double*> numbers = {
        {"k_steer", &p.k_steer},         {"boost_cone", &p.boost_cone},
        {"boost_reserve", &p.boost_reserve}, {"jump_radius", &p.jump_radius},
        {"jump_max_ball_height", &p.jump_max_ball_height}, {"drift_angle", &p.drift_angle},
        {"approach_offset", &p.approach_offset},
    };
    for (const auto& [k, v] : *s) {
      if (auto it = numbers.find(k); it != numbers.end()) {
        *it->second = to_double("agent", k, v);
      } else if (k == "period") {
        const double d = to_double("agent", k, v);
        if (d < 1) throw ConfigError("agent.period must be at least 1");
        c.agent_period = static_cast<std::uint64_t>(d);
      } else {
        throw ConfigError("unknown key agent." + k);
      }
    }
  }

  if (auto s = section("interpreter")) {
    for (const auto& [k, v] : *s) {
      if (k == "trigger_deadzone") {
        c.dead_zones.trigger = to_double("interpreter", k, v);
      } else if (k == "stick_deadzone") {
        c.dead_zones.stick = to_double("interpreter", k, v);
      } else {
        throw ConfigError("unknown key interpreter." + k);
      }
    }
  }
  return c;
}

inline SessionConfig load_session_config(const std::string& path) {
  return build_session_config(load_config_file(path));
}

// Build errors and semantic violations in one list, for protocol replies.
inline ValidationResult check_config(const ConfigSections& sections) {
  try {
    return build_session_config(sections).check();
  } catch (const ConfigError& e) {
    return {{e.what()}};
  }
}

}  // namespace sharedctl
