#pragma once

// Command interpreter: turns one player's raw controller input into input
// entries for the actions that player is allowed to drive.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"

namespace sharedctl {

// Magnitudes below these thresholds snap to 0 before normalization.
struct DeadZones {
  double trigger = 0.02;
  double stick = 0.05;
};

struct InterpreterContext {
  Role role = Role::Pilot;
  ControllerMapping mapping;
  ActionAssignment assignment;
  ActionProfile profile = arena_profile();
  ControllerLayout layout = standard_layout();
  DeadZones dead_zones;
  std::uint32_t source = 0;

  // Throws ConfigError listing every violation of mapping or assignment.
  void validate() const {
    auto m = validate_mapping(mapping, profile, layout);
    auto a = validate_assignment(assignment, profile);
    std::string msg;
    for (const auto& v : m.violations) msg += v + "; ";
    for (const auto& v : a.violations) msg += v + "; ";
    if (!msg.empty()) throw ConfigError("invalid interpreter context: " + msg);
  }
};

namespace detail {

inline double snap(double v, double dead_zone) { return std::abs(v) < dead_zone ? 0.0 : v; }

}  // namespace detail

// Value of a left/right button pair driving a bipolar action. Both pressed
// cancel out.
inline double normalize_button_pair(bool negative_pressed, bool positive_pressed) {
  return (positive_pressed ? 1.0 : 0.0) - (negative_pressed ? 1.0 : 0.0);
}

inline double normalize_element_value(const InputCommand& cmd, ValueKind kind,
                                      Axis axis = Axis::Horizontal,
                                      const DeadZones& dz = DeadZones{}) {
  const auto& v = cmd.intensity();
  switch (cmd.element().kind) {
    case ElementKind::Button:
      if (kind == ValueKind::BipolarContinuous) {
        throw DomainError("a single button cannot drive a bipolar action");
      }
      return v.x != 0.0 ? 1.0 : 0.0;
    case ElementKind::Trigger:
      if (kind != ValueKind::UnipolarContinuous) {
        throw DomainError("trigger '" + cmd.element().id + "' can only drive unipolar actions");
      }
      return detail::snap(v.x, dz.trigger);
    case ElementKind::StickAxisPair:
      if (kind != ValueKind::BipolarContinuous) {
        throw DomainError("stick '" + cmd.element().id + "' can only drive bipolar actions");
      }
      return detail::snap(axis == Axis::Horizontal ? v.x : v.y, dz.stick);
  }
  throw DomainError("unknown element kind");
}

// Single-command view. A button that belongs to a designated pair is read
// with its partner released; interpret_state resolves pairs properly.
inline std::optional<InputEntry> interpret(const InputCommand& cmd, const InterpreterContext& ctx,
                                           std::uint64_t tick) {
  for (const auto& b : ctx.mapping.bindings) {
    const bool negative = b.element == cmd.element().id;
    const bool positive = b.paired && *b.paired == cmd.element().id;
    if (!negative && !positive) continue;

    auto action = find_action(ctx.profile, b.action);
    if (!action) return std::nullopt;
    auto control = ctx.assignment.find(action->id);
    if (control == ctx.assignment.end() || !permits(control->second, ctx.role)) {
      return std::nullopt;
    }

    double value = 0.0;
    if (b.paired) {
      if (cmd.element().kind != ElementKind::Button) {
        throw DomainError("button pair fed a non-button command");
      }
      const bool pressed = cmd.intensity().x != 0.0;
      value = normalize_button_pair(negative && pressed, positive && pressed);
    } else {
      value = normalize_element_value(cmd, action->kind, b.axis, ctx.dead_zones);
    }
    return InputEntry(*action, value, 1.0, ctx.role, tick, ctx.source);
  }
  return std::nullopt;
}

// Interprets a full controller sample taken at a tick boundary. A binding
// yields an entry while any of its elements is off neutral, and a 0 entry on
// the sample where it was released (active in `previous`). Bindings never
// touched yield nothing, so an idle player does not pull averages to 0.
inline std::vector<InputEntry> interpret_state(const ControllerState& raw,
                                               const InterpreterContext& ctx,
                                               std::uint64_t tick,
                                               const ControllerState& previous = {}) {
  std::vector<InputEntry> out;
  for (const auto& b : ctx.mapping.bindings) {
    auto action = find_action(ctx.profile, b.action);
    if (!action) continue;
    auto control = ctx.assignment.find(action->id);
    if (control == ctx.assignment.end() || !permits(control->second, ctx.role)) continue;
    auto touched = [&](const ControllerState& st) {
      return st.get(b.element) != Intensity{} || (b.paired && st.get(*b.paired) != Intensity{});
    };
    if (!touched(raw) && !touched(previous)) continue;

    double value = 0.0;
    if (b.paired) {
      value = normalize_button_pair(raw.get(b.element).x != 0.0, raw.get(*b.paired).x != 0.0);
    } else {
      auto element = find_element(ctx.layout, b.element);
      if (!element) continue;
      InputCommand cmd(*element, raw.get(b.element));
      value = normalize_element_value(cmd, action->kind, b.axis, ctx.dead_zones);
    }
    out.emplace_back(*action, value, 1.0, ctx.role, tick, ctx.source);
  }
  return out;
}

}  // namespace sharedctl
