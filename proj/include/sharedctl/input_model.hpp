#pragma once

// Core vocabulary shared by every stage of the pipeline: controller
// elements, game actions, roles, per-player mappings, action assignments and
// merging-policy tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sharedctl/error.hpp"

namespace sharedctl {

// ---------------------------------------------------------------------------
// Controller elements and commands

enum class ElementKind { Button, Trigger, StickAxisPair };

using ElementId = std::string;

struct InputElement {
  ElementKind kind;
  ElementId id;

  friend bool operator==(const InputElement&, const InputElement&) = default;
};

inline std::string_view to_string(ElementKind k) {
  switch (k) {
    case ElementKind::Button: return "button";
    case ElementKind::Trigger: return "trigger";
    case ElementKind::StickAxisPair: return "stick";
  }
  return "?";
}

// Intensity of one element. Buttons and triggers use x only; sticks use both
// axes.
struct Intensity {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Intensity&, const Intensity&) = default;
};

inline bool intensity_in_domain(ElementKind kind, const Intensity& v) {
  if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
  switch (kind) {
    case ElementKind::Button: return (v.x == 0.0 || v.x == 1.0) && v.y == 0.0;
    case ElementKind::Trigger: return v.x >= 0.0 && v.x <= 1.0 && v.y == 0.0;
    case ElementKind::StickAxisPair:
      return v.x >= -1.0 && v.x <= 1.0 && v.y >= -1.0 && v.y <= 1.0;
  }
  return false;
}

class InputCommand {
 public:
  InputCommand(InputElement element, Intensity intensity)
      : element_(std::move(element)), intensity_(intensity) {
    if (!intensity_in_domain(element_.kind, intensity_)) {
      throw DomainError("intensity out of domain for " + std::string(to_string(element_.kind)) +
                        " '" + element_.id + "'");
    }
  }

  static InputCommand button(ElementId id, double value) {
    return {{ElementKind::Button, std::move(id)}, {value, 0.0}};
  }
  static InputCommand trigger(ElementId id, double value) {
    return {{ElementKind::Trigger, std::move(id)}, {value, 0.0}};
  }
  static InputCommand stick(ElementId id, double x, double y) {
    return {{ElementKind::StickAxisPair, std::move(id)}, {x, y}};
  }

  const InputElement& element() const noexcept { return element_; }
  const Intensity& intensity() const noexcept { return intensity_; }

  friend bool operator==(const InputCommand&, const InputCommand&) = default;

 private:
  InputElement element_;
  Intensity intensity_;
};

// Sampled state of every element of one controller, physical or virtual.
// Neutral elements are not stored, so two states compare equal exactly when
// every element reads the same.
class ControllerState {
 public:
  Intensity get(const ElementId& id) const {
    auto it = values_.find(id);
    return it == values_.end() ? Intensity{} : it->second;
  }

  void set(const ElementId& id, Intensity v) {
    if (v == Intensity{}) {
      values_.erase(id);
    } else {
      values_[id] = v;
    }
  }

  void apply(const InputCommand& cmd) { set(cmd.element().id, cmd.intensity()); }

  const std::map<ElementId, Intensity>& values() const noexcept { return values_; }

  friend bool operator==(const ControllerState&, const ControllerState&) = default;

 private:
  std::map<ElementId, Intensity> values_;
};

using ControllerLayout = std::vector<InputElement>;

// Standard twin-stick gamepad layout (Xbox 360 element names).
inline const ControllerLayout& standard_layout() {
  static const ControllerLayout layout = {
      {ElementKind::Button, "A"},          {ElementKind::Button, "B"},
      {ElementKind::Button, "X"},          {ElementKind::Button, "Y"},
      {ElementKind::Button, "LeftBumper"}, {ElementKind::Button, "RightBumper"},
      {ElementKind::Button, "Back"},       {ElementKind::Button, "Start"},
      {ElementKind::Button, "LeftThumb"},  {ElementKind::Button, "RightThumb"},
      {ElementKind::Button, "DPadUp"},     {ElementKind::Button, "DPadDown"},
      {ElementKind::Button, "DPadLeft"},   {ElementKind::Button, "DPadRight"},
      {ElementKind::Trigger, "LeftTrigger"}, {ElementKind::Trigger, "RightTrigger"},
      {ElementKind::StickAxisPair, "LeftStick"}, {ElementKind::StickAxisPair, "RightStick"},
  };
  return layout;
}

inline std::optional<InputElement> find_element(const ControllerLayout& layout,
                                                std::string_view id) {
  auto it = std::find_if(layout.begin(), layout.end(),
                         [&](const InputElement& e) { return e.id == id; });
  if (it == layout.end()) return std::nullopt;
  return *it;
}

// ---------------------------------------------------------------------------
// Game actions

enum class ValueKind { Binary, UnipolarContinuous, BipolarContinuous };

using ActionId = std::string;

struct GameActionDescriptor {
  ActionId id;
  ValueKind kind;

  friend bool operator==(const GameActionDescriptor&, const GameActionDescriptor&) = default;
};

using ActionProfile = std::vector<GameActionDescriptor>;

namespace actions {
inline constexpr std::string_view kSteer = "Steer";
inline constexpr std::string_view kAccelerate = "Accelerate";
inline constexpr std::string_view kBrake = "Brake";
inline constexpr std::string_view kJump = "Jump";
inline constexpr std::string_view kBoost = "Boost";
inline constexpr std::string_view kHandbrake = "Handbrake";
}  // namespace actions

// The six driving actions of the built-in arena.
inline const ActionProfile& arena_profile() {
  static const ActionProfile profile = {
      {ActionId(actions::kSteer), ValueKind::BipolarContinuous},
      {ActionId(actions::kAccelerate), ValueKind::UnipolarContinuous},
      {ActionId(actions::kBrake), ValueKind::UnipolarContinuous},
      {ActionId(actions::kJump), ValueKind::Binary},
      {ActionId(actions::kBoost), ValueKind::Binary},
      {ActionId(actions::kHandbrake), ValueKind::Binary},
  };
  return profile;
}

inline std::optional<std::size_t> action_index(const ActionProfile& profile, std::string_view id) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i].id == id) return i;
  }
  return std::nullopt;
}

inline std::optional<GameActionDescriptor> find_action(const ActionProfile& profile,
                                                       std::string_view id) {
  if (auto i = action_index(profile, id)) return profile[*i];
  return std::nullopt;
}

inline bool value_in_domain(ValueKind kind, double v) {
  if (!std::isfinite(v)) return false;
  switch (kind) {
    case ValueKind::Binary: return v == 0.0 || v == 1.0;
    case ValueKind::UnipolarContinuous: return v >= 0.0 && v <= 1.0;
    case ValueKind::BipolarContinuous: return v >= -1.0 && v <= 1.0;
  }
  return false;
}

inline std::string_view to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Binary: return "binary";
    case ValueKind::UnipolarContinuous: return "unipolar";
    case ValueKind::BipolarContinuous: return "bipolar";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Roles and entries

enum class Role { Pilot, Copilot };

inline std::string_view to_string(Role r) { return r == Role::Pilot ? "pilot" : "copilot"; }

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "pilot" || s == "Pilot") return Role::Pilot;
  if (s == "copilot" || s == "Copilot") return Role::Copilot;
  return std::nullopt;
}

// One player's contribution to one action: the (value, confidence, role)
// triple the merging policies operate on. The value is any finite real; the
// per-action domain is enforced by InputEntry.
struct Contribution {
  double value = 0.0;
  double confidence = 1.0;
  Role role = Role::Pilot;
  std::uint64_t tick = 0;
  std::uint32_t source = 0;

  friend bool operator==(const Contribution&, const Contribution&) = default;
};

class InputEntry {
 public:
  InputEntry(const GameActionDescriptor& action, double value, double confidence, Role role,
             std::uint64_t tick, std::uint32_t source = 0)
      : action_(action.id), kind_(action.kind), c_{value, confidence, role, tick, source} {
    if (!value_in_domain(action.kind, value)) {
      throw DomainError("value " + std::to_string(value) + " outside " +
                        std::string(to_string(action.kind)) + " domain of '" + action.id + "'");
    }
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw DomainError("confidence outside [0,1]");
    }
  }

  const ActionId& action() const noexcept { return action_; }
  ValueKind kind() const noexcept { return kind_; }
  double value() const noexcept { return c_.value; }
  double confidence() const noexcept { return c_.confidence; }
  Role role() const noexcept { return c_.role; }
  std::uint64_t tick() const noexcept { return c_.tick; }
  std::uint32_t source() const noexcept { return c_.source; }
  const Contribution& contribution() const noexcept { return c_; }

  friend bool operator==(const InputEntry&, const InputEntry&) = default;

 private:
  ActionId action_;
  ValueKind kind_;
  Contribution c_;
};

// ---------------------------------------------------------------------------
// Controller mappings

enum class Axis { Horizontal, Vertical };

// One element (or designated button pair) driving one action. For a button
// pair, `element` is the negative (left) button and `paired` the positive one.
struct Binding {
  ElementId element;
  ActionId action;
  std::optional<ElementId> paired;
  Axis axis = Axis::Horizontal;

  friend bool operator==(const Binding&, const Binding&) = default;
};

struct ControllerMapping {
  std::vector<Binding> bindings;

  friend bool operator==(const ControllerMapping&, const ControllerMapping&) = default;
};

// Default driving-game mapping: left stick steers, right trigger accelerates,
// left trigger brakes, A jumps, B boosts, X handbrakes.
inline const ControllerMapping& default_game_mapping() {
  static const ControllerMapping mapping = {{
      {"LeftStick", ActionId(actions::kSteer)},
      {"RightTrigger", ActionId(actions::kAccelerate)},
      {"LeftTrigger", ActionId(actions::kBrake)},
      {"A", ActionId(actions::kJump)},
      {"B", ActionId(actions::kBoost)},
      {"X", ActionId(actions::kHandbrake)},
  }};
  return mapping;
}

struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline bool kind_compatible(ElementKind element, ValueKind action, bool button_pair) {
  if (button_pair) return element == ElementKind::Button && action == ValueKind::BipolarContinuous;
  switch (action) {
    case ValueKind::Binary: return element == ElementKind::Button;
    case ValueKind::UnipolarContinuous:
      return element == ElementKind::Trigger || element == ElementKind::Button;
    case ValueKind::BipolarContinuous: return element == ElementKind::StickAxisPair;
  }
  return false;
}

inline ValidationResult validate_mapping(const ControllerMapping& mapping,
                                         const ActionProfile& profile,
                                         const ControllerLayout& layout = standard_layout()) {
  ValidationResult result;
  std::set<ElementId> used;
  auto claim = [&](const ElementId& id) {
    if (!used.insert(id).second) result.violations.push_back("element '" + id + "' mapped twice");
  };
  for (const auto& b : mapping.bindings) {
    claim(b.element);
    if (b.paired) claim(*b.paired);

    auto action = find_action(profile, b.action);
    if (!action) {
      result.violations.push_back("unknown action '" + b.action + "'");
      continue;
    }
    auto element = find_element(layout, b.element);
    if (!element) {
      result.violations.push_back("unknown element '" + b.element + "'");
      continue;
    }
    if (b.paired) {
      auto partner = find_element(layout, *b.paired);
      if (!partner) {
        result.violations.push_back("unknown element '" + *b.paired + "'");
        continue;
      }
      if (partner->kind != ElementKind::Button) {
        result.violations.push_back("button pair '" + b.element + "+" + *b.paired +
                                    "' contains a non-button");
        continue;
      }
    }
    if (!kind_compatible(element->kind, action->kind, b.paired.has_value())) {
      result.violations.push_back("element '" + b.element + "' (" +
                                  std::string(to_string(element->kind)) + ") cannot drive " +
                                  std::string(to_string(action->kind)) + " action '" + b.action +
                                  "'");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Action assignment

enum class Control { PilotOnly, CopilotOnly, Overlapping };

inline std::string_view to_string(Control c) {
  switch (c) {
    case Control::PilotOnly: return "P";
    case Control::CopilotOnly: return "C";
    case Control::Overlapping: return "O";
  }
  return "?";
}

inline std::optional<Control> parse_control(std::string_view s) {
  if (s == "P" || s == "pilot") return Control::PilotOnly;
  if (s == "C" || s == "copilot") return Control::CopilotOnly;
  if (s == "O" || s == "overlap" || s == "overlapping") return Control::Overlapping;
  return std::nullopt;
}

inline bool permits(Control c, Role r) {
  switch (c) {
    case Control::PilotOnly: return r == Role::Pilot;
    case Control::CopilotOnly: return r == Role::Copilot;
    case Control::Overlapping: return true;
  }
  return false;
}

using ActionAssignment = std::map<ActionId, Control>;

enum class Taxonomy { Reciprocal, Disjoint, Hybrid };

inline std::string_view to_string(Taxonomy t) {
  switch (t) {
    case Taxonomy::Reciprocal: return "reciprocal";
    case Taxonomy::Disjoint: return "disjoint";
    case Taxonomy::Hybrid: return "hybrid";
  }
  return "?";
}

inline Taxonomy classify_assignment(const ActionAssignment& assignment) {
  std::size_t overlapping = 0;
  for (const auto& [action, control] : assignment) {
    if (control == Control::Overlapping) ++overlapping;
  }
  if (overlapping == assignment.size()) return Taxonomy::Reciprocal;
  if (overlapping == 0) return Taxonomy::Disjoint;
  return Taxonomy::Hybrid;
}

struct AssignmentValidation : ValidationResult {
  std::optional<Taxonomy> label;
};

inline AssignmentValidation validate_assignment(const ActionAssignment& assignment,
                                                const ActionProfile& profile) {
  AssignmentValidation result;
  for (const auto& a : profile) {
    if (!assignment.contains(a.id)) result.violations.push_back(a.id + " unassigned");
  }
  for (const auto& [action, control] : assignment) {
    if (!action_index(profile, action)) {
      result.violations.push_back("unknown action '" + action + "' in assignment");
    }
  }
  if (result.ok()) result.label = classify_assignment(assignment);
  return result;
}

inline ActionAssignment uniform_assignment(const ActionProfile& profile, Control c) {
  ActionAssignment a;
  for (const auto& d : profile) a[d.id] = c;
  return a;
}

// The thirteen action subdivisions chosen in the user study, P1..P13. Rows
// follow the arena profile order (Steer, Accelerate, Brake, Jump, Boost,
// Handbrake).
inline std::optional<ActionAssignment> study_preset(std::string_view name) {
  static constexpr std::array<std::string_view, 13> kColumns = {
      "PPCOPC", "PPPCCC", "OPPCCC", "PPCCPC", "PPPOCP", "PCCCCC", "PPPCPP",
      "PPCCCC", "PCCCCC", "PPPCCC", "PCCPPC", "CCCPPC", "CPCCPC",
  };
  if (name.size() < 2 || name[0] != 'P') return std::nullopt;
  int index = 0;
  for (char ch : name.substr(1)) {
    if (ch < '0' || ch > '9') return std::nullopt;
    index = index * 10 + (ch - '0');
  }
  if (index < 1 || index > static_cast<int>(kColumns.size())) return std::nullopt;
  const auto& column = kColumns[static_cast<std::size_t>(index - 1)];
  const auto& profile = arena_profile();
  ActionAssignment a;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    a[profile[i].id] = *parse_control(std::string_view(&column[i], 1));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Merging policies

enum class PolicyKind { BinaryDisjunction, ContinuousAverage, SelectPriority };

// A merging policy; `override_predicate`, when set, wraps the base policy so
// that only copilot contributions are merged while the named predicate holds.
struct MergePolicy {
  PolicyKind kind = PolicyKind::ContinuousAverage;
  Role priority = Role::Pilot;
  std::optional<std::string> override_predicate;

  friend bool operator==(const MergePolicy&, const MergePolicy&) = default;
};

using PolicyTable = std::map<ActionId, MergePolicy>;

inline std::string to_string(const MergePolicy& p) {
  std::string base;
  switch (p.kind) {
    case PolicyKind::BinaryDisjunction: base = "binary"; break;
    case PolicyKind::ContinuousAverage: base = "average"; break;
    case PolicyKind::SelectPriority: base = "select:" + std::string(to_string(p.priority)); break;
  }
  if (p.override_predicate) return "override:" + *p.override_predicate + ":" + base;
  return base;
}

inline MergePolicy default_policy_for(ValueKind kind) {
  return {kind == ValueKind::Binary ? PolicyKind::BinaryDisjunction
                                    : PolicyKind::ContinuousAverage};
}

// Accepts "binary", "average", "select:pilot", "select:copilot",
// "override:<predicate>" and "override:<predicate>:<base>".
inline MergePolicy parse_policy(std::string_view text, ValueKind kind) {
  if (text == "binary") return {PolicyKind::BinaryDisjunction};
  if (text == "average") return {PolicyKind::ContinuousAverage};
  if (text.starts_with("select:")) {
    auto role = parse_role(text.substr(7));
    if (!role) throw ConfigError("bad select role in policy '" + std::string(text) + "'");
    return {PolicyKind::SelectPriority, *role};
  }
  if (text.starts_with("override:")) {
    auto rest = text.substr(9);
    auto colon = rest.find(':');
    std::string predicate(rest.substr(0, colon));
    if (predicate.empty()) throw ConfigError("override policy needs a predicate");
    MergePolicy p = colon == std::string_view::npos ? default_policy_for(kind)
                                                    : parse_policy(rest.substr(colon + 1), kind);
    if (p.override_predicate) throw ConfigError("nested override policy");
    p.override_predicate = std::move(predicate);
    return p;
  }
  throw ConfigError("unknown merging policy '" + std::string(text) + "'");
}

inline bool policy_compatible(const MergePolicy& p, ValueKind kind) {
  switch (p.kind) {
    case PolicyKind::BinaryDisjunction: return kind == ValueKind::Binary;
    case PolicyKind::ContinuousAverage: return kind != ValueKind::Binary;
    case PolicyKind::SelectPriority: return true;
  }
  return false;
}

inline ValidationResult validate_policies(const PolicyTable& table, const ActionProfile& profile) {
  ValidationResult result;
  for (const auto& a : profile) {
    auto it = table.find(a.id);
    if (it == table.end()) {
      result.violations.push_back("no merging policy for " + a.id);
    } else if (!policy_compatible(it->second, a.kind)) {
      result.violations.push_back("policy '" + to_string(it->second) + "' incompatible with " +
                                  std::string(to_string(a.kind)) + " action " + a.id);
    }
  }
  for (const auto& [action, policy] : table) {
    if (!action_index(profile, action)) {
      result.violations.push_back("policy for unknown action '" + action + "'");
    }
  }
  return result;
}

// Binary actions merged by disjunction, continuous ones by averaging.
inline PolicyTable default_policy_table(const ActionProfile& profile) {
  PolicyTable t;
  for (const auto& a : profile) t[a.id] = default_policy_for(a.kind);
  return t;
}

}  // namespace sharedctl
