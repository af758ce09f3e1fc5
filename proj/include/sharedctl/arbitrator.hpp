#pragma once

// Command arbitrator: merges every player's entries per action and tick, then
// renders the merged frame onto the virtual controller.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"
#include "sharedctl/protocol.hpp"

namespace sharedctl {

using VirtualControllerState = ControllerState;

// Inclusive disjunction: 1 iff some contribution is non-zero.
inline double merge_binary(std::span<const Contribution> entries) {
  return std::any_of(entries.begin(), entries.end(),
                     [](const Contribution& e) { return e.value != 0.0; })
             ? 1.0
             : 0.0;
}

// Mean over the contributions present; 0 when there are none.
inline double merge_average(std::span<const Contribution> entries) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : entries) sum += e.value;
  return sum / static_cast<double>(entries.size());
}

// The priority role's value wins whenever that role contributed at all.
// Within one role: latest tick, then highest confidence, then lowest source id.
inline double merge_select(std::span<const Contribution> entries, Role priority) {
  auto better = [](const Contribution& a, const Contribution& b) {
    if (a.tick != b.tick) return a.tick > b.tick;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.source < b.source;
  };
  const Contribution* best = nullptr;
  for (const auto& e : entries) {
    if (!best) {
      best = &e;
      continue;
    }
    const bool e_prio = e.role == priority;
    const bool best_prio = best->role == priority;
    if (e_prio != best_prio) {
      if (e_prio) best = &e;
    } else if (better(e, *best)) {
      best = &e;
    }
  }
  return best ? best->value : 0.0;
}

// Applies the policy's base rule, ignoring any override wrapper.
inline double merge_base(std::span<const Contribution> entries, const MergePolicy& policy) {
  switch (policy.kind) {
    case PolicyKind::BinaryDisjunction: return merge_binary(entries);
    case PolicyKind::ContinuousAverage: return merge_average(entries);
    case PolicyKind::SelectPriority: return merge_select(entries, policy.priority);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Override predicates ("by AI" supervision)

using OverridePredicate = std::function<bool(const GameState&)>;

class PredicateRegistry {
 public:
  void add(std::string name, OverridePredicate p) { predicates_[std::move(name)] = std::move(p); }

  const OverridePredicate* find(const std::string& name) const {
    auto it = predicates_.find(name);
    return it == predicates_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& name) const { return predicates_.contains(name); }

  // Predicates judged from the point of view of team 0, the pilot's team,
  // which defends the goal at negative y.
  static PredicateRegistry builtin(double field_half_length = 5120.0) {
    PredicateRegistry r;
    r.add("always", [](const GameState&) { return true; });
    r.add("never", [](const GameState&) { return false; });
    r.add("ball_in_own_half", [](const GameState& s) { return s.ball.location.y < 0.0; });
    r.add("ball_airborne", [](const GameState& s) { return s.ball.location.z > 0.0; });
    r.add("ball_near_own_goal", [field_half_length](const GameState& s) {
      return s.ball.location.y < -0.6 * field_half_length;
    });
    return r;
  }

 private:
  std::map<std::string, OverridePredicate> predicates_;
};

// Merges only the copilot's contributions while the predicate holds, all of
// them otherwise. A throwing predicate, or no state to judge, falls back to
// the base policy over everything and appends a warning.
inline double merge_override(std::span<const Contribution> entries, const MergePolicy& base,
                             const OverridePredicate& predicate, const GameState* latest,
                             std::vector<std::string>* warnings = nullptr) {
  bool active = false;
  try {
    if (!latest) throw std::runtime_error("no game state available");
    active = predicate(*latest);
  } catch (const std::exception& e) {
    if (warnings) warnings->push_back(std::string("override predicate failed: ") + e.what());
    return merge_base(entries, base);
  }
  if (!active) return merge_base(entries, base);
  std::vector<Contribution> copilot;
  for (const auto& e : entries) {
    if (e.role == Role::Copilot) copilot.push_back(e);
  }
  return merge_base(copilot, base);
}

// ---------------------------------------------------------------------------
// Frames

struct MergedAction {
  ActionId action;
  double value = 0.0;
  bool from_pilot = false;
  bool from_copilot = false;

  friend bool operator==(const MergedAction&, const MergedAction&) = default;
};

struct MergedActionFrame {
  std::uint64_t tick = 0;
  std::vector<MergedAction> actions;  // one per profile action, profile order

  double value(std::string_view action) const {
    for (const auto& a : actions) {
      if (a.action == action) return a.value;
    }
    throw DomainError("frame has no action '" + std::string(action) + "'");
  }

  friend bool operator==(const MergedActionFrame&, const MergedActionFrame&) = default;
};

struct ArbitrationContext {
  const GameState* latest_state = nullptr;
  const PredicateRegistry* predicates = nullptr;
  std::vector<std::string>* warnings = nullptr;
};

inline MergedActionFrame arbitrate_frame(std::span<const InputEntry> entries,
                                         const PolicyTable& policies,
                                         const ActionProfile& profile, std::uint64_t tick,
                                         const ArbitrationContext& ctx = {}) {
  std::vector<std::vector<Contribution>> grouped(profile.size());
  MergedActionFrame frame;
  frame.tick = tick;
  frame.actions.reserve(profile.size());
  for (const auto& a : profile) frame.actions.push_back({a.id});

  for (const auto& e : entries) {
    auto i = action_index(profile, e.action());
    if (!i) throw ProtocolError("entry for unknown action '" + e.action() + "'");
    grouped[*i].push_back(e.contribution());
    (e.role() == Role::Pilot ? frame.actions[*i].from_pilot : frame.actions[*i].from_copilot) =
        true;
  }

  for (std::size_t i = 0; i < profile.size(); ++i) {
    auto it = policies.find(profile[i].id);
    if (it == policies.end()) throw ConfigError("no merging policy for " + profile[i].id);
    const auto& policy = it->second;
    double v = 0.0;
    if (policy.override_predicate) {
      const OverridePredicate* p =
          ctx.predicates ? ctx.predicates->find(*policy.override_predicate) : nullptr;
      if (p) {
        v = merge_override(grouped[i], policy, *p, ctx.latest_state, ctx.warnings);
      } else {
        if (ctx.warnings) {
          ctx.warnings->push_back("unknown override predicate '" + *policy.override_predicate +
                                  "'");
        }
        v = merge_base(grouped[i], policy);
      }
    } else {
      v = merge_base(grouped[i], policy);
    }
    frame.actions[i].value = v;
  }
  return frame;
}

// Renders each merged value onto the element the game binds to its action.
// Every layout element appears exactly once in the result, neutral when no
// action drives it.
inline std::vector<InputCommand> frame_to_commands(const MergedActionFrame& frame,
                                                   const ControllerMapping& game_mapping,
                                                   const ControllerLayout& layout =
                                                       standard_layout()) {
  std::map<ElementId, Intensity> values;
  for (const auto& b : game_mapping.bindings) {
    double v = 0.0;
    bool found = false;
    for (const auto& a : frame.actions) {
      if (a.action == b.action) {
        v = a.value;
        found = true;
        break;
      }
    }
    if (!found) continue;
    auto element = find_element(layout, b.element);
    if (!element) continue;
    if (b.paired) {
      values[b.element].x = v < 0.0 ? 1.0 : 0.0;
      values[*b.paired].x = v > 0.0 ? 1.0 : 0.0;
      continue;
    }
    auto& out = values[b.element];
    switch (element->kind) {
      case ElementKind::Button: out.x = v != 0.0 ? 1.0 : 0.0; break;
      case ElementKind::Trigger: out.x = std::clamp(v, 0.0, 1.0); break;
      case ElementKind::StickAxisPair:
        (b.axis == Axis::Horizontal ? out.x : out.y) = std::clamp(v, -1.0, 1.0);
        break;
    }
  }
  std::vector<InputCommand> commands;
  commands.reserve(layout.size());
  for (const auto& e : layout) {
    auto it = values.find(e.id);
    commands.emplace_back(e, it == values.end() ? Intensity{} : it->second);
  }
  return commands;
}

inline VirtualControllerState virtual_apply(std::span<const InputCommand> commands,
                                            VirtualControllerState state) {
  for (const auto& c : commands) state.apply(c);
  return state;
}

}  // namespace sharedctl
