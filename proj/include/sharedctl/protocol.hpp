#pragma once

// Game-state snapshot schema, its newline-delimited JSON encoding and the
// message envelope shared by the local stream socket and WebSocket clients.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"

namespace sharedctl {

using nlohmann::json;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kAngleTolerance = 1e-9;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct Rotation {
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;

  friend bool operator==(const Rotation&, const Rotation&) = default;
};

// Full rigid-body state; the ball and every car carry one.
struct PhysicsState {
  Vec3 location;
  Rotation rotation;
  Vec3 velocity;
  Vec3 angular_velocity;

  friend bool operator==(const PhysicsState&, const PhysicsState&) = default;
};

using BallState = PhysicsState;

struct CarState {
  PhysicsState physics;
  int team_id = 0;
  bool demolished = false;
  bool ground_contact = true;
  bool jumped = false;
  double boost = 0.0;  // percent, [0, 100]
  bool is_bot = false;

  friend bool operator==(const CarState&, const CarState&) = default;
};

struct TeamInfo {
  int team_id = 0;
  int score = 0;

  friend bool operator==(const TeamInfo&, const TeamInfo&) = default;
};

struct GameInfo {
  double seconds_elapsed = 0.0;

  friend bool operator==(const GameInfo&, const GameInfo&) = default;
};

struct BoostPadState {
  int pad_id = 0;
  bool active = true;
  double respawn_remaining = 0.0;  // seconds, 0 while active

  friend bool operator==(const BoostPadState&, const BoostPadState&) = default;
};

enum class UiState { InGame, Paused, Other };

inline std::string_view to_string(UiState u) {
  switch (u) {
    case UiState::InGame: return "in_game";
    case UiState::Paused: return "paused";
    case UiState::Other: return "other";
  }
  return "other";
}

struct GameState {
  BallState ball;
  std::vector<CarState> cars;
  std::vector<TeamInfo> teams;
  GameInfo info;
  std::vector<BoostPadState> pads;
  UiState ui = UiState::InGame;
  std::uint64_t tick = 0;

  friend bool operator==(const GameState&, const GameState&) = default;
};

struct DerivedFeatures {
  double distance_car_ball = 0.0;
  Vec3 relative_direction;  // unit vector car -> ball, zero when coincident
  Vec3 relative_velocity;   // ball - car
};

// Maps theta onto [-pi, pi]. Both endpoints are valid results and compare
// equal under kAngleTolerance.
inline double normalize_angle(double theta) {
  if (!std::isfinite(theta)) throw DomainError("cannot normalize a non-finite angle");
  return std::remainder(theta, 2.0 * kPi);
}

inline bool angle_normalized(double theta) {
  return std::isfinite(theta) && theta >= -kPi - kAngleTolerance && theta <= kPi + kAngleTolerance;
}

inline DerivedFeatures compute_derived(const GameState& state, std::size_t car_index) {
  if (car_index >= state.cars.size()) {
    throw DomainError("car index " + std::to_string(car_index) + " out of range");
  }
  const auto& car = state.cars[car_index].physics;
  DerivedFeatures f;
  const Vec3 delta = state.ball.location - car.location;
  f.distance_car_ball = delta.norm();
  if (f.distance_car_ball > 0.0) f.relative_direction = delta * (1.0 / f.distance_car_ball);
  f.relative_velocity = state.ball.velocity - car.velocity;
  return f;
}

inline bool suspend_on_pause(UiState ui) { return ui != UiState::InGame; }

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail {

// Rounds to 9 significant decimal digits.
inline double wire_number(double v) {
  if (!std::isfinite(v)) throw EncodingError("non-finite number in game state");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

inline json encode_vec(const Vec3& v) {
  return {{"x", wire_number(v.x)}, {"y", wire_number(v.y)}, {"z", wire_number(v.z)}};
}

inline json encode_rotation(const Rotation& r) {
  for (double a : {r.pitch, r.yaw, r.roll}) {
    if (!angle_normalized(a)) {
      throw EncodingError("rotation component " + std::to_string(a) + " outside [-pi, pi]");
    }
  }
  return {{"pitch", wire_number(r.pitch)}, {"yaw", wire_number(r.yaw)},
          {"roll", wire_number(r.roll)}};
}

inline json encode_physics(const PhysicsState& p) {
  return {{"location", encode_vec(p.location)},
          {"rotation", encode_rotation(p.rotation)},
          {"velocity", encode_vec(p.velocity)},
          {"angular_velocity", encode_vec(p.angular_velocity)}};
}

inline const json& field(const json& j, const char* name, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw SchemaError(path.empty() ? name : path + "." + name, "missing field");
  return *it;
}

inline std::string join(const std::string& path, const char* name) {
  return path.empty() ? name : path + "." + name;
}

inline double number(const json& j, const char* name, const std::string& path) {
  const auto& v = field(j, name, path);
  if (!v.is_number()) throw SchemaError(join(path, name), "expected a number");
  return v.get<double>();
}

inline bool boolean(const json& j, const char* name, const std::string& path) {
  const auto& v = field(j, name, path);
  if (!v.is_boolean()) throw SchemaError(join(path, name), "expected a boolean");
  return v.get<bool>();
}

inline std::int64_t integer(const json& j, const char* name, const std::string& path) {
  const auto& v = field(j, name, path);
  if (!v.is_number_integer()) throw SchemaError(join(path, name), "expected an integer");
  return v.get<std::int64_t>();
}

inline const json& array(const json& j, const char* name, const std::string& path) {
  const auto& v = field(j, name, path);
  if (!v.is_array()) throw SchemaError(join(path, name), "expected an array");
  return v;
}

inline Vec3 decode_vec(const json& j, const char* name, const std::string& path) {
  const auto& v = field(j, name, path);
  auto p = join(path, name);
  return {number(v, "x", p), number(v, "y", p), number(v, "z", p)};
}

inline Rotation decode_rotation(const json& j, const std::string& path) {
  const auto& v = field(j, "rotation", path);
  auto p = join(path, "rotation");
  return {number(v, "pitch", p), number(v, "yaw", p), number(v, "roll", p)};
}

inline PhysicsState decode_physics(const json& j, const std::string& path) {
  return {decode_vec(j, "location", path), decode_rotation(j, path),
          decode_vec(j, "velocity", path), decode_vec(j, "angular_velocity", path)};
}

}  // namespace detail

inline json state_to_json(const GameState& s) {
  using namespace detail;
  if (s.teams.size() != 2) throw EncodingError("game state must carry exactly two teams");
  json cars = json::array();
  for (const auto& c : s.cars) {
    if (!(c.boost >= 0.0 && c.boost <= 100.0)) throw EncodingError("car boost outside [0, 100]");
    cars.push_back({{"physics", encode_physics(c.physics)},
                    {"team_id", c.team_id},
                    {"demolished", c.demolished},
                    {"ground_contact", c.ground_contact},
                    {"jumped", c.jumped},
                    {"boost", wire_number(c.boost)},
                    {"is_bot", c.is_bot}});
  }
  json teams = json::array();
  for (const auto& t : s.teams) teams.push_back({{"team_id", t.team_id}, {"score", t.score}});
  json pads = json::array();
  for (const auto& p : s.pads) {
    pads.push_back({{"pad_id", p.pad_id},
                    {"active", p.active},
                    {"respawn_remaining", wire_number(p.respawn_remaining)}});
  }
  return {{"ball", encode_physics(s.ball)},
          {"cars", std::move(cars)},
          {"teams", std::move(teams)},
          {"info", {{"seconds_elapsed", wire_number(s.info.seconds_elapsed)}}},
          {"pads", std::move(pads)},
          {"ui", to_string(s.ui)},
          {"tick", s.tick}};
}

inline GameState state_from_json(const json& j) {
  using namespace detail;
  GameState s;
  s.ball = decode_physics(field(j, "ball", ""), "ball");
  const auto& cars = array(j, "cars", "");
  for (std::size_t i = 0; i < cars.size(); ++i) {
    auto p = "cars[" + std::to_string(i) + "]";
    const auto& c = cars[i];
    CarState car;
    car.physics = decode_physics(field(c, "physics", p), p + ".physics");
    car.team_id = static_cast<int>(integer(c, "team_id", p));
    car.demolished = boolean(c, "demolished", p);
    car.ground_contact = boolean(c, "ground_contact", p);
    car.jumped = boolean(c, "jumped", p);
    car.boost = number(c, "boost", p);
    car.is_bot = boolean(c, "is_bot", p);
    s.cars.push_back(car);
  }
  const auto& teams = array(j, "teams", "");
  for (std::size_t i = 0; i < teams.size(); ++i) {
    auto p = "teams[" + std::to_string(i) + "]";
    s.teams.push_back({static_cast<int>(integer(teams[i], "team_id", p)),
                       static_cast<int>(integer(teams[i], "score", p))});
  }
  s.info.seconds_elapsed = number(field(j, "info", ""), "seconds_elapsed", "info");
  const auto& pads = array(j, "pads", "");
  for (std::size_t i = 0; i < pads.size(); ++i) {
    auto p = "pads[" + std::to_string(i) + "]";
    s.pads.push_back({static_cast<int>(integer(pads[i], "pad_id", p)),
                      boolean(pads[i], "active", p), number(pads[i], "respawn_remaining", p)});
  }
  const auto& ui = field(j, "ui", "");
  if (!ui.is_string()) throw SchemaError("ui", "expected a string");
  const auto u = ui.get<std::string>();
  if (u == "in_game") {
    s.ui = UiState::InGame;
  } else if (u == "paused") {
    s.ui = UiState::Paused;
  } else if (u == "other") {
    s.ui = UiState::Other;
  } else {
    throw SchemaError("ui", "unknown ui state '" + u + "'");
  }
  const auto tick = integer(j, "tick", "");
  if (tick < 0) throw SchemaError("tick", "negative tick");
  s.tick = static_cast<std::uint64_t>(tick);
  return s;
}

inline json parse_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
}

// One newline-terminated JSON object.
inline std::string encode_state(const GameState& state) { return state_to_json(state).dump() + "\n"; }

inline GameState decode_state(std::string_view line) { return state_from_json(parse_line(line)); }

// ---------------------------------------------------------------------------
// Message envelope

enum class MessageType { State, Input, Event, Config, AgentAction, Frame };

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::State: return "state";
    case MessageType::Input: return "input";
    case MessageType::Event: return "event";
    case MessageType::Config: return "config";
    case MessageType::AgentAction: return "agent_action";
    case MessageType::Frame: return "frame";
  }
  return "?";
}

struct Envelope {
  MessageType type;
  json payload;
};

inline std::string encode_envelope(MessageType type, json payload) {
  json j = {{"type", to_string(type)}, {"payload", std::move(payload)}};
  return j.dump() + "\n";
}

inline Envelope decode_envelope(std::string_view line) {
  auto j = parse_line(line);
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string() || !j.contains("payload")) {
    throw ProtocolError("message is not a {type, payload} envelope");
  }
  const auto t = j["type"].get<std::string>();
  for (auto type : {MessageType::State, MessageType::Input, MessageType::Event, MessageType::Config,
                    MessageType::AgentAction, MessageType::Frame}) {
    if (t == to_string(type)) return {type, std::move(j["payload"])};
  }
  throw ProtocolError("unknown message type '" + t + "'");
}

// `input` payload: one element state of one player at a client tick.
struct InputMessage {
  std::string player;
  InputCommand command;
  std::uint64_t tick = 0;
};

inline json input_to_json(const InputMessage& m) {
  const auto& v = m.command.intensity();
  json intensity = m.command.element().kind == ElementKind::StickAxisPair ? json::array({v.x, v.y})
                                                                          : json(v.x);
  return {{"player", m.player},
          {"element", m.command.element().id},
          {"intensity", std::move(intensity)},
          {"tick", m.tick}};
}

inline InputMessage input_from_json(const json& j,
                                    const ControllerLayout& layout = standard_layout()) {
  using namespace detail;
  const auto& player = field(j, "player", "payload");
  const auto& element = field(j, "element", "payload");
  if (!player.is_string() || !element.is_string()) {
    throw SchemaError("payload", "player and element must be strings");
  }
  auto el = find_element(layout, element.get<std::string>());
  if (!el) throw ProtocolError("unknown element '" + element.get<std::string>() + "'");
  const auto& in = field(j, "intensity", "payload");
  Intensity v;
  if (in.is_array() && in.size() == 2 && in[0].is_number() && in[1].is_number()) {
    v = {in[0].get<double>(), in[1].get<double>()};
  } else if (in.is_number()) {
    v = {in.get<double>(), 0.0};
  } else {
    throw SchemaError("payload.intensity", "expected a number or [x, y]");
  }
  std::uint64_t tick = 0;
  if (j.contains("tick")) tick = static_cast<std::uint64_t>(integer(j, "tick", "payload"));
  try {
    return {player.get<std::string>(), InputCommand(*el, v), tick};
  } catch (const DomainError& e) {
    throw ProtocolError(e.what());
  }
}

// `event` payload.
struct EventMessage {
  std::string kind;  // goal | kickoff | match_end, plus warning kinds
  int team = -1;
  std::uint64_t tick = 0;
  std::string detail;

  friend bool operator==(const EventMessage&, const EventMessage&) = default;
};

inline json event_to_json(const EventMessage& e) {
  json j = {{"kind", e.kind}, {"team", e.team}, {"tick", e.tick}};
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j;
}

inline EventMessage event_from_json(const json& j) {
  using namespace detail;
  EventMessage e;
  const auto& kind = field(j, "kind", "payload");
  if (!kind.is_string()) throw SchemaError("payload.kind", "expected a string");
  e.kind = kind.get<std::string>();
  e.team = static_cast<int>(integer(j, "team", "payload"));
  e.tick = static_cast<std::uint64_t>(integer(j, "tick", "payload"));
  if (j.contains("detail") && j["detail"].is_string()) e.detail = j["detail"].get<std::string>();
  return e;
}

// ---------------------------------------------------------------------------
// Framing

// Splits a byte stream into newline-terminated lines.
class LineFramer {
 public:
  explicit LineFramer(std::size_t max_line = 1 << 20) : max_line_(max_line) {}

  void append(std::string_view bytes) {
    buffer_.append(bytes);
    if (buffer_.find('\n', scanned_) == std::string::npos && buffer_.size() > max_line_) {
      throw ProtocolError("line exceeds " + std::to_string(max_line_) + " bytes");
    }
  }

  std::optional<std::string> next_line() {
    auto pos = buffer_.find('\n', scanned_);
    if (pos == std::string::npos) {
      scanned_ = buffer_.size();
      return std::nullopt;
    }
    std::string line = buffer_.substr(0, pos);
    buffer_.erase(0, pos + 1);
    scanned_ = 0;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  bool has_partial() const noexcept { return !buffer_.empty(); }

 private:
  std::string buffer_;
  std::size_t scanned_ = 0;
  std::size_t max_line_;
};

}  // namespace sharedctl
