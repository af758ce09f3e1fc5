#include <gtest/gtest.h>

#include <random>
#include <set>

#include "sharedctl/protocol.hpp"

using namespace sharedctl;

namespace {

GameState kickoff_state() {
  GameState s;
  s.cars.resize(2);
  s.cars[0].physics.location = {0.0, -2560.0, 17.0};
  s.cars[0].physics.rotation.yaw = detail::wire_number(kPi / 2.0);
  s.cars[0].boost = 33.3;
  s.cars[1].team_id = 1;
  s.cars[1].physics.location = {0.0, 2560.0, 17.0};
  s.cars[1].physics.rotation.yaw = detail::wire_number(-kPi / 2.0);
  s.cars[1].boost = 33.3;
  s.teams = {{0, 0}, {1, 0}};
  s.pads = {{0, true, 0.0}, {1, false, 4.5}};
  return s;
}

GameState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-6000.0, 6000.0), ang(-kPi, kPi), fuel(0.0, 100.0);
  auto r = [&](auto& d) { return detail::wire_number(d(rng)); };
  auto vec = [&] { return Vec3{r(pos), r(pos), r(pos)}; };
  auto phys = [&] {
    return PhysicsState{vec(), {r(ang), r(ang), r(ang)}, vec(), vec()};
  };
  GameState s;
  s.ball = phys();
  const int cars = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < cars; ++i) {
    s.cars.push_back({phys(), i % 2, rng() % 2 == 0, rng() % 2 == 0, rng() % 2 == 0, r(fuel),
                      rng() % 2 == 0});
  }
  s.teams = {{0, static_cast<int>(rng() % 9)}, {1, static_cast<int>(rng() % 9)}};
  for (int i = 0; i < static_cast<int>(rng() % 7); ++i) {
    const bool active = rng() % 2 == 0;
    s.pads.push_back({i, active, active ? 0.0 : detail::wire_number(r(fuel) / 10.0)});
  }
  s.info.seconds_elapsed = r(fuel);
  s.ui = static_cast<UiState>(rng() % 3);
  s.tick = rng() % 100000;
  return s;
}

void collect_paths(const json& j, const std::string& prefix, std::set<std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto p = prefix.empty() ? it.key() : prefix + "." + it.key();
      out.insert(p);
      collect_paths(it.value(), p, out);
    }
  } else if (j.is_array() && !j.empty()) {
    collect_paths(j[0], prefix + "[]", out);
  }
}

}  // namespace

TEST(EncodeState, KickoffIsOneLineWithKeys) {
  const auto line = encode_state(kickoff_state());
  ASSERT_FALSE(line.empty());
  EXPECT_EQ(line.back(), '\n');
  EXPECT_EQ(line.find('\n'), line.size() - 1);
  auto j = json::parse(line);
  for (const char* k : {"ball", "cars", "teams", "info", "pads", "ui", "tick"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}

TEST(EncodeState, RoundTrip) {
  const auto s = kickoff_state();
  EXPECT_EQ(decode_state(encode_state(s)), s);
}

TEST(EncodeState, UnnormalizedYawIsEncodingError) {
  auto s = kickoff_state();
  s.cars[0].physics.rotation.yaw = 3.0 * kPi / 2.0;
  EXPECT_THROW(encode_state(s), EncodingError);
  s.cars[0].physics.rotation.yaw = normalize_angle(3.0 * kPi / 2.0);
  EXPECT_NO_THROW(encode_state(s));
}

TEST(EncodeState, NonFiniteIsEncodingError) {
  auto s = kickoff_state();
  s.ball.velocity.x = std::numeric_limits<double>::infinity();
  EXPECT_THROW(encode_state(s), EncodingError);
  s = kickoff_state();
  s.cars[1].boost = std::nan("");
  EXPECT_THROW(encode_state(s), EncodingError);
}

TEST(EncodeState, InvariantChecks) {
  auto s = kickoff_state();
  s.cars[0].boost = 100.5;
  EXPECT_THROW(encode_state(s), EncodingError);
  s = kickoff_state();
  s.teams.pop_back();
  EXPECT_THROW(encode_state(s), EncodingError);
}

TEST(EncodeState, NumbersCarryNineSignificantDigits) {
  auto s = kickoff_state();
  s.ball.location.x = 1234.567891234;
  auto j = json::parse(encode_state(s));
  EXPECT_EQ(j["ball"]["location"]["x"].get<double>(), 1234.56789);
}

TEST(DecodeState, TruncatedLineIsProtocolError) {
  const auto line = encode_state(kickoff_state());
  EXPECT_THROW(decode_state(line.substr(0, line.size() / 2)), ProtocolError);
}

TEST(DecodeState, ExtraFieldIgnored) {
  auto j = state_to_json(kickoff_state());
  j["weather"] = "sunny";
  j["ball"]["spin_rate"] = 3;
  EXPECT_EQ(decode_state(j.dump()), kickoff_state());
}

TEST(DecodeState, MissingFieldNamesTheField) {
  auto j = state_to_json(kickoff_state());
  j["cars"][1]["physics"].erase("velocity");
  try {
    decode_state(j.dump());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "cars[1].physics.velocity");
  }
  j = state_to_json(kickoff_state());
  j.erase("tick");
  try {
    decode_state(j.dump());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "tick");
  }
}

TEST(DecodeState, RandomizedRoundTrip) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const auto s = random_state(rng);
    ASSERT_EQ(decode_state(encode_state(s)), s) << i;
  }
}

// Every field of the snapshot schema, listed independently of the encoder.
TEST(Schema, GoldenManifest) {
  static const std::set<std::string> manifest = {
      "ball", "ball.location", "ball.location.x", "ball.location.y", "ball.location.z",
      "ball.rotation", "ball.rotation.pitch", "ball.rotation.yaw", "ball.rotation.roll",
      "ball.velocity", "ball.velocity.x", "ball.velocity.y", "ball.velocity.z",
      "ball.angular_velocity", "ball.angular_velocity.x", "ball.angular_velocity.y",
      "ball.angular_velocity.z",
      "cars", "cars[].physics", "cars[].physics.location", "cars[].physics.location.x",
      "cars[].physics.location.y", "cars[].physics.location.z", "cars[].physics.rotation",
      "cars[].physics.rotation.pitch", "cars[].physics.rotation.yaw",
      "cars[].physics.rotation.roll", "cars[].physics.velocity", "cars[].physics.velocity.x",
      "cars[].physics.velocity.y", "cars[].physics.velocity.z",
      "cars[].physics.angular_velocity", "cars[].physics.angular_velocity.x",
      "cars[].physics.angular_velocity.y", "cars[].physics.angular_velocity.z",
      "cars[].team_id", "cars[].demolished", "cars[].ground_contact", "cars[].jumped",
      "cars[].boost", "cars[].is_bot",
      "teams", "teams[].team_id", "teams[].score",
      "info", "info.seconds_elapsed",
      "pads", "pads[].pad_id", "pads[].active", "pads[].respawn_remaining",
      "ui", "tick"};
  std::set<std::string> paths;
  collect_paths(state_to_json(kickoff_state()), "", paths);
  EXPECT_EQ(paths, manifest);
}

TEST(NormalizeAngle, Examples) {
  EXPECT_NEAR(normalize_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-12);
  EXPECT_EQ(normalize_angle(0.0), 0.0);
  // Oracle: add or subtract 2pi until inside the range.
  double theta = -5.0 * kPi / 2.0;
  while (theta < -kPi) theta += 2.0 * kPi;
  while (theta > kPi) theta -= 2.0 * kPi;
  EXPECT_NEAR(normalize_angle(-5.0 * kPi / 2.0), theta, 1e-12);
  EXPECT_NEAR(theta, -kPi / 2.0, 1e-12);
  EXPECT_THROW(normalize_angle(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(NormalizeAngle, EndpointsAccepted) {
  EXPECT_TRUE(angle_normalized(kPi));
  EXPECT_TRUE(angle_normalized(-kPi));
  EXPECT_NEAR(std::abs(normalize_angle(kPi)), kPi, kAngleTolerance);
  EXPECT_NEAR(std::abs(normalize_angle(-kPi)), kPi, kAngleTolerance);
}

TEST(NormalizeAngle, Periodic) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const double theta = d(rng);
    const double base = normalize_angle(theta);
    EXPECT_TRUE(angle_normalized(base));
    for (int k = -3; k <= 3; ++k) {
      const double shifted = normalize_angle(theta + 2.0 * kPi * k);
      // Endpoints are equal under the tolerance, so compare on the circle.
      const double gap = std::abs(shifted - base);
      EXPECT_TRUE(gap < 1e-9 || std::abs(gap - 2.0 * kPi) < 1e-9) << theta << " " << k;
    }
  }
}

TEST(ComputeDerived, Examples) {
  GameState s = kickoff_state();
  s.cars[0].physics.location = {0.0, 0.0, 0.0};
  s.ball.location = {3.0, 4.0, 0.0};
  auto f = compute_derived(s, 0);
  EXPECT_EQ(f.distance_car_ball, 5.0);
  EXPECT_NEAR(f.relative_direction.x, 0.6, 1e-15);
  EXPECT_NEAR(f.relative_direction.y, 0.8, 1e-15);
  EXPECT_EQ(f.relative_direction.z, 0.0);
  EXPECT_EQ(f.relative_velocity, Vec3{});

  s.ball.location = {0.0, 0.0, 0.0};
  f = compute_derived(s, 0);
  EXPECT_EQ(f.distance_car_ball, 0.0);
  EXPECT_EQ(f.relative_direction, Vec3{});
  EXPECT_THROW(compute_derived(s, 2), DomainError);
}

TEST(ComputeDerived, SymmetricUnderSwap) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> d(-5000.0, 5000.0);
  for (int i = 0; i < 1000; ++i) {
    GameState a = kickoff_state();
    a.ball.location = {d(rng), d(rng), d(rng)};
    a.cars[0].physics.location = {d(rng), d(rng), d(rng)};
    GameState b = a;
    std::swap(b.ball.location, b.cars[0].physics.location);
    const auto fa = compute_derived(a, 0);
    const auto fb = compute_derived(b, 0);
    EXPECT_EQ(fa.distance_car_ball, fb.distance_car_ball);
    EXPECT_NEAR(fa.relative_direction.x, -fb.relative_direction.x, 1e-15);
    EXPECT_NEAR(fa.relative_direction.y, -fb.relative_direction.y, 1e-15);
    EXPECT_NEAR(fa.relative_direction.z, -fb.relative_direction.z, 1e-15);
    EXPECT_NEAR(fa.relative_direction.norm(), 1.0, 1e-12);
  }
}

TEST(SuspendOnPause, Examples) {
  EXPECT_FALSE(suspend_on_pause(UiState::InGame));
  EXPECT_TRUE(suspend_on_pause(UiState::Paused));
  EXPECT_TRUE(suspend_on_pause(UiState::Other));
}

TEST(Envelope, RoundTripAllTypes) {
  for (auto t : {MessageType::State, MessageType::Input, MessageType::Event, MessageType::Config,
                 MessageType::AgentAction, MessageType::Frame}) {
    auto env = decode_envelope(encode_envelope(t, {{"k", 1}}));
    EXPECT_EQ(env.type, t);
    EXPECT_EQ(env.payload["k"], 1);
  }
  EXPECT_THROW(decode_envelope(R"({"type":"chat","payload":{}})"), ProtocolError);
  EXPECT_THROW(decode_envelope(R"({"payload":{}})"), ProtocolError);
  EXPECT_THROW(decode_envelope("[1,2"), ProtocolError);
}

TEST(InputMessage, RoundTrip) {
  InputMessage m{"alice", InputCommand::stick("LeftStick", -0.25, 0.5), 12};
  auto back = input_from_json(input_to_json(m));
  EXPECT_EQ(back.player, "alice");
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.tick, 12u);
  InputMessage b{"bob", InputCommand::trigger("RightTrigger", 0.8), 3};
  EXPECT_EQ(input_from_json(input_to_json(b)).command, b.command);
  EXPECT_THROW(input_from_json(json{{"player", "x"}, {"element", "A"}, {"intensity", 0.5}}), ProtocolError);
  EXPECT_THROW(input_from_json(json{{"player", "x"}, {"element", "Turbo"}, {"intensity", 1}}), ProtocolError);
}

TEST(EventMessage, RoundTrip) {
  EventMessage e{"goal", 1, 500, ""};
  EXPECT_EQ(event_from_json(event_to_json(e)), e);
  EventMessage w{"agent_failure", -1, 45, "timeout"};
  EXPECT_EQ(event_from_json(event_to_json(w)), w);
}

TEST(LineFramer, SplitsAcrossChunks) {
  LineFramer f;
  f.append("{\"a\":1}\n{\"b\"");
  EXPECT_EQ(*f.next_line(), "{\"a\":1}");
  EXPECT_FALSE(f.next_line());
  EXPECT_TRUE(f.has_partial());
  f.append(":2}\r\n");
  EXPECT_EQ(*f.next_line(), "{\"b\":2}");
  EXPECT_FALSE(f.has_partial());
}

TEST(LineFramer, RejectsOversizedLine) {
  LineFramer f(16);
  EXPECT_THROW(f.append(std::string(32, 'x')), ProtocolError);
}
