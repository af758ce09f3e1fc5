#pragma once

// Human input sources. Each is sampled once per tick; the latest element
// state at the tick boundary wins.

#include <fcntl.h>
#include <linux/joystick.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sharedctl/error.hpp"
#include "sharedctl/input_model.hpp"
#include "sharedctl/protocol.hpp"

namespace sharedctl {

class InputSource {
 public:
  virtual ~InputSource() = default;
  // nullopt once the source is gone; the session then drops its entries.
  virtual std::optional<ControllerState> sample(std::uint64_t tick) = 0;
};

class IdleSource : public InputSource {
 public:
  std::optional<ControllerState> sample(std::uint64_t) override { return ControllerState{}; }
};

// Replays recorded `input` messages (bare payloads or envelopes), applying
// every message stamped at or before the sampled tick.
class ScriptSource : public InputSource {
 public:
  explicit ScriptSource(std::vector<InputMessage> messages) : messages_(std::move(messages)) {
    std::stable_sort(messages_.begin(), messages_.end(),
                     [](const InputMessage& a, const InputMessage& b) { return a.tick < b.tick; });
  }

  static ScriptSource from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input script '" + path + "'");
    std::vector<InputMessage> messages;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = parse_line(line);
      if (j.contains("type")) {
        auto env = decode_envelope(line);
        if (env.type != MessageType::Input) continue;
        j = env.payload;
      }
      messages.push_back(input_from_json(j));
    }
    return ScriptSource(std::move(messages));
  }

  std::optional<ControllerState> sample(std::uint64_t tick) override {
    while (next_ < messages_.size() && messages_[next_].tick <= tick) {
      state_.apply(messages_[next_].command);
      ++next_;
    }
    return state_;
  }

 private:
  std::vector<InputMessage> messages_;
  std::size_t next_ = 0;
  ControllerState state_;
};

// Fed from another thread (a network client); disconnects are sticky until
// the client reconnects.
class RemoteSource : public InputSource {
 public:
  void apply(const InputCommand& cmd) {
    std::lock_guard lock(mutex_);
    state_.apply(cmd);
  }

  void set_connected(bool connected) {
    std::lock_guard lock(mutex_);
    connected_ = connected;
    if (!connected) state_ = {};
  }

  bool connected() const {
    std::lock_guard lock(mutex_);
    return connected_;
  }

  std::optional<ControllerState> sample(std::uint64_t) override {
    std::lock_guard lock(mutex_);
    if (!connected_) return std::nullopt;
    return state_;
  }

 private:
  mutable std::mutex mutex_;
  ControllerState state_;
  bool connected_ = false;
};

// ---------------------------------------------------------------------------
// Linux joystick device (/dev/input/jsN), Xbox 360 pad layout as exposed by
// the xpad driver.

struct JoystickDecoder {
  std::array<double, 8> axes{};

  // Axis values arrive in [-32767, 32767]; triggers rest at -32767.
  void apply(const js_event& ev, ControllerState& state) {
    const auto type = ev.type & ~JS_EVENT_INIT;
    if (type == JS_EVENT_BUTTON) {
      static constexpr std::array<const char*, 11> kButtons = {
          "A", "B", "X", "Y", "LeftBumper", "RightBumper", "Back", "Start", nullptr,
          "LeftThumb", "RightThumb"};
      if (ev.number < kButtons.size() && kButtons[ev.number]) {
        state.set(kButtons[ev.number], {ev.value ? 1.0 : 0.0, 0.0});
      }
      return;
    }
    if (type != JS_EVENT_AXIS || ev.number >= axes.size()) return;
    const double v = std::clamp(ev.value / 32767.0, -1.0, 1.0);
    axes[ev.number] = v;
    switch (ev.number) {
      case 0:
      case 1: state.set("LeftStick", {axes[0], -axes[1]}); break;
      case 3:
      case 4: state.set("RightStick", {axes[3], -axes[4]}); break;
      case 2: state.set("LeftTrigger", {(v + 1.0) / 2.0, 0.0}); break;
      case 5: state.set("RightTrigger", {(v + 1.0) / 2.0, 0.0}); break;
      case 6:
        state.set("DPadLeft", {v < 0.0 ? 1.0 : 0.0, 0.0});
        state.set("DPadRight", {v > 0.0 ? 1.0 : 0.0, 0.0});
        break;
      case 7:
        state.set("DPadUp", {v < 0.0 ? 1.0 : 0.0, 0.0});
        state.set("DPadDown", {v > 0.0 ? 1.0 : 0.0, 0.0});
        break;
      default: break;
    }
  }
};

class DeviceSource : public InputSource {
 public:
  explicit DeviceSource(const std::string& path) : fd_(::open(path.c_str(), O_RDONLY | O_NONBLOCK)) {
    if (fd_ < 0) throw ConfigError("cannot open input device '" + path + "'");
  }
  ~DeviceSource() override {
    if (fd_ >= 0) ::close(fd_);
  }
  DeviceSource(const DeviceSource&) = delete;
  DeviceSource& operator=(const DeviceSource&) = delete;

  std::optional<ControllerState> sample(std::uint64_t) override {
    if (fd_ < 0) return std::nullopt;
    js_event ev{};
    while (true) {
      const auto n = ::read(fd_, &ev, sizeof ev);
      if (n == static_cast<ssize_t>(sizeof ev)) {
        decoder_.apply(ev, state_);
        continue;
      }
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    return state_;
  }

 private:
  int fd_ = -1;
  JoystickDecoder decoder_;
  ControllerState state_;
};

}  // namespace sharedctl
