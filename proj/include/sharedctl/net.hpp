#pragma once

// WebSocket endpoint for the cockpit and for remote agents. Every text frame
// is one envelope. Clients send `input`, `agent_action` and `config`; the
// server answers `config` with {ok, violations} and broadcasts `state`,
// `event` and `frame` while a match runs.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "sharedctl/agent.hpp"
#include "sharedctl/config.hpp"
#include "sharedctl/protocol.hpp"
#include "sharedctl/session.hpp"

namespace sharedctl::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct ServerHandlers {
  std::function<void(const InputMessage&)> on_input;
  std::function<void(const std::string& player, const AgentActionMessage&)> on_agent_action;
  std::function<void(const ConfigSections&)> on_config;  // only called for valid configs
  std::function<void(const std::string& player)> on_disconnect;
};

class ControlServer;

namespace detail {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, ControlServer& server) : ws_(std::move(socket)), server_(server) {}

  void start();
  void send(std::shared_ptr<const std::string> text);
  void close();
  void abort();

 private:
  void read();
  void on_message(const std::string& text);
  void write_next();
  void finish();

  websocket::stream<tcp::socket> ws_;
  ControlServer& server_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  std::set<std::string> players_;
  bool open_ = false;
  bool finished_ = false;
};

}  // namespace detail

class ControlServer {
 public:
  // Port 0 binds an ephemeral port; see port().
  ControlServer(unsigned short port, ServerHandlers handlers, std::string address = "127.0.0.1")
      : acceptor_(ioc_, tcp::endpoint(asio::ip::make_address(address), port)),
        handlers_(std::move(handlers)) {}

  ~ControlServer() { stop(); }

  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    if (!thread_.joinable()) return;
    asio::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      for (auto& c : connections_) c->close();
    });
    // Give close handshakes a moment, then force the loop down and drop
    // whatever is still connected.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc_.stop();
    thread_.join();
    for (auto& c : connections_) c->abort();
    connections_.clear();
  }

  void broadcast(MessageType type, json payload) {
    auto text = std::make_shared<const std::string>(encode_envelope(type, std::move(payload)));
    asio::post(ioc_, [this, text] {
      for (auto& c : connections_) c->send(text);
    });
  }

  std::size_t client_count() const { return clients_.load(); }

 private:
  friend class detail::Connection;

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      // Small frames must not wait on delayed ACKs.
      socket.set_option(tcp::no_delay(true), ec);
      auto c = std::make_shared<detail::Connection>(std::move(socket), *this);
      connections_.insert(c);
      c->start();
      accept();
    });
  }

  void opened() { ++clients_; }

  void closed(const std::shared_ptr<detail::Connection>& c, const std::set<std::string>& players,
              bool was_open) {
    connections_.erase(c);
    if (was_open) --clients_;
    if (handlers_.on_disconnect) {
      for (const auto& p : players) handlers_.on_disconnect(p);
    }
  }

  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  ServerHandlers handlers_;
  std::set<std::shared_ptr<detail::Connection>> connections_;
  std::atomic<std::size_t> clients_{0};
  std::thread thread_;
};

namespace detail {

inline void Connection::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return self->finish();
    self->open_ = true;
    self->server_.opened();
    self->read();
  });
}

inline void Connection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->finish();
    auto text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    self->on_message(text);
    self->read();
  });
}

inline void Connection::on_message(const std::string& text) {
  auto& h = server_.handlers_;
  try {
    auto env = decode_envelope(text);
    switch (env.type) {
      case MessageType::Input: {
        auto m = input_from_json(env.payload);
        players_.insert(m.player);
        if (h.on_input) h.on_input(m);
        break;
      }
      case MessageType::AgentAction: {
        auto m = agent_action_from_json(env.payload);
        std::string player = env.payload.value("player", std::string());
        players_.insert(player);
        if (h.on_agent_action) h.on_agent_action(player, m);
        break;
      }
      case MessageType::Config: {
        ValidationResult r;
        ConfigSections sections;
        try {
          sections = config_from_json(env.payload);
          r = check_config(sections);
        } catch (const std::exception& e) {
          r.violations.push_back(e.what());
        }
        send(std::make_shared<const std::string>(encode_envelope(
            MessageType::Config, {{"ok", r.ok()}, {"violations", r.violations}})));
        if (r.ok() && h.on_config) h.on_config(sections);
        break;
      }
      default:
        throw ProtocolError("clients may not send '" + std::string(to_string(env.type)) + "'");
    }
  } catch (const std::exception& e) {
    send(std::make_shared<const std::string>(
        encode_envelope(MessageType::Event, event_to_json({"protocol_error", -1, 0, e.what()}))));
  }
}

inline void Connection::send(std::shared_ptr<const std::string> text) {
  if (!open_ || finished_) return;
  outbox_.push_back(std::move(text));
  if (outbox_.size() == 1) write_next();
}

inline void Connection::write_next() {
  ws_.text(true);
  ws_.async_write(asio::buffer(*outbox_.front()),
                  [self = shared_from_this()](beast::error_code ec, std::size_t) {
                    if (ec) return self->finish();
                    self->outbox_.pop_front();
                    if (!self->outbox_.empty()) self->write_next();
                  });
}

inline void Connection::close() {
  if (!open_ || finished_) return;
  ws_.async_close(websocket::close_code::going_away,
                  [self = shared_from_this()](beast::error_code) { self->finish(); });
}

inline void Connection::abort() {
  beast::error_code ec;
  beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ec);
  beast::get_lowest_layer(ws_).close(ec);
}

inline void Connection::finish() {
  if (finished_) return;
  finished_ = true;
  server_.closed(shared_from_this(), players_, open_);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Serve loop: waits for a valid config, runs the match live while relaying
// traffic, then waits for the next one.

struct ServeOptions {
  unsigned short port = 8765;
  std::optional<ConfigSections> initial_config;
  int max_matches = -1;  // < 0: until stopped
  bool live = true;
  std::function<void(unsigned short)> on_listening;
  std::function<void(const MatchResult&)> on_match_end;
};

inline void serve(const ServeOptions& options, const std::atomic<bool>& stop) {
  std::mutex mutex;
  std::condition_variable cv;
  std::optional<ConfigSections> pending = options.initial_config;
  Session* active = nullptr;

  ServerHandlers handlers;
  handlers.on_config = [&](const ConfigSections& s) {
    std::lock_guard lock(mutex);
    pending = s;
    cv.notify_all();
  };
  handlers.on_input = [&](const InputMessage& m) {
    std::lock_guard lock(mutex);
    if (!active) return;
    try {
      if (auto src = std::dynamic_pointer_cast<RemoteSource>(active->source(m.player))) {
        if (!src->connected()) src->set_connected(true);
        src->apply(m.command);
      }
    } catch (const ConfigError&) {
    }
  };
  handlers.on_agent_action = [&](const std::string& player, const AgentActionMessage& m) {
    std::lock_guard lock(mutex);
    if (!active) return;
    try {
      if (auto p = std::dynamic_pointer_cast<RemoteAgentPolicy>(active->policy(player))) p->deliver(m);
    } catch (const ConfigError&) {
    }
  };
  handlers.on_disconnect = [&](const std::string& player) {
    std::lock_guard lock(mutex);
    if (!active) return;
    try {
      if (auto src = std::dynamic_pointer_cast<RemoteSource>(active->source(player))) {
        src->set_connected(false);
      }
    } catch (const ConfigError&) {
    }
  };

  ControlServer server(options.port, handlers);
  server.start();
  if (options.on_listening) options.on_listening(server.port());

  int matches = 0;
  while (!stop && (options.max_matches < 0 || matches < options.max_matches)) {
    ConfigSections sections;
    {
      std::unique_lock lock(mutex);
      cv.wait_for(lock, std::chrono::milliseconds(100), [&] { return pending.has_value(); });
      if (!pending) continue;
      sections = *pending;
      pending.reset();
    }
    Session session(build_session_config(sections));
    {
      std::lock_guard lock(mutex);
      active = &session;
    }
    SessionHooks hooks;
    hooks.on_snapshot = [&](const GameState& s) { server.broadcast(MessageType::State, state_to_json(s)); };
    hooks.on_event = [&](const EventMessage& e) { server.broadcast(MessageType::Event, event_to_json(e)); };
    hooks.on_overlay = [&](const OverlayRecord& r) {
      server.broadcast(MessageType::Frame, overlay_to_json(r));
    };
    hooks.should_stop = [&] { return stop.load(); };
    auto outcome = session.run(hooks, options.live);
    {
      std::lock_guard lock(mutex);
      active = nullptr;
    }
    if (!session.config().log_path.empty()) {
      std::ofstream out(resolve_log_path(session.config().log_path));
      write_tick_log(out, outcome.log);
    }
    if (options.on_match_end) options.on_match_end(outcome.result);
    ++matches;
  }
  server.stop();
}

}  // namespace sharedctl::net
