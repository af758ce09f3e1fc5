#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sharedctl/net.hpp"
#include "sharedctl/session.hpp"
#include "sharedctl/stats.hpp"

using namespace sharedctl;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kProtocolError = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void print_result(const MatchResult& r) {
  std::cout << "score " << r.scores[0] << "-" << r.scores[1] << "  goal differential "
            << r.goal_differential << "  duration " << r.duration_seconds << " s  trace "
            << std::hex << std::setw(16) << std::setfill('0') << r.trace_hash << std::dec
            << std::setfill(' ') << "\n";
}

int cmd_run(const std::string& config_path, bool headless, const std::string& log_override,
            const std::string& overlay_path) {
  auto config = load_session_config(config_path);
  if (!log_override.empty()) config.log_path = log_override;
  SessionHooks hooks;
  hooks.on_event = [](const EventMessage& e) {
    if (e.kind == "goal") std::cout << "goal team " << e.team << " at tick " << e.tick << "\n";
    if (e.kind == "source_disconnected") std::cerr << "source '" << e.detail << "' disconnected\n";
  };
  hooks.should_stop = [] { return g_stop.load(); };
  auto outcome = run_match(config, hooks, !headless);
  if (!config.log_path.empty()) {
    const auto path = resolve_log_path(config.log_path);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write log '" + path.string() + "'");
    write_tick_log(out, outcome.log);
    std::cout << "log written to " << path.string() << "\n";
  }
  if (!overlay_path.empty()) {
    std::ofstream out(resolve_log_path(overlay_path));
    export_augmented_log(out, outcome.log, config.policies, config.profile);
  }
  print_result(outcome.result);
  return kOk;
}

int cmd_replay(const std::string& log_path, const std::string& config_path) {
  auto config = load_session_config(config_path);
  std::ifstream in(resolve_log_path(log_path));
  if (!in) throw ConfigError("cannot open log '" + log_path + "'");
  auto log = read_tick_log(in, config.profile);
  print_result(replay_log(log, config));
  return kOk;
}

stats::PairedSamples read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pairs file '" + path + "'");
  stats::PairedSamples out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string label, a, b;
    std::getline(ss, label, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    try {
      out.push_back({label, std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      if (out.empty() && line_no == 1) continue;  // header row
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected label,a,b");
    }
  }
  return out;
}

int cmd_analyze(const std::vector<std::string>& files, double alpha) {
  std::vector<double> p;
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& f : files) {
    const auto pairs = read_pairs(f);
    const auto s = stats::goal_differential(pairs);
    const auto w = stats::wilcoxon_signed_rank(pairs);
    std::cout << f << "\n  n " << s.n << "\n  a mean " << s.a.mean << " sd " << s.a.sd
              << "\n  b mean " << s.b.mean << " sd " << s.b.sd << "\n  W+ " << w.w_plus
              << " W- " << w.w_minus << " p " << w.p_value << (w.exact ? " (exact)" : " (normal)")
              << (w.degenerate ? " (all differences zero)" : "") << "\n";
    if (s.sd_undefined) std::cout << "  sd undefined for a single pair\n";
    p.push_back(w.p_value);
  }
  if (p.size() > 1) {
    const auto bh = stats::bh_adjust(p, alpha);
    std::cout << "Benjamini-Hochberg at alpha " << alpha << "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::cout << "  " << files[i] << " adjusted p " << bh.adjusted[i]
                << (bh.rejected[i] ? " rejected" : " retained") << "\n";
    }
  }
  return kOk;
}

int cmd_serve(unsigned short port, const std::string& config_path, int matches, bool headless) {
  net::ServeOptions options;
  options.port = port;
  options.max_matches = matches;
  options.live = !headless;
  if (!config_path.empty()) {
    load_session_config(config_path);
    options.initial_config = load_config_file(config_path);
  }
  options.on_listening = [](unsigned short p) {
    std::cout << "listening on ws://127.0.0.1:" << p << std::endl;
  };
  options.on_match_end = [](const MatchResult& r) { print_result(r); };
  net::serve(options, g_stop);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-control arena runtime"};
  app.require_subcommand(1);

  std::string config_path, log_path, overlay_path;
  bool headless = false;
  auto* run = app.add_subcommand("run", "Run one match from a config file");
  run->add_option("--config", config_path, "Session config (INI)")->required();
  run->add_flag("--headless", headless, "Step as fast as possible instead of at 120 Hz");
  run->add_option("--log", log_path, "Tick log path (overrides [session] log)");
  run->add_option("--overlay", overlay_path, "Write the per-role overlay log here");

  std::string replay_log_path, replay_config;
  auto* rep = app.add_subcommand("replay", "Re-simulate a recorded tick log");
  rep->add_option("--log", replay_log_path, "Tick log")->required();
  rep->add_option("--config", replay_config, "Config used for the recording")->required();

  std::vector<std::string> pairs;
  double alpha = 0.05;
  auto* an = app.add_subcommand("analyze", "Paired goal-differential statistics");
  an->add_option("--pairs", pairs, "CSV of label,a,b (repeat for several comparisons)")
      ->required()
      ->check(CLI::ExistingFile);
  an->add_option("--alpha", alpha, "False discovery rate for Benjamini-Hochberg")
      ->check(CLI::Range(0.0, 1.0));

  unsigned short port = 8765;
  std::string serve_config;
  int matches = -1;
  bool serve_headless = false;
  auto* srv = app.add_subcommand("serve", "WebSocket endpoint for cockpit and remote agents");
  srv->add_option("--port", port, "TCP port (0 picks one)");
  srv->add_option("--config", serve_config, "Start a match with this config right away");
  srv->add_option("--matches", matches, "Exit after this many matches");
  srv->add_flag("--headless", serve_headless, "Do not pace ticks to wall-clock");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*run) return cmd_run(config_path, headless, log_path, overlay_path);
    if (*rep) return cmd_replay(replay_log_path, replay_config);
    if (*an) return cmd_analyze(pairs, alpha);
    if (*srv) return cmd_serve(port, serve_config, matches, serve_headless);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kProtocolError;
  } catch (const ReplayError& e) {
    std::cerr << "replay error: " << e.what() << "\n";
    return kProtocolError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
