#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "edu/hub.hpp"

namespace edu::hub {

struct ServerConfig {
  std::string address = "0.0.0.0";
  unsigned short port = 8080;  // 0 picks a free port
  HubOptions hub;
  Store initial_store;
  /// Serves the screen bundle at "/" when set.
  std::filesystem::path static_dir;
  std::size_t http_workers = 2;
  /// Beast pings at half this interval and drops the peer after a full interval of silence.
  std::chrono::seconds ws_idle_timeout{30};
  /// Stop cleanly on SIGINT/SIGTERM.
  bool handle_signals = false;
};

/// "host:port" -> (host, port). Throws std::invalid_argument.
std::pair<std::string, unsigned short> parse_listen_address(const std::string& text);

/// Boost.Beast transport around HubCore: HTTP API, static files and the /ws upgrade on one port.
class HubServer {
 public:
  explicit HubServer(ServerConfig config);
  ~HubServer();

  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  /// Binds and starts the I/O thread. Throws on bind failure.
  void start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  [[nodiscard]] unsigned short port() const;
  HubCore& core();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edu::hub
