#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>

#include "edu/server.hpp"
#include "edu/store.hpp"

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : std::move(fallback);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quiz hub: HTTP API and WebSocket bridge for the interactive floor and quiz screens", "edu-hub"};
  std::string store_path = env_or("INTERACTIVE_EDU_STORE", "interactive-edu-store.json");
  std::string listen = env_or("INTERACTIVE_EDU_ADDR", "0.0.0.0:8080");
  std::string static_dir;
  std::string port_file;
  std::int64_t token_ttl_ms = 12LL * 60 * 60 * 1000;
  app.add_option("--store", store_path, "Store file (env INTERACTIVE_EDU_STORE)")->capture_default_str();
  app.add_option("--listen", listen, "Listen address host:port (env INTERACTIVE_EDU_ADDR)")->capture_default_str();
  app.add_option("--static-dir", static_dir, "Directory served at / (screen bundle)");
  app.add_option("--token-ttl-ms", token_ttl_ms, "Bearer token lifetime")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--port-file", port_file, "Write the bound port here once listening");
  CLI11_PARSE(app, argc, argv);

  std::mutex log_mu;
  auto log = [&log_mu](const edu::Json& record) {
    edu::Json line;
    line["ts"] = edu::hub::system_now();
    for (const auto& [k, v] : record.items()) line[k] = v;
    std::lock_guard lock(log_mu);
    std::cerr << line.dump() << std::endl;
  };

  edu::hub::ServerConfig config;
  try {
    std::tie(config.address, config.port) = edu::hub::parse_listen_address(listen);
    config.initial_store = edu::load_store(store_path);
  } catch (const std::exception& e) {
    log({{"event", "fatal"}, {"detail", e.what()}});
    return 1;
  }
  config.hub.store_path = store_path;
  config.hub.token_ttl_ms = token_ttl_ms;
  config.hub.log = log;
  config.static_dir = static_dir;
  config.handle_signals = true;

  edu::hub::HubServer server(std::move(config));
  try {
    server.start();
  } catch (const std::exception& e) {
    log({{"event", "fatal"}, {"detail", std::string("cannot listen on ") + listen + ": " + e.what()}});
    return 1;
  }
  if (!port_file.empty()) {
    edu::atomic_write_file(port_file, std::to_string(server.port()) + "\n");
  }
  log({{"event", "listening"}, {"listen", listen}, {"port", server.port()}, {"store", store_path}});
  server.wait();
  log({{"event", "stopped"}});
  return 0;
}
