#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "edu/auth.hpp"
#include "edu/model.hpp"
#include "edu/session.hpp"
#include "edu/store.hpp"
#include "edu/wire.hpp"

namespace edu::hub {

using ConnectionId = std::uint64_t;

struct HttpRequest {
  std::string method;
  std::string target;
  std::string authorization;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // always a JSON document
};

/// Where HubCore delivers its side effects. Calls arrive while the hub lock is held, in
/// mutation order; implementations must queue, not call back into the hub.
class OutboundSink {
 public:
  virtual ~OutboundSink() = default;
  virtual void send(ConnectionId id, std::string frame) = 0;
  virtual void close(ConnectionId id) = 0;
  /// Deadline at which on_tick() must run next, or nullopt to stop ticking.
  virtual void schedule_tick(std::optional<UtcMillis> deadline) = 0;
};

struct HubOptions {
  /// Empty path keeps the store in memory only.
  std::filesystem::path store_path;
  std::int64_t token_ttl_ms = 12LL * 60 * 60 * 1000;
  auth::HashCost hash_cost = auth::HashCost::interactive();
  std::function<UtcMillis()> clock;
  /// Receives one structured record per press, feedback and HTTP mutation.
  std::function<void(const Json&)> log;
};

UtcMillis system_now();

/// Transport-independent hub: HTTP API, WebSocket message handling, and the single
/// serialization point for every session mutation.
class HubCore {
 public:
  HubCore(HubOptions options, Store initial, OutboundSink& sink);

  void on_open(ConnectionId id);
  void on_frame(ConnectionId id, std::string_view frame);
  void on_close(ConnectionId id);
  void on_tick();

  HttpResponse handle_http(const HttpRequest& request);

  [[nodiscard]] Store store_snapshot() const;
  [[nodiscard]] std::optional<SessionState> session_snapshot() const;
  [[nodiscard]] std::optional<UtcMillis> next_deadline() const;
  [[nodiscard]] std::size_t connection_count() const;

 private:
  struct Connection {
    std::optional<wire::ClientRole> role;
  };

  HttpResponse route(const HttpRequest& request);
  HttpResponse register_teacher(const HttpRequest& request);
  HttpResponse login(const HttpRequest& request);
  HttpResponse sync(const HttpRequest& request, const std::string& teacher);
  HttpResponse list_questions();
  HttpResponse delete_question(std::string_view id, const std::string& teacher);
  HttpResponse start(const HttpRequest& request, const std::string& teacher);
  HttpResponse stop(const std::string& teacher);
  HttpResponse status();

  /// Nullopt means the caller should reply 401.
  std::optional<std::string> authenticate(const HttpRequest& request);

  // Callers below hold mu_.
  void send_locked(ConnectionId id, const wire::Message& message);
  void broadcast_locked(const SessionEvents& events);
  void reschedule_locked();
  /// Persists before swapping in, so a failed write leaves the live store untouched.
  void commit_store_locked(Store next);
  void log(Json record) const;

  HubOptions options_;
  OutboundSink& sink_;

  mutable std::mutex mu_;
  Store store_;
  auth::TokenRegistry tokens_;
  std::optional<SessionState> session_;
  std::map<ConnectionId, Connection> connections_;
};

}  // namespace edu::hub
