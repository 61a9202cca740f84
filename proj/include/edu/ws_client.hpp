#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace edu::client {

struct Endpoint {
  std::string scheme;  // "ws" or "http"
  std::string host;
  std::string port;
  std::string path;
};

/// Accepts ws://host:port/path or http://host:port[/path]. Throws std::invalid_argument.
Endpoint parse_url(const std::string& url);

class ConnectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReceivedFrame {
  std::string text;
  std::chrono::steady_clock::time_point at;
};

/// WebSocket client with its own I/O thread. Frames are queued in arrival order and can be
/// consumed from any thread; sends are serialized on the I/O thread.
class WsClient {
 public:
  using FrameObserver = std::function<void(const ReceivedFrame&)>;

  WsClient();
  ~WsClient();

  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  /// Called on the I/O thread for every frame, before it is queued.
  void on_frame(FrameObserver observer);

  /// Throws ConnectError on refusal, timeout or a failed upgrade.
  void connect(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));
  void connect(const std::string& url, std::chrono::milliseconds timeout = std::chrono::seconds(5));

  void send(std::string frame);

  /// Next queued frame, or nullopt when the timeout passes or the peer has closed and the
  /// queue is drained.
  std::optional<ReceivedFrame> next_frame(std::chrono::milliseconds timeout);

  [[nodiscard]] bool is_open() const;
  /// Blocks until the connection is gone.
  bool wait_closed(std::chrono::milliseconds timeout);
  void close();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edu::client
