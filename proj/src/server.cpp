#include "edu/server.hpp"

#include <atomic>
#include <csignal>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

namespace edu::hub {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using boost::system::error_code;

namespace {

constexpr std::size_t kMaxHttpBody = 1 << 20;
constexpr std::size_t kMaxWsMessage = 64 * 1024;
constexpr auto kHttpReadTimeout = std::chrono::seconds(30);
constexpr std::string_view kServerName = "interactive-edu-hub";

struct WsConnection {
  explicit WsConnection(beast::tcp_stream stream) : ws(std::move(stream)) {}

  websocket::stream<beast::tcp_stream> ws;
  std::deque<std::string> outbox;
  bool writing = false;
  bool close_requested = false;
  bool closed = false;
};

// Drains the outbox one frame at a time; a requested close goes out after pending frames.
void pump(const std::shared_ptr<WsConnection>& conn) {
  if (conn->writing || conn->closed) return;
  if (!conn->outbox.empty()) {
    conn->writing = true;
    conn->ws.text(true);
    conn->ws.async_write(asio::buffer(conn->outbox.front()), [conn](error_code ec, std::size_t) {
      conn->writing = false;
      if (ec) {
        conn->closed = true;
        return;
      }
      conn->outbox.pop_front();
      pump(conn);
    });
    return;
  }
  if (conn->close_requested) {
    conn->closed = true;
    conn->ws.async_close(websocket::close_code::policy_error, [conn](error_code) {});
  }
}

std::string_view mime_type(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

// Maps a request target onto a file under `root`; nullopt for anything that escapes it.
std::optional<std::filesystem::path> static_path(const std::filesystem::path& root, std::string_view target) {
  auto path = target.substr(0, target.find_first_of("?#"));
  if (path.empty() || path.front() != '/') return std::nullopt;
  std::filesystem::path rel(std::string(path.substr(1)));
  for (const auto& part : rel) {
    if (part == "..") return std::nullopt;
  }
  auto full = root / rel;
  if (path.back() == '/') full /= "index.html";
  return full;
}

asio::awaitable<HttpResponse> handle_on_worker(HubCore& core, HttpRequest request) {
  co_return core.handle_http(request);
}

}  // namespace

std::pair<std::string, unsigned short> parse_listen_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    throw std::invalid_argument("listen address must look like host:port, got '" + text + "'");
  }
  auto host = text.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host.empty()) host = "0.0.0.0";
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid port in '" + text + "'");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range in '" + text + "'");
  return {host, static_cast<unsigned short>(port)};
}

class HubServer::Impl final : public OutboundSink {
 public:
  explicit Impl(ServerConfig config)
      : config_(std::move(config)),
        pool_(config_.http_workers == 0 ? 1 : config_.http_workers),
        acceptor_(ioc_),
        tick_timer_(ioc_),
        clock_(config_.hub.clock ? config_.hub.clock : system_now) {
    core_ = std::make_unique<HubCore>(config_.hub, std::move(config_.initial_store), *this);
  }

  ~Impl() override {
    stop();
    conns_.clear();
  }

  void start() {
    const auto address = asio::ip::make_address(config_.address);
    tcp::endpoint endpoint(address, config_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(asio::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();

    asio::co_spawn(ioc_, accept_loop(), asio::detached);
    if (config_.handle_signals) stop_on_signals();
    io_thread_ = std::thread([this] { ioc_.run(); });
  }

  void wait() {
    if (io_thread_.joinable() && io_thread_.get_id() != std::this_thread::get_id()) io_thread_.join();
  }

  void stop() {
    if (!stopping_.exchange(true)) {
      asio::post(ioc_, [this] { shutdown_io(); });
    }
    wait();
    pool_.join();
  }

  void stop_on_signals() {
    signals_ = std::make_unique<asio::signal_set>(ioc_, SIGINT, SIGTERM);
    signals_->async_wait([this](error_code ec, int) {
      if (!ec) {
        stopping_ = true;
        shutdown_io();
      }
    });
  }

  [[nodiscard]] unsigned short port() const { return port_; }
  HubCore& core() { return *core_; }

  // OutboundSink. Invoked under the hub lock from any thread; everything is re-posted
  // to the I/O thread, whose FIFO queue preserves mutation order.
  void send(ConnectionId id, std::string frame) override {
    asio::post(ioc_, [this, id, frame = std::move(frame)]() mutable {
      auto it = conns_.find(id);
      if (it == conns_.end()) return;
      it->second->outbox.push_back(std::move(frame));
      pump(it->second);
    });
  }

  void close(ConnectionId id) override {
    asio::post(ioc_, [this, id] {
      auto it = conns_.find(id);
      if (it == conns_.end()) return;
      it->second->close_requested = true;
      pump(it->second);
    });
  }

  void schedule_tick(std::optional<UtcMillis> deadline) override {
    asio::post(ioc_, [this, deadline] { arm_tick(deadline); });
  }

 private:
  void arm_tick(std::optional<UtcMillis> deadline) {
    ++tick_generation_;
    tick_timer_.cancel();
    if (!deadline) return;
    // Hub timestamps are truncated to whole ms; the extra ms keeps the real hold from
    // ending up to 1 ms short.
    const auto delay = std::max<std::int64_t>(0, *deadline - clock_()) + 1;
    tick_timer_.expires_after(std::chrono::milliseconds(delay));
    tick_timer_.async_wait([this, generation = tick_generation_](error_code ec) {
      if (ec || generation != tick_generation_) return;
      core_->on_tick();
    });
  }

  void shutdown_io() {
    error_code ec;
    acceptor_.close(ec);
    tick_timer_.cancel();
    if (signals_) signals_->cancel(ec);
    for (auto& [id, conn] : conns_) {
      beast::get_lowest_layer(conn->ws).socket().close(ec);
    }
    ioc_.stop();
  }

  asio::awaitable<void> accept_loop() {
    for (;;) {
      error_code ec;
      tcp::socket socket = co_await acceptor_.async_accept(asio::redirect_error(asio::use_awaitable, ec));
      if (ec) {
        if (ec == asio::error::operation_aborted || !acceptor_.is_open()) co_return;
        continue;
      }
      asio::co_spawn(ioc_, http_session(std::move(socket)), asio::detached);
    }
  }

  http::response<http::string_body> make_response(const http::request<http::string_body>& req, http::status status,
                                                   std::string body, std::string_view content_type) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, beast::string_view(kServerName.data(), kServerName.size()));
    res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  http::response<http::string_body> serve_static(const http::request<http::string_body>& req) {
    auto not_found = [&] {
      return make_response(req, http::status::not_found, R"({"error":"not_found"})", "application/json");
    };
    if (req.method() != http::verb::get && req.method() != http::verb::head) {
      return make_response(req, http::status::method_not_allowed, R"({"error":"method_not_allowed"})",
                           "application/json");
    }
    if (config_.static_dir.empty()) return not_found();
    auto path = static_path(config_.static_dir, std::string_view(req.target().data(), req.target().size()));
    if (!path) return not_found();
    std::ifstream in(*path, std::ios::binary);
    if (!in) return not_found();
    std::ostringstream buf;
    buf << in.rdbuf();
    auto res = make_response(req, http::status::ok, buf.str(), mime_type(*path));
    if (req.method() == http::verb::head) res.body().clear();
    return res;
  }

  asio::awaitable<void> http_session(tcp::socket socket) {
    beast::tcp_stream stream(std::move(socket));
    beast::flat_buffer buffer;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(kMaxHttpBody);
      stream.expires_after(kHttpReadTimeout);
      error_code ec;
      co_await http::async_read(stream, buffer, parser, asio::redirect_error(asio::use_awaitable, ec));
      if (ec) break;
      auto req = parser.release();
      const std::string target(req.target().data(), req.target().size());

      if (websocket::is_upgrade(req)) {
        if (target.substr(0, target.find('?')) == "/ws") {
          co_await ws_session(std::move(stream), std::move(req));
          co_return;
        }
        auto res = make_response(req, http::status::not_found, R"({"error":"not_found"})", "application/json");
        co_await http::async_write(stream, res, asio::redirect_error(asio::use_awaitable, ec));
        break;
      }

      http::response<http::string_body> res;
      if (target.starts_with("/api/") || target == "/api") {
        HttpRequest request;
        request.method = std::string(req.method_string());
        request.target = target;
        request.authorization = std::string(req[http::field::authorization]);
        request.body = std::move(req.body());
        auto out = co_await asio::co_spawn(pool_, handle_on_worker(*core_, std::move(request)), asio::use_awaitable);
        res = make_response(req, static_cast<http::status>(out.status), std::move(out.body), "application/json");
      } else {
        res = serve_static(req);
      }

      const bool keep_alive = res.keep_alive();
      co_await http::async_write(stream, res, asio::redirect_error(asio::use_awaitable, ec));
      if (ec || !keep_alive) break;
    }
    error_code ignored;
    stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
  }

  asio::awaitable<void> ws_session(beast::tcp_stream stream, http::request<http::string_body> req) {
    stream.expires_never();
    auto conn = std::make_shared<WsConnection>(std::move(stream));
    websocket::stream_base::timeout timeouts{};
    timeouts.handshake_timeout = std::chrono::seconds(10);
    timeouts.idle_timeout = config_.ws_idle_timeout;
    timeouts.keep_alive_pings = true;
    conn->ws.set_option(timeouts);
    conn->ws.set_option(websocket::stream_base::decorator(
        [](websocket::response_type& res) { res.set(http::field::server, beast::string_view(kServerName.data(), kServerName.size())); }));
    conn->ws.read_message_max(kMaxWsMessage);

    error_code ec;
    co_await conn->ws.async_accept(req, asio::redirect_error(asio::use_awaitable, ec));
    if (ec) co_return;

    const auto id = next_id_++;
    conns_.emplace(id, conn);
    core_->on_open(id);

    beast::flat_buffer buffer;
    for (;;) {
      co_await conn->ws.async_read(buffer, asio::redirect_error(asio::use_awaitable, ec));
      if (ec) break;
      const auto frame = beast::buffers_to_string(buffer.data());
      buffer.consume(buffer.size());
      core_->on_frame(id, frame);
    }
    conn->closed = true;
    core_->on_close(id);
    conns_.erase(id);
  }

  ServerConfig config_;
  asio::io_context ioc_{1};
  asio::thread_pool pool_;
  tcp::acceptor acceptor_;
  asio::steady_timer tick_timer_;
  std::unique_ptr<asio::signal_set> signals_;
  std::function<UtcMillis()> clock_;
  std::unique_ptr<HubCore> core_;
  std::unordered_map<ConnectionId, std::shared_ptr<WsConnection>> conns_;
  ConnectionId next_id_ = 1;
  std::uint64_t tick_generation_ = 0;
  unsigned short port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread io_thread_;

  friend class HubServer;
};

HubServer::HubServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
HubServer::~HubServer() = default;

void HubServer::start() { impl_->start(); }
void HubServer::wait() { impl_->wait(); }
void HubServer::stop() { impl_->stop(); }
unsigned short HubServer::port() const { return impl_->port(); }
HubCore& HubServer::core() { return impl_->core(); }

}  // namespace edu::hub
