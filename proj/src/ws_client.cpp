#include "edu/ws_client.hpp"

#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

namespace edu::client {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using boost::system::error_code;

Endpoint parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("missing scheme in '" + url + "'");
  Endpoint ep;
  ep.scheme = url.substr(0, scheme_end);
  if (ep.scheme != "ws" && ep.scheme != "http") {
    throw std::invalid_argument("unsupported scheme '" + ep.scheme + "' (use ws:// or http://)");
  }
  auto rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon == std::string::npos) {
    ep.host = authority;
    ep.port = "80";
  } else {
    ep.host = authority.substr(0, colon);
    ep.port = authority.substr(colon + 1);
  }
  if (ep.host.empty() || ep.port.empty()) throw std::invalid_argument("missing host or port in '" + url + "'");
  return ep;
}

class WsClient::Impl {
 public:
  Impl() : work_(asio::make_work_guard(ioc_)), ws_(ioc_) {}

  ~Impl() { shutdown(); }

  void connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
    std::promise<error_code> done;
    auto result = done.get_future();
    const auto host_header = ep.host + ":" + ep.port;

    resolver_ = std::make_unique<tcp::resolver>(ioc_);
    resolver_->async_resolve(ep.host, ep.port, [this, &done, timeout, host_header, path = ep.path](
                                                   error_code ec, tcp::resolver::results_type results) {
      if (ec) return done.set_value(ec);
      auto& layer = beast::get_lowest_layer(ws_);
      layer.expires_after(timeout);
      layer.async_connect(results, [this, &done, host_header, path](error_code ec, const tcp::endpoint&) {
        if (ec) return done.set_value(ec);
        ws_.async_handshake(host_header, path, [this, &done](error_code ec) {
          beast::get_lowest_layer(ws_).expires_never();
          if (!ec) ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
          done.set_value(ec);
        });
      });
    });
    thread_ = std::thread([this] { ioc_.run(); });

    // The stream expiry bounds connect and handshake, so this wait terminates.
    const auto ec = result.get();
    if (ec) {
      shutdown();
      throw ConnectError(ec.message());
    }
    {
      std::lock_guard lock(mu_);
      open_ = true;
    }
    asio::post(ioc_, [this] { read_next(); });
  }

  void on_frame(FrameObserver observer) { observer_ = std::move(observer); }

  void send(std::string frame) {
    asio::post(ioc_, [this, frame = std::move(frame)]() mutable {
      outbox_.push_back(std::move(frame));
      pump();
    });
  }

  std::optional<ReceivedFrame> next_frame(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [this] { return !inbox_.empty() || !open_; });
    if (inbox_.empty()) return std::nullopt;
    auto f = std::move(inbox_.front());
    inbox_.pop_front();
    return f;
  }

  bool is_open() const {
    std::lock_guard lock(mu_);
    return open_;
  }

  bool wait_closed(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [this] { return !open_; });
  }

  void close() {
    if (is_open()) {
      asio::post(ioc_, [this] {
        close_requested_ = true;
        pump();
      });
      wait_closed(std::chrono::seconds(2));
    }
    shutdown();
  }

 private:
  void read_next() {
    ws_.async_read(buffer_, [this](error_code ec, std::size_t) {
      if (ec) {
        mark_closed();
        return;
      }
      ReceivedFrame frame{beast::buffers_to_string(buffer_.data()), std::chrono::steady_clock::now()};
      buffer_.consume(buffer_.size());
      if (observer_) observer_(frame);
      {
        std::lock_guard lock(mu_);
        inbox_.push_back(std::move(frame));
      }
      cv_.notify_all();
      read_next();
    });
  }

  void pump() {
    if (writing_ || closing_) return;
    if (!outbox_.empty()) {
      writing_ = true;
      ws_.text(true);
      ws_.async_write(asio::buffer(outbox_.front()), [this](error_code ec, std::size_t) {
        writing_ = false;
        if (ec) return;
        outbox_.pop_front();
        pump();
      });
      return;
    }
    if (close_requested_) {
      closing_ = true;
      ws_.async_close(websocket::close_code::normal, [](error_code) {});
    }
  }

  void mark_closed() {
    {
      std::lock_guard lock(mu_);
      open_ = false;
    }
    cv_.notify_all();
  }

  void shutdown() {
    if (stopped_) return;
    stopped_ = true;
    work_.reset();
    asio::post(ioc_, [this] {
      error_code ec;
      beast::get_lowest_layer(ws_).socket().close(ec);
    });
    if (thread_.joinable()) {
      if (thread_.get_id() == std::this_thread::get_id()) {
        thread_.detach();
      } else {
        ioc_.stop();
        thread_.join();
      }
    }
    mark_closed();
  }

  asio::io_context ioc_;
  asio::executor_work_guard<asio::io_context::executor_type> work_;
  websocket::stream<beast::tcp_stream> ws_;
  std::unique_ptr<tcp::resolver> resolver_;
  beast::flat_buffer buffer_;
  std::thread thread_;
  FrameObserver observer_;

  // I/O thread only.
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_requested_ = false;
  bool stopped_ = false;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ReceivedFrame> inbox_;
  bool open_ = false;
};

WsClient::WsClient() : impl_(std::make_unique<Impl>()) {}
WsClient::~WsClient() = default;

void WsClient::on_frame(FrameObserver observer) { impl_->on_frame(std::move(observer)); }

void WsClient::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  impl_->connect(endpoint, timeout);
}

void WsClient::connect(const std::string& url, std::chrono::milliseconds timeout) {
  impl_->connect(parse_url(url), timeout);
}

void WsClient::send(std::string frame) { impl_->send(std::move(frame)); }

std::optional<ReceivedFrame> WsClient::next_frame(std::chrono::milliseconds timeout) {
  return impl_->next_frame(timeout);
}

bool WsClient::is_open() const { return impl_->is_open(); }
bool WsClient::wait_closed(std::chrono::milliseconds timeout) { return impl_->wait_closed(timeout); }
void WsClient::close() { impl_->close(); }

}  // namespace edu::client
