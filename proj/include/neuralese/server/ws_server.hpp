#pragma once

// HTTP + WebSocket front end for SessionManager. One thread per connection;
// a plain GET serves files from the static root, any upgrade request
// becomes a frame loop.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "neuralese/server/session.hpp"

namespace neuralese::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

inline std::string mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

/// Maps a request target to a file under root, or nullopt when the target
/// escapes the root or names nothing.
inline std::optional<std::filesystem::path> resolve_static(const std::filesystem::path& root, std::string target) {
  namespace fs = std::filesystem;
  auto q = target.find_first_of("?#");
  if (q != std::string::npos) target.resize(q);
  if (target.empty() || target.front() != '/') return std::nullopt;
  if (target.back() == '/') target += "index.html";
  fs::path rel = fs::path(target.substr(1)).lexically_normal();
  if (rel.empty() || rel.is_absolute()) return std::nullopt;
  for (const auto& part : rel) {
    if (part == "..") return std::nullopt;
  }
  std::error_code ec;
  fs::path base = fs::weakly_canonical(root, ec);
  if (ec) return std::nullopt;
  fs::path full = fs::weakly_canonical(base / rel, ec);
  if (ec || !fs::is_regular_file(full, ec)) return std::nullopt;
  auto [b, f] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
  if (b != base.end()) return std::nullopt;
  return full;
}

class WsServer {
 public:
  WsServer(SessionManager& sessions, std::string static_root, const std::string& host = "127.0.0.1",
           unsigned short port = 8080)
      : sessions_(sessions), root_(std::move(static_root)), acceptor_(ioc_) {
    tcp::endpoint ep(net::ip::make_address(host), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~WsServer() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Accepts connections on a background thread until stop().
  void start() {
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  /// Blocks accepting connections on the calling thread until stop().
  void run() {
    running_ = true;
    accept_loop();
  }

  void stop() {
    if (!running_.exchange(false)) return;
    beast::error_code ec;
    {
      // A blocked accept() does not return when the acceptor is closed from
      // another thread, so wake it with a connection of our own.
      net::io_context ioc;
      tcp::socket wake(ioc);
      auto ep = acceptor_.local_endpoint(ec);
      if (ep.address().is_unspecified()) ep.address(net::ip::make_address(ep.address().is_v6() ? "::1" : "127.0.0.1"));
      wake.connect(ep, ec);
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (auto* s : open_) {
        s->shutdown(tcp::socket::shutdown_both, ec);
        s->close(ec);
      }
    }
    if (accept_thread_.joinable() && accept_thread_.get_id() != std::this_thread::get_id()) accept_thread_.join();
    acceptor_.close(ec);
    std::list<std::thread> workers;
    {
      std::lock_guard<std::mutex> lock(mu_);
      workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
  }

 private:
  void accept_loop() {
    while (running_) {
      beast::error_code ec;
      tcp::socket sock(ioc_);
      acceptor_.accept(sock, ec);
      if (!running_) break;
      if (ec) continue;
      std::lock_guard<std::mutex> lock(mu_);
      workers_.emplace_back([this, s = std::move(sock)]() mutable { serve(std::move(s)); });
    }
  }

  void serve(tcp::socket sock) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!running_) return;
      open_.insert(&sock);
    }
    try {
      beast::flat_buffer buf;
      http::request<http::string_body> req;
      http::read(sock, buf, req);
      if (websocket::is_upgrade(req)) {
        websocket::stream<tcp::socket&> ws(sock);
        ws.accept(req);
        frame_loop(ws);
      } else {
        http::write(sock, respond(req));
      }
    } catch (const std::exception&) {
      // connection dropped or closed by stop()
    }
    std::lock_guard<std::mutex> lock(mu_);
    open_.erase(&sock);
  }

  template <class Stream>
  void frame_loop(Stream& ws) {
    for (;;) {
      beast::flat_buffer buf;
      ws.read(buf);
      ws.text(true);
      for (const auto& out : sessions_.handle_text(beast::buffers_to_string(buf.data()))) {
        ws.write(net::buffer(out.dump()));
      }
    }
  }

  http::response<http::string_body> respond(const http::request<http::string_body>& req) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::server, "neuralese");
    if (req.method() != http::verb::get && req.method() != http::verb::head) {
      res.result(http::status::method_not_allowed);
      res.body() = "method not allowed\n";
    } else if (auto file = resolve_static(root_, std::string(req.target()))) {
      std::ifstream in(*file, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      res.result(http::status::ok);
      res.set(http::field::content_type, mime_type(*file));
      if (req.method() == http::verb::get) res.body() = ss.str();
    } else {
      res.result(http::status::not_found);
      res.body() = "not found\n";
    }
    res.prepare_payload();
    return res;
  }

  SessionManager& sessions_;
  std::string root_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<std::thread> workers_;
  std::set<tcp::socket*> open_;
};

}  // namespace neuralese::server
