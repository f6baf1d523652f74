#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "ruleflow/executor.hpp"
#include "ruleflow/ingest.hpp"
#include "ruleflow/net/socket.hpp"
#include "ruleflow/scheduler.hpp"

namespace ruleflow {

/// Live WebSocket connections keyed by client id. A new connection under
/// an existing id supersedes (and closes) the old one.
class ClientRegistry {
 public:
  struct Connection {
    std::shared_ptr<net::Socket> socket;
    std::mutex write_mutex;
  };

  void add(const std::string& client_id, std::shared_ptr<Connection> connection);
  /// Removes only if `connection` is still the registered one.
  void remove(const std::string& client_id, const Connection* connection);

  /// Text frame to the client; false (and a counted drop) when the client
  /// is absent or the write fails.
  bool send_text(const std::string& client_id, const std::string& text);

  bool connected(const std::string& client_id) const;
  std::size_t size() const;
  std::uint64_t drop_count() const { return drops_.load(); }
  std::uint64_t sent_count() const { return sent_.load(); }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Connection>> connections_;
  std::atomic<std::uint64_t> drops_{0};
  std::atomic<std::uint64_t> sent_{0};
};

/// Plain-TCP WebSocket endpoint: clients connect with ?client_id=... and
/// receive server-pushed text frames.
class WsServer {
 public:
  struct Config {
    std::string bind = "0.0.0.0";
    std::uint16_t port = 8081;  // 0 binds an ephemeral port
  };

  WsServer(Config config, ClientRegistry& registry);
  ~WsServer();

  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(std::shared_ptr<net::Socket> socket);

  Config config_;
  ClientRegistry& registry_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::atomic<bool> running_{false};
  std::mutex conns_mutex_;
  std::condition_variable conns_done_;
  std::size_t open_conns_ = 0;
};

/// REST interface over the scheduler plus engine introspection. All
/// mutations delegate to the scheduler; this layer only translates HTTP.
class ApiServer {
 public:
  struct Config {
    std::string bind = "0.0.0.0";
    std::uint16_t port = 8080;  // 0 binds an ephemeral port
  };

  /// Extra JSON merged into GET /stats (rss, ingest counters, ...).
  using StatsProvider = std::function<std::string()>;

  ApiServer(Config config, Scheduler& scheduler, StatsProvider stats_provider);
  ~ApiServer();

  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

/// Resident-set size of this process in bytes (0 when unavailable).
std::uint64_t process_rss_bytes();

}  // namespace ruleflow
