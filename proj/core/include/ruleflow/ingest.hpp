#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ruleflow/dsb.hpp"
#include "ruleflow/net/socket.hpp"

namespace ruleflow {

/// One parsed device upload. Only the identity pair and numeric
/// attributes are consumed; everything else in the wire object is
/// ignored.
struct DeviceMessage {
  std::string device_id;
  std::string device_type;
  std::vector<std::pair<std::string, double>> attributes;
};

/// Parses one newline-delimited JSON object; nullopt on malformed input
/// (reason in `error` when supplied). Non-numeric attribute values are
/// skipped and counted via the returned message's side channel.
std::optional<DeviceMessage> parse_device_message(std::string_view line,
                                                  std::string* error = nullptr,
                                                  std::uint64_t* non_numeric = nullptr);

struct IngestStatsSnapshot {
  std::uint64_t connections_accepted = 0;
  std::uint64_t connections_rejected = 0;
  std::uint64_t lines = 0;
  std::uint64_t malformed = 0;
  std::uint64_t non_numeric_values = 0;
  std::uint64_t probes = 0;   // DSB updates attempted after the filter gate
  std::uint64_t applied = 0;  // updates that hit a registered datasource
};

/// Accepter threads: a TCP listener plus one sequential reader per
/// connection; every parsed message flows through the Bloom gate into the
/// DSB.
class IngestServer {
 public:
  struct Config {
    std::string bind = "0.0.0.0";
    std::uint16_t port = 7070;  // 0 binds an ephemeral port
    std::size_t max_connections = 256;
  };

  IngestServer(Config config, Dsb& dsb);
  ~IngestServer();

  void start();  // throws kIo when the port cannot be bound
  void stop();

  std::uint16_t port() const { return port_; }
  IngestStatsSnapshot stats() const;

  /// Gate + update for each attribute; returns the number of applied
  /// updates. Exposed for direct use and tests.
  std::uint64_t handle_message(const DeviceMessage& message);

 private:
  void accept_loop();
  void reader_loop(std::shared_ptr<net::Socket> socket);

  Config config_;
  Dsb& dsb_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::mutex readers_mutex_;
  std::condition_variable readers_done_;
  std::vector<std::shared_ptr<net::Socket>> reader_sockets_;
  std::atomic<std::size_t> open_connections_{0};
  std::atomic<bool> running_{false};

  struct Counters {
    std::atomic<std::uint64_t> connections_accepted{0};
    std::atomic<std::uint64_t> connections_rejected{0};
    std::atomic<std::uint64_t> lines{0};
    std::atomic<std::uint64_t> malformed{0};
    std::atomic<std::uint64_t> non_numeric_values{0};
    std::atomic<std::uint64_t> probes{0};
    std::atomic<std::uint64_t> applied{0};
  } counters_;
};

}  // namespace ruleflow
