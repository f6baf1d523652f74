#include "ruleflow/ingest.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace ruleflow {

std::optional<DeviceMessage> parse_device_message(std::string_view line,
                                                  std::string* error,
                                                  std::uint64_t* non_numeric) {
  auto fail = [&](const char* reason) -> std::optional<DeviceMessage> {
    if (error) *error = reason;
    return std::nullopt;
  };

  nlohmann::json doc = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return fail("not a JSON object");

  DeviceMessage message;
  auto read_identity = [&](const char* key, std::string& out) {
    auto it = doc.find(key);
    if (it == doc.end()) return false;
    if (it->is_string()) {
      out = it->get<std::string>();
    } else if (it->is_number_integer()) {
      out = std::to_string(it->get<std::int64_t>());
    } else {
      return false;
    }
    return !out.empty();
  };
  if (!read_identity("device_id", message.device_id)) return fail("missing device_id");
  if (!read_identity("device_type", message.device_type)) {
    return fail("missing device_type");
  }

  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "device_id" || it.key() == "device_type") continue;
    if (it->is_number()) {
      message.attributes.emplace_back(it.key(), it->get<double>());
    } else if (non_numeric) {
      ++*non_numeric;
    }
  }
  return message;
}

IngestServer::IngestServer(Config config, Dsb& dsb)
    : config_(std::move(config)), dsb_(dsb) {}

IngestServer::~IngestServer() { stop(); }

void IngestServer::start() {
  if (running_.exchange(true)) return;
  listener_ = net::Socket::listen_tcp(config_.bind, config_.port);
  port_ = config_.port != 0 ? config_.port : listener_.local_port();
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("ingest: listening on {}:{}", config_.bind, port_);
}

void IngestServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown_both();
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();

  {
    std::lock_guard lock(readers_mutex_);
    for (const auto& socket : reader_sockets_) socket->shutdown_both();
  }
  // Readers are detached; wait for the last one to check out.
  std::unique_lock lock(readers_mutex_);
  readers_done_.wait_for(lock, std::chrono::seconds(5),
                         [&] { return open_connections_.load() == 0; });
}

void IngestServer::accept_loop() {
  while (running_) {
    auto client = listener_.accept();
    if (!client) break;  // listener closed
    if (open_connections_.load() >= config_.max_connections) {
      counters_.connections_rejected.fetch_add(1);
      continue;  // socket closes as it goes out of scope
    }
    counters_.connections_accepted.fetch_add(1);
    open_connections_.fetch_add(1);
    auto shared = std::make_shared<net::Socket>(std::move(*client));
    {
      std::lock_guard lock(readers_mutex_);
      reader_sockets_.push_back(shared);
    }
    std::thread([this, shared] { reader_loop(shared); }).detach();
  }
}

void IngestServer::reader_loop(std::shared_ptr<net::Socket> socket) {
  net::LineReader reader(*socket);
  while (auto line = reader.next_line()) {
    if (line->empty()) {
      if (reader.line_too_long()) counters_.malformed.fetch_add(1);
      continue;
    }
    counters_.lines.fetch_add(1);
    std::uint64_t non_numeric = 0;
    std::string error;
    auto message = parse_device_message(*line, &error, &non_numeric);
    counters_.non_numeric_values.fetch_add(non_numeric);
    if (!message) {
      counters_.malformed.fetch_add(1);
      continue;  // malformed lines are skipped, the connection stays open
    }
    handle_message(*message);
  }
  {
    std::lock_guard lock(readers_mutex_);
    std::erase(reader_sockets_, socket);
  }
  open_connections_.fetch_sub(1);
  readers_done_.notify_all();
}

std::uint64_t IngestServer::handle_message(const DeviceMessage& message) {
  std::uint64_t applied = 0;
  Index index{message.device_id, message.device_type, {}};
  for (const auto& [attribute, value] : message.attributes) {
    index.attribute = attribute;
    if (!dsb_.maybe_relevant(filter_key(index))) continue;
    counters_.probes.fetch_add(1);
    if (dsb_.update(index, value).applied) {
      ++applied;
      counters_.applied.fetch_add(1);
    }
  }
  return applied;
}

IngestStatsSnapshot IngestServer::stats() const {
  return IngestStatsSnapshot{
      counters_.connections_accepted.load(), counters_.connections_rejected.load(),
      counters_.lines.load(),                counters_.malformed.load(),
      counters_.non_numeric_values.load(),   counters_.probes.load(),
      counters_.applied.load(),
  };
}

}  // namespace ruleflow
