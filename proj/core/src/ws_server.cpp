#include <unistd.h>

#include <cctype>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "ruleflow/api.hpp"
#include "ruleflow/net/websocket.hpp"

namespace ruleflow {
namespace {

// Minimal request-line/query parsing for the upgrade request.
std::string query_param(const std::string& request_line, const std::string& key) {
  std::size_t path_start = request_line.find(' ');
  std::size_t path_end = request_line.find(' ', path_start + 1);
  if (path_start == std::string::npos || path_end == std::string::npos) return {};
  std::string path = request_line.substr(path_start + 1, path_end - path_start - 1);
  std::size_t q = path.find('?');
  if (q == std::string::npos) return {};
  std::string query = path.substr(q + 1);
  std::size_t pos = 0;
  while (pos < query.size()) {
    std::size_t amp = query.find('&', pos);
    std::string pair = query.substr(pos, amp == std::string::npos ? amp : amp - pos);
    std::size_t eq = pair.find('=');
    if (eq != std::string::npos && pair.substr(0, eq) == key) {
      return pair.substr(eq + 1);
    }
    if (amp == std::string::npos) break;
    pos = amp + 1;
  }
  return {};
}

std::string header_value(const std::string& headers, const std::string& name) {
  std::size_t pos = 0;
  while (pos < headers.size()) {
    std::size_t eol = headers.find("\r\n", pos);
    if (eol == std::string::npos) eol = headers.size();
    std::string line = headers.substr(pos, eol - pos);
    std::size_t colon = line.find(':');
    if (colon != std::string::npos) {
      std::string key = line.substr(0, colon);
      for (auto& c : key) c = static_cast<char>(std::tolower(c));
      if (key == name) {
        std::size_t value_start = colon + 1;
        while (value_start < line.size() && line[value_start] == ' ') ++value_start;
        return line.substr(value_start);
      }
    }
    pos = eol + 2;
  }
  return {};
}

}  // namespace

void ClientRegistry::add(const std::string& client_id,
                         std::shared_ptr<Connection> connection) {
  std::shared_ptr<Connection> old;
  {
    std::lock_guard lock(mutex_);
    auto it = connections_.find(client_id);
    if (it != connections_.end()) old = it->second;
    connections_[client_id] = std::move(connection);
  }
  if (old) old->socket->shutdown_both();  // supersede: the old reader exits
}

void ClientRegistry::remove(const std::string& client_id, const Connection* connection) {
  std::lock_guard lock(mutex_);
  auto it = connections_.find(client_id);
  if (it != connections_.end() && it->second.get() == connection) {
    connections_.erase(it);
  }
}

bool ClientRegistry::send_text(const std::string& client_id, const std::string& text) {
  std::shared_ptr<Connection> connection;
  {
    std::lock_guard lock(mutex_);
    auto it = connections_.find(client_id);
    if (it != connections_.end()) connection = it->second;
  }
  if (!connection) {
    drops_.fetch_add(1);
    return false;
  }
  auto frame = net::ws::encode_frame(net::ws::kOpText, text, /*mask=*/false);
  std::lock_guard write_lock(connection->write_mutex);
  if (!connection->socket->write_all(frame.data(), frame.size())) {
    drops_.fetch_add(1);
    return false;
  }
  sent_.fetch_add(1);
  return true;
}

bool ClientRegistry::connected(const std::string& client_id) const {
  std::lock_guard lock(mutex_);
  return connections_.count(client_id) > 0;
}

std::size_t ClientRegistry::size() const {
  std::lock_guard lock(mutex_);
  return connections_.size();
}

WsServer::WsServer(Config config, ClientRegistry& registry)
    : config_(std::move(config)), registry_(registry) {}

WsServer::~WsServer() { stop(); }

void WsServer::start() {
  if (running_.exchange(true)) return;
  listener_ = net::Socket::listen_tcp(config_.bind, config_.port);
  port_ = config_.port != 0 ? config_.port : listener_.local_port();
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("websocket: listening on {}:{}", config_.bind, port_);
}

void WsServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown_both();
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::unique_lock lock(conns_mutex_);
  conns_done_.wait_for(lock, std::chrono::seconds(5), [&] { return open_conns_ == 0; });
}

void WsServer::accept_loop() {
  while (running_) {
    auto client = listener_.accept();
    if (!client) break;
    {
      std::lock_guard lock(conns_mutex_);
      ++open_conns_;
    }
    auto shared = std::make_shared<net::Socket>(std::move(*client));
    std::thread([this, shared] {
      serve_connection(shared);
      {
        std::lock_guard lock(conns_mutex_);
        --open_conns_;
      }
      conns_done_.notify_all();
    }).detach();
  }
}

void WsServer::serve_connection(std::shared_ptr<net::Socket> socket) {
  socket->set_recv_timeout(std::chrono::seconds(10));
  std::string request;
  char c = 0;
  while (request.find("\r\n\r\n") == std::string::npos) {
    if (request.size() > 16384 || socket->read_some(&c, 1) != 1) return;
    request += c;
  }

  const std::string client_id = query_param(request, "client_id");
  const std::string key = header_value(request, "sec-websocket-key");
  const std::string upgrade = header_value(request, "upgrade");
  if (client_id.empty() || key.empty() || upgrade != "websocket") {
    socket->write_all("HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
    return;
  }

  std::string response =
      "HTTP/1.1 101 Switching Protocols\r\n"
      "Upgrade: websocket\r\n"
      "Connection: Upgrade\r\n"
      "Sec-WebSocket-Accept: " + net::ws::accept_key(key) + "\r\n\r\n";
  if (!socket->write_all(response)) return;

  auto connection = std::make_shared<ClientRegistry::Connection>();
  connection->socket = socket;
  registry_.add(client_id, connection);
  spdlog::debug("websocket: client '{}' connected", client_id);

  // Reader: answer pings, honor close, ignore client text. Outbound
  // frames are written by the registry under the connection write lock.
  socket->set_recv_timeout(std::chrono::milliseconds(0));  // block indefinitely
  net::ws::Frame frame;
  while (running_ && net::ws::read_frame(*socket, frame)) {
    if (frame.opcode == net::ws::kOpPing) {
      auto pong = net::ws::encode_frame(net::ws::kOpPong, frame.payload, false);
      std::lock_guard lock(connection->write_mutex);
      if (!socket->write_all(pong.data(), pong.size())) break;
    } else if (frame.opcode == net::ws::kOpClose) {
      auto close = net::ws::encode_frame(net::ws::kOpClose, "", false);
      std::lock_guard lock(connection->write_mutex);
      socket->write_all(close.data(), close.size());
      break;
    }
  }
  registry_.remove(client_id, connection.get());
  socket->close();
  spdlog::debug("websocket: client '{}' disconnected", client_id);
}

std::uint64_t process_rss_bytes() {
  std::FILE* f = std::fopen("/proc/self/statm", "r");
  if (!f) return 0;
  unsigned long size_pages = 0, rss_pages = 0;
  int rc = std::fscanf(f, "%lu %lu", &size_pages, &rss_pages);
  std::fclose(f);
  if (rc != 2) return 0;
  return static_cast<std::uint64_t>(rss_pages) *
         static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
}

}  // namespace ruleflow
