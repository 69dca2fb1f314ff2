#include "seqrex/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace seqrex {

using nlohmann::json;

namespace {

void write_all(int fd, const std::string& data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) throw Error("wire: short write");
    off += static_cast<size_t>(n);
  }
}

json error_frame(const std::string& code, const std::string& detail) {
  return {{"ok", false}, {"error", code}, {"detail", detail}};
}

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw Error("wire: invalid IPv4 address: " + host);
  return addr;
}

}  // namespace

std::pair<std::string, int> parse_bind_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos) return {"127.0.0.1", std::stoi(address)};
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  return {host, std::stoi(address.substr(colon + 1))};
}

OracleServer::OracleServer(std::shared_ptr<VictimOracle> oracle) : oracle_(std::move(oracle)) {}

OracleServer::~OracleServer() { stop(); }

void OracleServer::start(const std::string& host, int port) {
  if (running_) throw StateError("oracle server already running");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("wire: cannot create socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = make_addr(host, port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("wire: cannot bind " + host + ":" + std::to_string(port) + " (" +
                std::strerror(errno) + ")");
  }
  if (::listen(listen_fd_, 64) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("wire: listen failed");
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void OracleServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard<std::mutex> lock(clients_mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(clients_mu_);
    threads.swap(client_threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

void OracleServer::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard<std::mutex> lock(clients_mu_);
    client_fds_.push_back(fd);
    client_threads_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

json OracleServer::handle_request(const json& req) {
  try {
    if (!req.is_object() || !req.contains("op") || !req.at("op").is_string())
      return error_frame("bad_request", "request must be an object with a string 'op'");
    std::string op = req.at("op").get<std::string>();
    if (op == "topk") {
      if (!req.contains("seq") || !req.at("seq").is_array())
        return error_frame("bad_request", "'seq' must be an array of item ids");
      if (!req.contains("k") || !req.at("k").is_number_integer())
        return error_frame("bad_request", "'k' must be an integer");
      std::vector<int> prefix;
      for (const auto& v : req.at("seq")) {
        if (!v.is_number_integer()) return error_frame("bad_request", "'seq' holds non-integers");
        prefix.push_back(v.get<int>());
      }
      int k = req.at("k").get<int>();
      Ledger ledger = Ledger::kAttack;
      if (req.contains("ledger")) {
        std::string l = req.at("ledger").get<std::string>();
        if (l == "supervision") ledger = Ledger::kSupervision;
        else if (l != "attack") return error_frame("bad_request", "unknown ledger: " + l);
      }
      std::string token;
      const std::string* token_ptr = nullptr;
      if (req.contains("token")) {
        token = req.at("token").get<std::string>();
        token_ptr = &token;
      }
      TopKList list = oracle_->query_topk(prefix, k, ledger, token_ptr);
      return {{"ok", true}, {"items", list.items}};
    }
    if (op == "open") {
      return {{"ok", true}, {"token", oracle_->open_sequence()}};
    }
    if (op == "close") {
      if (!req.contains("token") || !req.at("token").is_string())
        return error_frame("bad_request", "'token' must be a string");
      oracle_->close_sequence(req.at("token").get<std::string>());
      return {{"ok", true}};
    }
    return error_frame("bad_request", "unknown op: " + op);
  } catch (const BudgetExhausted& e) {
    return error_frame("budget_exhausted", e.what());
  } catch (const DataError& e) {
    std::string what = e.what();
    if (what.find("empty prefix") != std::string::npos)
      return error_frame("empty_prefix", what);
    return error_frame("bad_request", what);
  } catch (const StateError& e) {
    return error_frame("bad_request", e.what());
  } catch (const std::exception& e) {
    return error_frame("internal", e.what());
  }
}

void OracleServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  bool overlong = false;
  while (running_) {
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<size_t>(n));
    size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      json resp;
      if (overlong) {
        // tail of a line that already overflowed the cap; report once
        overlong = false;
        resp = error_frame("line_too_long", "request line exceeds 64 KiB");
      } else if (line.size() > kMaxWireLine) {
        resp = error_frame("line_too_long", "request line exceeds 64 KiB");
      } else {
        json req = json::parse(line, nullptr, false);
        if (req.is_discarded()) {
          resp = error_frame("bad_request", "malformed JSON");
        } else {
          resp = handle_request(req);
        }
      }
      try {
        write_all(fd, resp.dump() + "\n");
      } catch (const Error&) {
        ::close(fd);
        return;
      }
    }
    if (buffer.size() > kMaxWireLine) {
      // discard the oversized partial line; flag so its tail is not parsed
      buffer.clear();
      overlong = true;
    }
  }
  ::close(fd);
}

WireClient::WireClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error("wire client: cannot create socket");
  sockaddr_in addr = make_addr(host, port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error("wire client: cannot connect to " + host + ":" + std::to_string(port));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

WireClient::~WireClient() {
  if (fd_ >= 0) ::close(fd_);
}

void WireClient::send_raw(const std::string& line) { write_all(fd_, line); }

json WireClient::read_response() {
  while (true) {
    size_t pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return json::parse(line);
    }
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n <= 0) throw Error("wire client: connection closed");
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

json WireClient::request(const json& req) {
  send_raw(req.dump() + "\n");
  return read_response();
}

TopKList WireClient::topk(const std::vector<int>& prefix, int k, const std::string* token) {
  json req = {{"op", "topk"}, {"seq", prefix}, {"k", k}};
  if (token) req["token"] = *token;
  json resp = request(req);
  if (!resp.value("ok", false))
    throw Error("wire topk failed: " + resp.value("error", std::string("?")) + " " +
                resp.value("detail", std::string()));
  TopKList list;
  list.items = resp.at("items").get<std::vector<int>>();
  list.prefix_hash = hash_prefix(prefix, k);
  return list;
}

std::string WireClient::open_sequence() {
  json resp = request({{"op", "open"}});
  if (!resp.value("ok", false))
    throw BudgetExhausted("attack", -1, -1);
  return resp.at("token").get<std::string>();
}

void WireClient::close_sequence(const std::string& token) {
  json resp = request({{"op", "close"}, {"token", token}});
  if (!resp.value("ok", false)) throw Error("wire close failed");
}

}  // namespace seqrex
