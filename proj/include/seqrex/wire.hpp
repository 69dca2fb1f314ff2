#pragma once

#include "seqrex/oracle.hpp"

#include <json.hpp>

#include <atomic>
#include <string>
#include <thread>
#include <vector>

namespace seqrex {

inline constexpr size_t kMaxWireLine = 64 * 1024;

// Newline-delimited JSON over TCP, one response line per request line.
// Requests: {"op":"topk","seq":[ids],"k":int[,"token":str][,"ledger":str]},
// {"op":"open"}, {"op":"close","token":str}. Responses: {"ok":true,...} or
// {"ok":false,"error":code,"detail":str}. Malformed input keeps the
// connection open.
class OracleServer {
 public:
  explicit OracleServer(std::shared_ptr<VictimOracle> oracle);
  ~OracleServer();

  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  // Binds and starts accepting; port 0 picks an ephemeral port.
  void start(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  bool running() const { return running_.load(); }

 private:
  void accept_loop();
  void serve_connection(int fd);
  nlohmann::json handle_request(const nlohmann::json& req);

  std::shared_ptr<VictimOracle> oracle_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex clients_mu_;
  std::vector<int> client_fds_;
  std::vector<std::thread> client_threads_;
};

// Blocking single-connection client used by tests and the CLI.
class WireClient {
 public:
  WireClient(const std::string& host, int port);
  ~WireClient();

  WireClient(const WireClient&) = delete;
  WireClient& operator=(const WireClient&) = delete;

  nlohmann::json request(const nlohmann::json& req);
  void send_raw(const std::string& line);  // line must include the newline
  nlohmann::json read_response();

  TopKList topk(const std::vector<int>& prefix, int k, const std::string* token = nullptr);
  std::string open_sequence();
  void close_sequence(const std::string& token);

 private:
  int fd_ = -1;
  std::string buffer_;
};

// Parses "host:port"; defaults to 127.0.0.1 when no host is given.
std::pair<std::string, int> parse_bind_address(const std::string& address);

}  // namespace seqrex
