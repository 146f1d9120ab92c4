#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "camd/backend.hpp"
#include "camd/candidate.hpp"
#include "camd/errors.hpp"

namespace camd {

/// Line protocol: one JSON object per line in each direction.
///   {"instance_id": id, "batch": n, "seed": s} -> {"candidates": [...]}
///   {"instance_id": id, "want": "context"}     -> {"context": {...}}
/// Failures come back as {"error": message}; transport faults raise
/// wire_error.

namespace detail {

class socket_guard {
 public:
  socket_guard() = default;
  explicit socket_guard(int fd) : fd_(fd) {}
  socket_guard(const socket_guard&) = delete;
  socket_guard& operator=(const socket_guard&) = delete;
  socket_guard(socket_guard&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  socket_guard& operator=(socket_guard&& o) noexcept {
    reset(o.fd_);
    o.fd_ = -1;
    return *this;
  }
  ~socket_guard() { reset(-1); }

  int get() const noexcept { return fd_; }
  int release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset(int fd) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

inline void send_line(int fd, std::string line) {
  line.push_back('\n');
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n =
        ::send(fd, line.data() + off, line.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw wire_error(std::string("send failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

/// Buffered reader splitting a byte stream into newline-terminated lines.
class line_reader {
 public:
  explicit line_reader(int fd) : fd_(fd) {}

  /// Returns false on orderly EOF before any byte of a new line.
  bool next(std::string& line) {
    line.clear();
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return true;
      }
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw wire_error(std::string("recv failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (buf_.empty()) return false;
        throw wire_error("connection closed mid-line");
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

}  // namespace detail

/// Serves any candidate_backend over the line protocol. Connections are
/// handled one at a time; each connection may carry many requests.
class wire_server {
 public:
  explicit wire_server(candidate_backend& backend) : backend_(backend) {}

  /// Binds to 127.0.0.1:port (0 picks a free port) and starts listening.
  void bind_listen(std::uint16_t port) {
    detail::socket_guard fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.get() < 0)
      throw wire_error(std::string("socket failed: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
      throw wire_error(std::string("bind failed: ") + std::strerror(errno));
    if (::listen(fd.get(), 8) < 0)
      throw wire_error(std::string("listen failed: ") + std::strerror(errno));

    socklen_t len = sizeof(addr);
    if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) < 0)
      throw wire_error(std::string("getsockname failed: ") +
                       std::strerror(errno));
    port_ = ntohs(addr.sin_port);
    listen_fd_ = fd.release();
    running_.store(true);
  }

  std::uint16_t port() const noexcept { return port_; }

  /// Accept loop; returns after stop(). Backend exceptions become error
  /// responses, transport failures drop the connection.
  void run() {
    while (running_.load()) {
      const int conn = ::accept(listen_fd_, nullptr, nullptr);
      if (conn < 0) {
        if (errno == EINTR) continue;
        break;
      }
      detail::socket_guard guard(conn);
      try {
        serve_connection(conn);
      } catch (const wire_error&) {
      }
    }
  }

  void stop() {
    running_.store(false);
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }

  ~wire_server() { stop(); }

 private:
  void serve_connection(int conn) {
    detail::line_reader reader(conn);
    std::string line;
    while (reader.next(line)) {
      nlohmann::json reply;
      try {
        reply = handle(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        reply = {{"error", std::string("bad request: ") + e.what()}};
      } catch (const std::exception& e) {
        reply = {{"error", e.what()}};
      }
      detail::send_line(conn, reply.dump());
    }
  }

  nlohmann::json handle(const nlohmann::json& req) {
    const auto id = req.at("instance_id").get<std::string>();
    if (req.contains("want")) {
      if (req.at("want").get<std::string>() != "context")
        throw wire_error("unknown request kind");
      return {{"context", context_to_json(backend_.context(id))}};
    }
    const auto batch = req.at("batch").get<long long>();
    const auto seed = req.at("seed").get<std::uint64_t>();
    if (batch < 1) throw parameter_domain_error("batch must be >= 1");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : backend_.generate(id, batch, seed))
      arr.push_back(candidate_to_json(c));
    return {{"candidates", std::move(arr)}};
  }

  candidate_backend& backend_;
  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Client side of the line protocol; a drop-in candidate_backend whose
/// sampling work happens in a remote process.
class wire_backend : public candidate_backend {
 public:
  wire_backend(const std::string& host, std::uint16_t port) {
    detail::socket_guard fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.get() < 0)
      throw wire_error(std::string("socket failed: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw wire_error("bad backend address: " + host);
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
        0)
      throw wire_error(std::string("connect to ") + host + ":" +
                       std::to_string(port) + " failed: " +
                       std::strerror(errno));
    fd_ = std::move(fd);
    reader_ = detail::line_reader(fd_.get());
  }

  std::vector<candidate> generate(const std::string& instance_id,
                                  long long batch,
                                  std::uint64_t seed) override {
    const nlohmann::json req = {
        {"instance_id", instance_id}, {"batch", batch}, {"seed", seed}};
    const auto reply = round_trip(req);
    if (!reply.contains("candidates"))
      throw wire_error("response missing candidates");
    std::vector<candidate> out;
    try {
      for (const auto& j : reply.at("candidates"))
        out.push_back(candidate_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw wire_error(std::string("malformed candidate record: ") + e.what());
    }
    for (const auto& c : out) validate_candidate(c);
    charge(static_cast<long long>(out.size()));
    return out;
  }

  evidence_context context(const std::string& instance_id) override {
    const nlohmann::json req = {{"instance_id", instance_id},
                                {"want", "context"}};
    const auto reply = round_trip(req);
    if (!reply.contains("context"))
      throw wire_error("response missing context");
    try {
      return context_from_json(reply.at("context"));
    } catch (const nlohmann::json::exception& e) {
      throw wire_error(std::string("malformed context record: ") + e.what());
    }
  }

 private:
  nlohmann::json round_trip(const nlohmann::json& req) {
    detail::send_line(fd_.get(), req.dump());
    std::string line;
    if (!reader_.next(line))
      throw wire_error("backend closed the connection");
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw wire_error(std::string("unparseable response: ") + e.what());
    }
    if (reply.contains("error"))
      throw wire_error("backend error: " +
                       reply.at("error").get<std::string>());
    return reply;
  }

  detail::socket_guard fd_;
  detail::line_reader reader_{-1};
};

}  // namespace camd
