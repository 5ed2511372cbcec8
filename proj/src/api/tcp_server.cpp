#include "whan/api/tcp_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

#include "whan/api/protocol.hpp"
#include "whan/api/session.hpp"

namespace whan::api {

namespace {

bool send_all(int fd, std::string_view data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && errno == EINTR) {
      continue;
    } else {
      return false;
    }
  }
  return true;
}

bool send_line(int fd, std::string line) {
  line += '\n';
  return send_all(fd, line);
}

}  // namespace

TcpServer::TcpServer(Runtime& runtime, std::uint16_t port, std::string bind_address)
    : runtime_(runtime), port_(port), bind_address_(std::move(bind_address)) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  listener_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener_ < 0) throw std::runtime_error(fmt::format("socket: {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(listener_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, bind_address_.c_str(), &addr.sin_addr) != 1) {
    ::close(listener_);
    listener_ = -1;
    throw std::runtime_error(fmt::format("bad bind address {}", bind_address_));
  }
  if (::bind(listener_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener_, 16) != 0) {
    auto err = std::strerror(errno);
    ::close(listener_);
    listener_ = -1;
    throw std::runtime_error(fmt::format("tcp port {}: {}", port_, err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listener_ >= 0) {
    ::close(listener_);
    listener_ = -1;
  }
  std::lock_guard lock(conns_mu_);
  for (auto& c : conns_) {
    if (c->thread.joinable()) c->thread.join();
  }
  conns_.clear();
}

void TcpServer::reap() {
  std::lock_guard lock(conns_mu_);
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->done) {
      (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listener_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) {
      reap();
      continue;
    }
    int fd = ::accept(listener_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    timeval send_timeout{2, 0};  // a client that stops reading gets dropped
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &send_timeout, sizeof send_timeout);
    auto conn = std::make_unique<Connection>();
    conn->fd = fd;
    auto* raw = conn.get();
    {
      std::lock_guard lock(conns_mu_);
      conns_.push_back(std::move(conn));
    }
    raw->thread = std::thread([this, raw] { serve(*raw); });
    reap();
  }
}

void TcpServer::serve(Connection& conn) {
  const int fd = conn.fd;
  const auto id = runtime_.new_session_id();
  Session session(runtime_, id);
  auto outbox = runtime_.hub().attach(id);

  std::string inbuf;
  bool discarding = false;  // inside an over-long line
  bool open = true;
  char buf[2048];
  while (open && !stopping_) {
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 20);
    if (ready > 0) {
      auto n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) break;
      inbuf.append(buf, static_cast<std::size_t>(n));
      std::size_t nl;
      while (open && (nl = inbuf.find('\n')) != std::string::npos) {
        auto line = inbuf.substr(0, nl);
        inbuf.erase(0, nl + 1);
        if (discarding) {
          discarding = false;
          continue;
        }
        auto reply = session.handle(line);
        for (auto& l : reply.lines) open = open && send_line(fd, std::move(l));
        if (reply.close) open = false;
      }
      if (open && inbuf.size() > kMaxLine) {
        if (!discarding) open = send_line(fd, err(home::Status::Malformed));
        discarding = true;
        inbuf.clear();
      }
    }
    for (auto& line : outbox->drain()) {
      if (!open) break;
      open = send_line(fd, std::move(line));
    }
    if (outbox->overflowed()) break;
  }
  runtime_.hub().detach(id);
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
  conn.done = true;
}

}  // namespace whan::api
