#include "whan/serial_link.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <stdexcept>

#include <fmt/format.h>

namespace whan::serial {

namespace {

struct SharedQueue {
  std::mutex mu;
  std::deque<std::uint8_t> bytes;
};

class PipeEnd : public ByteStream {
 public:
  PipeEnd(std::shared_ptr<SharedQueue> in, std::shared_ptr<SharedQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  void write(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(out_->mu);
    out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
  }

  wire::Bytes read_available() override {
    std::lock_guard lock(in_->mu);
    wire::Bytes out(in_->bytes.begin(), in_->bytes.end());
    in_->bytes.clear();
    return out;
  }

 private:
  std::shared_ptr<SharedQueue> in_;
  std::shared_ptr<SharedQueue> out_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe() {
  auto a_to_b = std::make_shared<SharedQueue>();
  auto b_to_a = std::make_shared<SharedQueue>();
  return {std::make_unique<PipeEnd>(b_to_a, a_to_b), std::make_unique<PipeEnd>(a_to_b, b_to_a)};
}

TcpByteStream::TcpByteStream(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
}

TcpByteStream::~TcpByteStream() { close_fd(); }

void TcpByteStream::close_fd() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void TcpByteStream::write(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (fd_ >= 0 && sent < bytes.size()) {
    auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
      ::usleep(200);
    } else {
      close_fd();
    }
  }
}

wire::Bytes TcpByteStream::read_available() {
  wire::Bytes out;
  std::uint8_t buf[4096];
  while (fd_ >= 0) {
    auto n = ::recv(fd_, buf, sizeof buf, 0);
    if (n > 0) {
      out.insert(out.end(), buf, buf + n);
    } else if (n == 0) {
      close_fd();
    } else {
      if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) close_fd();
      break;
    }
  }
  return out;
}

std::unique_ptr<ByteStream> accept_serial(std::uint16_t port) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error(fmt::format("socket: {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 1) != 0) {
    auto err = std::strerror(errno);
    ::close(listener);
    throw std::runtime_error(fmt::format("serial listen on port {}: {}", port, err));
  }
  int fd = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (fd < 0) throw std::runtime_error(fmt::format("serial accept: {}", std::strerror(errno)));
  return std::make_unique<TcpByteStream>(fd);
}

std::unique_ptr<ByteStream> connect_serial(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw std::runtime_error(fmt::format("cannot resolve {}", host));
  }
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    auto err = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    throw std::runtime_error(fmt::format("serial connect to {}:{}: {}", host, port, err));
  }
  ::freeaddrinfo(res);
  return std::make_unique<TcpByteStream>(fd);
}

}  // namespace whan::serial
