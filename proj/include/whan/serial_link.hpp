#pragma once

// Byte streams standing in for the AP's USB virtual serial port.

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>

#include "whan/wire.hpp"

namespace whan::serial {

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  /// Non-blocking; returns whatever has arrived.
  virtual wire::Bytes read_available() = 0;
  virtual bool connected() const { return true; }
};

/// Two connected in-process endpoints.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe();

/// A connected TCP socket used as a serial line. Owns the descriptor.
class TcpByteStream : public ByteStream {
 public:
  explicit TcpByteStream(int fd);
  ~TcpByteStream() override;
  TcpByteStream(const TcpByteStream&) = delete;
  TcpByteStream& operator=(const TcpByteStream&) = delete;

  void write(std::span<const std::uint8_t> bytes) override;
  wire::Bytes read_available() override;
  bool connected() const override { return fd_ >= 0; }

 private:
  void close_fd();

  int fd_;
};

/// Blocks until a peer connects on 127.0.0.1:port. Throws std::runtime_error.
std::unique_ptr<ByteStream> accept_serial(std::uint16_t port);
std::unique_ptr<ByteStream> connect_serial(const std::string& host, std::uint16_t port);

}  // namespace whan::serial
