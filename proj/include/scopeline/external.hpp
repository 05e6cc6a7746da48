#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "scopeline/backends.hpp"
#include "scopeline/protocol.hpp"

namespace scopeline {

// Bidirectional byte stream to an external model server.
class ByteChannel {
 public:
  virtual ~ByteChannel() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  // Blocks until at least one byte is read; returns 0 on end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> buffer) = 0;
  virtual std::string describe() const = 0;
};

// Spawns argv[0] with the remaining arguments and talks over its stdin/stdout.
// The child is terminated and reaped on destruction.
class ChildProcessChannel final : public ByteChannel {
 public:
  explicit ChildProcessChannel(std::vector<std::string> argv);
  ~ChildProcessChannel() override;
  ChildProcessChannel(const ChildProcessChannel&) = delete;
  ChildProcessChannel& operator=(const ChildProcessChannel&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> buffer) override;
  std::string describe() const override;

 private:
  std::vector<std::string> argv_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

class TcpChannel final : public ByteChannel {
 public:
  TcpChannel(std::string host, int port);
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> buffer) override;
  std::string describe() const override;

 private:
  std::string host_;
  int port_;
  int fd_ = -1;
};

using ChannelFactory = std::function<std::unique_ptr<ByteChannel>()>;

struct ExternalEndpoint {
  enum class Transport { stdio, tcp };
  Transport transport = Transport::stdio;
  std::vector<std::string> command;  // stdio
  std::string host = "127.0.0.1";   // tcp
  int port = 0;                      // tcp

  ChannelFactory factory() const;
  std::string describe() const;
};

// Request/response exchange over a lazily opened channel. Any protocol or
// transport failure drops the channel; the next call reconnects.
class FramedConnection {
 public:
  explicit FramedConnection(ChannelFactory factory) : factory_(std::move(factory)) {}

  std::string exchange(const std::string& request_body);
  void reset();
  bool connected() const { return channel_ != nullptr; }

 private:
  ChannelFactory factory_;
  std::unique_ptr<ByteChannel> channel_;
  protocol::MessageReader reader_;
};

class ExternalDetector final : public DetectorBackend {
 public:
  ExternalDetector(ChannelFactory factory, Source source, std::string name = "external",
                   double simulated_latency_ms = 0.0);

  std::vector<ScoredBox> detect(const Frame& frame, const FrameAnnotation* truth) override;
  BackendDescriptor descriptor() const override { return {name_, simulated_latency_ms_}; }

 private:
  std::mutex mu_;
  FramedConnection conn_;
  Source source_;
  std::string name_;
  double simulated_latency_ms_;
};

class ExternalBlurGate final : public BlurGate {
 public:
  explicit ExternalBlurGate(ChannelFactory factory, double simulated_latency_ms = 0.0);

  BlurVerdict classify(const Frame& frame) override;
  BackendDescriptor descriptor() const override { return {"external-blur", simulated_latency_ms_}; }

 private:
  std::mutex mu_;
  FramedConnection conn_;
  double simulated_latency_ms_;
};

}  // namespace scopeline
