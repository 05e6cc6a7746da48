#include "scopeline/external.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <array>
#include <cerrno>
#include <cstring>

#include <csignal>
#include <fcntl.h>
#include <netdb.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace scopeline {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw BackendError(fmt::format("{}: {}", what, std::strerror(errno)));
}

void write_fd_all(int fd, std::span<const std::uint8_t> bytes, const std::string& peer,
                  bool is_socket) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = is_socket
                          ? ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL)
                          : ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write to " + peer);
    }
    done += static_cast<std::size_t>(n);
  }
}

std::size_t read_fd_some(int fd, std::span<std::uint8_t> buffer, const std::string& peer) {
  for (;;) {
    const ssize_t n = ::read(fd, buffer.data(), buffer.size());
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno != EINTR) throw_errno("read from " + peer);
  }
}

// Writing to a dead child must surface as an error, not kill the process.
void ignore_sigpipe_once() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

ChildProcessChannel::ChildProcessChannel(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw ConfigError("external backend command is empty");
  ignore_sigpipe_once();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw_errno("pipe");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw_errno("pipe");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw BackendError(fmt::format("cannot spawn '{}': {}", argv_[0], std::strerror(rc)));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ChildProcessChannel::~ChildProcessChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks a well-behaved server to exit; give it a moment.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

void ChildProcessChannel::write_all(std::span<const std::uint8_t> bytes) {
  write_fd_all(to_child_, bytes, describe(), false);
}

std::size_t ChildProcessChannel::read_some(std::span<std::uint8_t> buffer) {
  return read_fd_some(from_child_, buffer, describe());
}

std::string ChildProcessChannel::describe() const { return fmt::format("process '{}'", argv_[0]); }

TcpChannel::TcpChannel(std::string host, int port) : host_(std::move(host)), port_(port) {
  ignore_sigpipe_once();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port_);
  if (const int rc = ::getaddrinfo(host_.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw BackendError(fmt::format("resolve {}:{}: {}", host_, port_, ::gai_strerror(rc)));
  }
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    const int fd = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw BackendError(fmt::format("cannot connect to {}:{}", host_, port_));
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::write_all(std::span<const std::uint8_t> bytes) { write_fd_all(fd_, bytes, describe(), true); }

std::size_t TcpChannel::read_some(std::span<std::uint8_t> buffer) {
  return read_fd_some(fd_, buffer, describe());
}

std::string TcpChannel::describe() const { return fmt::format("tcp {}:{}", host_, port_); }

ChannelFactory ExternalEndpoint::factory() const {
  if (transport == Transport::stdio) {
    return [cmd = command]() -> std::unique_ptr<ByteChannel> {
      return std::make_unique<ChildProcessChannel>(cmd);
    };
  }
  return [h = host, p = port]() -> std::unique_ptr<ByteChannel> {
    return std::make_unique<TcpChannel>(h, p);
  };
}

std::string ExternalEndpoint::describe() const {
  if (transport == Transport::tcp) return fmt::format("tcp {}:{}", host, port);
  return fmt::format("stdio '{}'", fmt::join(command, " "));
}

std::string FramedConnection::exchange(const std::string& request_body) {
  try {
    if (!channel_) {
      channel_ = factory_();
      reader_ = {};
    }
    channel_->write_all(protocol::frame_message(request_body));
    std::array<std::uint8_t, 64 * 1024> buf;
    for (;;) {
      if (auto body = reader_.pop()) {
        if (reader_.buffered() != 0) {
          throw protocol::DesyncError("peer sent more than one message for a single request");
        }
        return *body;
      }
      const std::size_t n = channel_->read_some(buf);
      if (n == 0) {
        throw BackendError(fmt::format("{} closed the stream with {} bytes of a partial message",
                                       channel_->describe(), reader_.buffered()));
      }
      reader_.feed(std::span(buf.data(), n));
    }
  } catch (...) {
    reset();
    throw;
  }
}

void FramedConnection::reset() {
  channel_.reset();
  reader_ = {};
}

ExternalDetector::ExternalDetector(ChannelFactory factory, Source source, std::string name,
                                   double simulated_latency_ms)
    : conn_(std::move(factory)),
      source_(source),
      name_(std::move(name)),
      simulated_latency_ms_(simulated_latency_ms) {}

std::vector<ScoredBox> ExternalDetector::detect(const Frame& frame, const FrameAnnotation*) {
  count_invocation();
  std::lock_guard lock(mu_);
  const std::string response = conn_.exchange(protocol::encode_detect_request(frame));
  try {
    return protocol::decode_detections_response(response, frame.frame_index, source_, frame.width,
                                                frame.height);
  } catch (const protocol::DataError&) {
    throw;
  } catch (const protocol::ProtocolError&) {
    conn_.reset();
    throw;
  }
}

ExternalBlurGate::ExternalBlurGate(ChannelFactory factory, double simulated_latency_ms)
    : conn_(std::move(factory)), simulated_latency_ms_(simulated_latency_ms) {}

BlurVerdict ExternalBlurGate::classify(const Frame& frame) {
  std::lock_guard lock(mu_);
  const std::string response = conn_.exchange(protocol::encode_blur_request(frame));
  try {
    return protocol::decode_blur_response(response, frame.frame_index);
  } catch (const protocol::ProtocolError&) {
    conn_.reset();
    throw;
  }
}

}  // namespace scopeline
