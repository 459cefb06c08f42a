#include "dce/external_oracle.hpp"

#include "dce/errors.hpp"

#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sstream>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace dce {

namespace {

// Thrown on transport problems; converted to a retry or RemoteFailure.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ignore_sigpipe() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

class Connection {
 public:
  Connection(int read_fd, int write_fd, pid_t child)
      : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}

  ~Connection() {
    if (write_fd_ != read_fd_ && write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      ::kill(child_, SIGTERM);
      ::waitpid(child_, nullptr, 0);
    }
  }

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void write_line(const std::string& line, std::chrono::milliseconds timeout) {
    std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      pollfd p{write_fd_, POLLOUT, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (rc == 0) throw TransportError("write timeout");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::strerror(errno));
      }
      const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(std::string("write: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TransportError("read timeout");
      pollfd p{read_fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc == 0) throw TransportError("read timeout");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::strerror(errno));
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n == 0) throw TransportError("connection closed");
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(std::string("read: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
};

namespace {

std::unique_ptr<Connection> open_tcp(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError(std::string("resolve: ") + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("connect to " + ep.host + ":" + port + " failed");
  return std::make_unique<Connection>(fd, fd, -1);
}

std::unique_ptr<Connection> open_command(const Endpoint& ep) {
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError("pipe failed");
  }
  std::vector<char*> args;
  for (const auto& a : ep.argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<Connection>(from_child[0], to_child[1], pid);
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  if (text.rfind("tcp:", 0) == 0) {
    const std::string rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(ErrorCode::kBadConfig, "tcp endpoint must be tcp:host:port");
    }
    ep.kind = Kind::kTcp;
    ep.host = rest.substr(0, colon);
    const std::string port = rest.substr(colon + 1);
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || p <= 0 || p > 65535) {
      throw Error(ErrorCode::kBadConfig, "bad tcp port '" + port + "'");
    }
    ep.port = static_cast<std::uint16_t>(p);
  } else if (text.rfind("cmd:", 0) == 0) {
    ep.kind = Kind::kCommand;
    std::istringstream in(text.substr(4));
    for (std::string tok; in >> tok;) ep.argv.push_back(tok);
    if (ep.argv.empty()) throw Error(ErrorCode::kBadConfig, "cmd endpoint needs a command");
  } else {
    throw Error(ErrorCode::kBadConfig, "endpoint must start with tcp: or cmd:");
  }
  return ep;
}

ExternalOptions ExternalOptions::from_env() {
  ExternalOptions o;
  if (const char* v = std::getenv("DCE_ORACLE_TIMEOUT_MS"); v && *v) {
    char* end = nullptr;
    const long ms = std::strtol(v, &end, 10);
    if (*end != '\0' || ms <= 0) {
      throw Error(ErrorCode::kBadConfig, "DCE_ORACLE_TIMEOUT_MS must be a positive integer");
    }
    o.timeout = std::chrono::milliseconds(ms);
  }
  return o;
}

ExternalClassifier::ExternalClassifier(Endpoint endpoint, ExternalOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  ignore_sigpipe();
  std::string last;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    try {
      connect();
      return;
    } catch (const TransportError& e) {
      conn_.reset();
      last = e.what();
    }
  }
  throw Error(ErrorCode::kRemoteFailure, "handshake failed: " + last);
}

ExternalClassifier::~ExternalClassifier() = default;

void ExternalClassifier::connect() {
  conn_ = endpoint_.kind == Endpoint::Kind::kTcp ? open_tcp(endpoint_)
                                                 : open_command(endpoint_);
  const std::string line = conn_->read_line(options_.timeout);
  nlohmann::json hello;
  try {
    hello = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::kProtocolError, "malformed handshake: " + line);
  }
  if (!hello.is_object() || hello.value("protocol", "") != kWireProtocol ||
      !hello.contains("dim") || !hello["dim"].is_number_unsigned() ||
      !hello.contains("classes") || !hello["classes"].is_number_unsigned()) {
    throw Error(ErrorCode::kProtocolError, "bad handshake: " + line);
  }
  const auto dim = hello["dim"].get<std::uint64_t>();
  const auto classes = hello["classes"].get<std::uint64_t>();
  if (dim == 0) throw Error(ErrorCode::kProtocolError, "handshake announces dim 0");
  if (dim_ != 0 && (dim != dim_ || classes != classes_)) {
    throw Error(ErrorCode::kProtocolError, "server changed dim/classes on reconnect");
  }
  dim_ = dim;
  classes_ = classes;
}

Label ExternalClassifier::label(const Vector& x) {
  if (static_cast<std::uint64_t>(x.size()) != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "input size " + std::to_string(x.size()) +
                                                   " != remote dim " + std::to_string(dim_));
  }
  const std::uint64_t id = next_id_++;
  nlohmann::json req;
  req["id"] = id;
  req["x"] = std::vector<double>(x.data(), x.data() + x.size());
  const std::string payload = req.dump();

  std::string last;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    std::string line;
    try {
      if (!conn_) connect();
      conn_->write_line(payload, options_.timeout);
      line = conn_->read_line(options_.timeout);
    } catch (const TransportError& e) {
      conn_.reset();
      last = e.what();
      continue;
    }
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::kProtocolError, "malformed response: " + line);
    }
    if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer() ||
        !resp.contains("label") || !resp["label"].is_number_integer()) {
      throw Error(ErrorCode::kProtocolError, "bad response: " + line);
    }
    if (resp["id"].get<std::uint64_t>() != id) {
      throw Error(ErrorCode::kProtocolError, "response id " + resp["id"].dump() +
                                                 " does not match request " +
                                                 std::to_string(id));
    }
    return resp["label"].get<Label>();
  }
  throw Error(ErrorCode::kRemoteFailure, "request " + std::to_string(id) + " failed after " +
                                             std::to_string(options_.retries) +
                                             " retries: " + last);
}

OracleHandle connect_external(const Endpoint& endpoint, ExternalOptions options) {
  return OracleHandle(std::make_unique<ExternalClassifier>(endpoint, options));
}

}  // namespace dce
