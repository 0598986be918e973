#include "slicever/endpoint.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <list>
#include <thread>

namespace slicever::bus {

EndpointConfig parse_endpoint_uri(std::string_view uri) {
  EndpointConfig config;
  if (uri.empty() || uri == "inproc") return config;
  constexpr std::string_view kScheme = "tcp://";
  if (uri.starts_with(kScheme)) uri.remove_prefix(kScheme.size());
  config.mode = EndpointConfig::Mode::kTcp;
  config.address = std::string(uri);
  if (const char* env = std::getenv(kBusAddrEnv); env != nullptr && *env != '\0') {
    std::string_view override_addr(env);
    if (override_addr.starts_with(kScheme)) override_addr.remove_prefix(kScheme.size());
    config.address = std::string(override_addr);
  }
  const auto colon = config.address.rfind(':');
  const std::string_view port = colon == std::string::npos ? std::string_view{}
                                                           : std::string_view(config.address).substr(colon + 1);
  if (config.address.find("://") != std::string::npos || colon == 0 || port.empty() || port.size() > 5 ||
      !std::all_of(port.begin(), port.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      std::stoi(std::string(port)) > 65535) {
    throw ValidationError("bus: expected inproc or tcp://host:port, got '" + config.address + "'");
  }
  return config;
}

Subscription::Subscription(TypeFilter filter, std::size_t depth)
    : filter_(std::move(filter)), depth_(std::max<std::size_t>(1, depth)) {}

bool Subscription::accepts(MessageType t) const {
  return filter_.empty() || std::find(filter_.begin(), filter_.end(), t) != filter_.end();
}

bool Subscription::push(BusMessage msg) {
  std::unique_lock lock(mu_);
  not_full_.wait(lock, [&] { return closed_ || queue_.size() < depth_; });
  if (closed_) return false;
  queue_.push_back(std::move(msg));
  not_empty_.notify_one();
  return true;
}

std::optional<BusMessage> Subscription::next() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  BusMessage msg = std::move(queue_.front());
  queue_.pop_front();
  not_full_.notify_one();
  return msg;
}

std::optional<BusMessage> Subscription::next_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); })) return std::nullopt;
  if (queue_.empty()) return std::nullopt;
  BusMessage msg = std::move(queue_.front());
  queue_.pop_front();
  not_full_.notify_one();
  return msg;
}

void Subscription::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

namespace {

class Hub {
 public:
  explicit Hub(std::size_t depth) : depth_(depth) {}

  std::shared_ptr<Subscription> subscribe(TypeFilter filter) {
    auto sub = std::make_shared<Subscription>(std::move(filter), depth_);
    std::lock_guard lock(mu_);
    if (closed_) {
      sub->close();
    } else {
      subs_.push_back(sub);
    }
    return sub;
  }

  // Serialized so that concurrent publishers cannot interleave a single
  // subscriber's stream out of each publisher's order.
  void deliver(const BusMessage& msg) {
    std::lock_guard order(deliver_mu_);
    std::vector<std::shared_ptr<Subscription>> targets;
    {
      std::lock_guard lock(mu_);
      const auto type = type_of(msg);
      for (const auto& s : subs_) {
        if (s->accepts(type)) targets.push_back(s);
      }
    }
    for (const auto& s : targets) s->push(msg);
  }

  void close() {
    std::vector<std::shared_ptr<Subscription>> subs;
    {
      std::lock_guard lock(mu_);
      closed_ = true;
      subs.swap(subs_);
    }
    for (const auto& s : subs) s->close();
  }

 private:
  std::size_t depth_;
  std::mutex mu_;
  std::mutex deliver_mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  bool closed_ = false;
};

class InprocEndpoint final : public Endpoint {
 public:
  explicit InprocEndpoint(std::size_t depth) : hub_(depth) {}
  ~InprocEndpoint() override { close(); }

  void publish(const BusMessage& msg) override { hub_.deliver(msg); }
  std::shared_ptr<Subscription> subscribe(TypeFilter filter) override {
    return hub_.subscribe(std::move(filter));
  }
  void close() override { hub_.close(); }

 private:
  Hub hub_;
};

std::pair<std::string, std::string> split_host_port(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ValidationError("bus: address must be host:port");
  std::string host = address.substr(0, colon);
  if (host.empty() || host == "*") host = "0.0.0.0";
  return {host, address.substr(colon + 1)};
}

sockaddr_in resolve(const std::string& address) {
  const auto [host, port] = split_host_port(address);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error("bus: cannot resolve address '" + address + "'");
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  freeaddrinfo(res);
  return addr;
}

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Reads newline-terminated lines from `fd` until EOF or error.
template <class OnLine>
void read_lines(int fd, OnLine&& on_line) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      on_line(std::string_view(buffer).substr(start, nl - start));
    }
    buffer.erase(0, start);
  }
}

// A connected socket with a reader thread feeding decoded messages to a hub.
class Connection {
 public:
  Connection(int fd, Hub& hub, std::atomic<std::size_t>& dropped) : fd_(fd) {
    reader_ = std::thread([this, &hub, &dropped] {
      read_lines(fd_, [&](std::string_view line) {
        if (line.empty()) return;
        try {
          hub.deliver(decode_msg(line));
        } catch (const DecodeError&) {
          ++dropped;
        }
      });
      // Peer finished sending; let it observe EOF too.
      ::shutdown(fd_, SHUT_WR);
    });
  }
  ~Connection() { shutdown(); }

  bool send(std::string_view line) {
    std::lock_guard lock(write_mu_);
    return write_all(fd_, line);
  }

  void shutdown() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      if (reader_.joinable()) reader_.join();
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::mutex write_mu_;
  std::thread reader_;
};

class TcpServerEndpoint final : public Endpoint {
 public:
  explicit TcpServerEndpoint(const EndpointConfig& config) : hub_(config.queue_depth) {
    const sockaddr_in addr = resolve(config.address);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("bus: socket() failed");
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
      const int err = errno;
      ::close(listen_fd_);
      if (err == EADDRINUSE) throw Error("address in use: " + config.address);
      throw Error("bus: bind failed for " + config.address + ": " + std::strerror(err));
    }
    if (::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      throw Error("bus: listen failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    char host[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &bound.sin_addr, host, sizeof(host));
    bound_ = std::string(host) + ":" + std::to_string(ntohs(bound.sin_port));
    acceptor_ = std::thread([this] { accept_loop(); });
  }
  ~TcpServerEndpoint() override { close(); }

  void publish(const BusMessage& msg) override {
    hub_.deliver(msg);
    const std::string line = encode_msg(msg);
    std::lock_guard lock(conn_mu_);
    for (auto& c : connections_) c.send(line);
  }

  std::shared_ptr<Subscription> subscribe(TypeFilter filter) override {
    return hub_.subscribe(std::move(filter));
  }

  void close() override {
    if (closing_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    hub_.close();
    std::lock_guard lock(conn_mu_);
    connections_.clear();
  }

  std::size_t dropped_count() const override { return dropped_.load(); }
  std::string bound_address() const override { return bound_; }

 private:
  void accept_loop() {
    for (;;) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      if (closing_) {
        ::close(fd);
        return;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      std::lock_guard lock(conn_mu_);
      connections_.emplace_back(fd, hub_, dropped_);
    }
  }

  Hub hub_;
  int listen_fd_ = -1;
  std::string bound_;
  std::atomic<bool> closing_{false};
  std::atomic<std::size_t> dropped_{0};
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::list<Connection> connections_;
};

int connect_to(const std::string& address) {
  const sockaddr_in addr = resolve(address);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error("bus: socket() failed");
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error("bus: cannot connect to " + address + ": " + std::strerror(err));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

class TcpClientEndpoint final : public Endpoint {
 public:
  explicit TcpClientEndpoint(const EndpointConfig& config)
      : hub_(config.queue_depth), address_(config.address) {
    connection_.emplace(connect_to(config.address), hub_, dropped_);
  }
  ~TcpClientEndpoint() override { close(); }

  void publish(const BusMessage& msg) override {
    if (!connection_ || !connection_->send(encode_msg(msg))) throw Error("bus: connection lost");
  }

  std::shared_ptr<Subscription> subscribe(TypeFilter filter) override {
    return hub_.subscribe(std::move(filter));
  }

  void close() override {
    if (closing_.exchange(true)) return;
    hub_.close();
    connection_.reset();
  }

  std::size_t dropped_count() const override { return dropped_.load(); }
  std::string bound_address() const override { return address_; }

 private:
  Hub hub_;
  std::string address_;
  std::atomic<bool> closing_{false};
  std::atomic<std::size_t> dropped_{0};
  std::optional<Connection> connection_;
};

}  // namespace

std::unique_ptr<Endpoint> open_endpoint(const EndpointConfig& config) {
  if (config.mode == EndpointConfig::Mode::kInproc) {
    return std::make_unique<InprocEndpoint>(config.queue_depth);
  }
  if (config.address.empty()) throw ValidationError("bus: tcp mode requires an address");
  return std::make_unique<TcpServerEndpoint>(config);
}

std::unique_ptr<Endpoint> connect_endpoint(const EndpointConfig& config) {
  if (config.mode != EndpointConfig::Mode::kTcp || config.address.empty()) {
    throw ValidationError("bus: connect requires a tcp address");
  }
  return std::make_unique<TcpClientEndpoint>(config);
}

void send_raw(const std::string& address, std::string_view payload) {
  const int fd = connect_to(address);
  write_all(fd, payload);
  ::shutdown(fd, SHUT_WR);
  // Wait for the peer to finish reading before closing.
  char c;
  while (::recv(fd, &c, 1, 0) > 0) {
  }
  ::close(fd);
}

}  // namespace slicever::bus
