// Publish/subscribe endpoints carrying BusMessages, either in-process or over
// TCP as NDJSON lines.
//
// Delivery is in publish order per (publisher, subscriber) pair. Each
// subscription owns a bounded queue; publish blocks while a matching
// subscriber's queue is full.
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "slicever/bus.h"

namespace slicever::bus {

inline constexpr std::size_t kDefaultQueueDepth = 1024;
inline constexpr const char* kBusAddrEnv = "SLICE_VERIFY_BUS_ADDR";

struct EndpointConfig {
  enum class Mode { kInproc, kTcp };
  Mode mode = Mode::kInproc;
  std::string address;  // "host:port"; tcp only. Port 0 picks a free port.
  std::size_t queue_depth = kDefaultQueueDepth;
};

// Accepts "inproc", "tcp://host:port" or "host:port". In tcp mode the
// SLICE_VERIFY_BUS_ADDR environment variable, when set, replaces the address.
EndpointConfig parse_endpoint_uri(std::string_view uri);

// Empty filter = every message type.
using TypeFilter = std::vector<MessageType>;

class Subscription {
 public:
  Subscription(TypeFilter filter, std::size_t depth);

  // Blocks until a message arrives; nullopt once closed and drained.
  std::optional<BusMessage> next();
  std::optional<BusMessage> next_for(std::chrono::milliseconds timeout);

  bool accepts(MessageType t) const;
  // Blocks while full. Returns false if the subscription was closed.
  bool push(BusMessage msg);
  void close();

 private:
  TypeFilter filter_;
  std::size_t depth_;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<BusMessage> queue_;
  bool closed_ = false;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual void publish(const BusMessage& msg) = 0;
  virtual std::shared_ptr<Subscription> subscribe(TypeFilter filter = {}) = 0;
  // Closes all subscriptions and network resources. Idempotent.
  virtual void close() = 0;

  // Lines received over the network that failed to decode.
  virtual std::size_t dropped_count() const { return 0; }
  // Actual "host:port" for tcp endpoints (resolves port 0); empty for inproc.
  virtual std::string bound_address() const { return {}; }
};

// Inproc: a local hub. Tcp: listens on the address; lines from connected
// peers are delivered to local subscribers, and local publishes go both to
// local subscribers and to every connected peer.
// Throws Error("address in use") when the tcp address cannot be bound.
std::unique_ptr<Endpoint> open_endpoint(const EndpointConfig& config);

// Tcp client: publish sends to the server; messages the server sends are
// delivered to local subscribers.
std::unique_ptr<Endpoint> connect_endpoint(const EndpointConfig& config);

// Opens a fresh connection, writes `payload` verbatim and waits until the
// server has consumed it. Used to inject malformed lines.
void send_raw(const std::string& address, std::string_view payload);

}  // namespace slicever::bus
