#pragma once

// Topic-based pub/sub hub. Transport independent: sessions own a mailbox the
// hub fills and a transport writer drains.

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "asab/wire.hpp"

namespace asab::bridge {

class BridgeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TopicSpec {
  std::string name;
  wire::MessageType msg_type = wire::MessageType::PointCloud;
  std::size_t queue_depth = 1;
  bool latched = false;
};

/// map/cloud, robot/pose (latched), robot/twist, tag/observations, camera/stream, viewer/mode.
std::vector<TopicSpec> default_topics();

/// A published message, encoded once and shared by every mailbox.
struct Envelope {
  std::string topic;
  wire::MessageType type = wire::MessageType::Heartbeat;
  std::uint64_t timestamp_ns = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> frame;

  wire::WireMessage decode() const { return wire::decode(*frame); }
};

/// Per-session queue. One producer (the hub) and one consumer (the session
/// writer). Each topic holds at most its queue depth; when full, the oldest
/// message of that topic is dropped. Pops return messages in push order.
class Mailbox {
 public:
  /// Returns true if an older message was dropped to make room.
  bool push(const Envelope& e, std::size_t depth);
  std::optional<Envelope> pop();
  std::size_t size() const;
  std::uint64_t dropped() const { return dropped_.load(); }

  /// Called after every push, outside the mailbox lock.
  void set_notify(std::function<void()> fn);

 private:
  mutable std::mutex mu_;
  std::deque<Envelope> queue_;
  std::map<std::string, std::size_t, std::less<>> per_topic_;
  std::function<void()> notify_;
  std::atomic<std::uint64_t> dropped_{0};
};

enum class TransportKind { InProcess, FramedStream, BrowserGateway };

std::string_view transport_name(TransportKind t);

class Session {
 public:
  Session(std::uint64_t id, std::string name, wire::Role role, TransportKind transport);

  std::uint64_t id() const { return id_; }
  TransportKind transport() const { return transport_; }
  std::string name() const;
  wire::Role role() const;
  void set_identity(std::string name, wire::Role role);
  std::set<std::string> subscriptions() const;

  Mailbox& mailbox() { return mailbox_; }

 private:
  friend class Hub;
  const std::uint64_t id_;
  const TransportKind transport_;
  mutable std::mutex mu_;
  std::string name_;
  wire::Role role_;
  std::set<std::string> subscriptions_;
  Mailbox mailbox_;
};

struct SubscriptionHandle {
  std::uint64_t session_id = 0;
  std::string topic;
  bool newly_added = false;
};

struct HubStats {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;  // enqueued into mailboxes
  std::uint64_t dropped = 0;    // evicted by drop-oldest
  std::size_t sessions = 0;
};

class Hub {
 public:
  explicit Hub(std::vector<TopicSpec> topics = default_topics());

  std::shared_ptr<Session> open_session(std::string name, wire::Role role, TransportKind transport);
  /// Removes the session and all its subscriptions. Unknown ids are ignored.
  void close_session(std::uint64_t session_id);

  /// Idempotent. A latched topic's retained message is queued immediately.
  /// Throws BridgeError for an unknown topic or session.
  SubscriptionHandle subscribe(std::uint64_t session_id, const std::string& topic);
  /// Returns false if the session was not subscribed.
  bool unsubscribe(std::uint64_t session_id, const std::string& topic);

  /// Queues msg for every current subscriber and returns how many accepted it.
  /// Throws BridgeError for an unknown topic or a type mismatch, and
  /// wire::ProtocolError if the message cannot be encoded.
  std::size_t publish(const std::string& topic, const wire::WireMessage& msg);

  /// Validates a teleop command and forwards it on robot/twist.
  std::size_t route_teleop(const wire::WireMessage& twist);

  /// Topic that carries a given data message type, if any.
  std::optional<std::string> topic_for(wire::MessageType type) const;

  std::vector<TopicSpec> topics() const;
  std::size_t subscriber_count(const std::string& topic) const;
  std::optional<Envelope> retained(const std::string& topic) const;
  HubStats stats() const;

 private:
  struct Topic {
    TopicSpec spec;
    std::vector<std::shared_ptr<Session>> subscribers;
    mutable std::mutex latest_mu;
    std::optional<Envelope> latest;
  };

  mutable std::shared_mutex mu_;
  std::map<std::string, std::unique_ptr<Topic>, std::less<>> topics_;
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::atomic<std::uint64_t> published_{0};
  std::atomic<std::uint64_t> delivered_{0};
  std::atomic<std::uint64_t> dropped_{0};
};

inline constexpr const char* kTopicCloud = "map/cloud";
inline constexpr const char* kTopicPose = "robot/pose";
inline constexpr const char* kTopicTwist = "robot/twist";
inline constexpr const char* kTopicTags = "tag/observations";
inline constexpr const char* kTopicStream = "camera/stream";
inline constexpr const char* kTopicMode = "viewer/mode";

}  // namespace asab::bridge
