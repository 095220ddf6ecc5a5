#include "asab/hub.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace asab::bridge {

std::vector<TopicSpec> default_topics() {
  using wire::MessageType;
  return {
      {kTopicCloud, MessageType::PointCloud, 2, false},
      {kTopicPose, MessageType::Pose, 8, true},
      {kTopicTwist, MessageType::Twist, 8, false},
      {kTopicTags, MessageType::TagObservation, 32, false},
      {kTopicStream, MessageType::StreamFrame, 4, false},
      {kTopicMode, MessageType::ModeChange, 4, true},
  };
}

bool Mailbox::push(const Envelope& e, std::size_t depth) {
  bool evicted = false;
  std::function<void()> notify;
  {
    std::lock_guard lock(mu_);
    auto it = per_topic_.find(e.topic);
    if (it == per_topic_.end()) it = per_topic_.emplace(e.topic, 0).first;
    if (it->second >= depth) {
      const auto old = std::find_if(queue_.begin(), queue_.end(), [&](const Envelope& q) { return q.topic == e.topic; });
      queue_.erase(old);
      --it->second;
      evicted = true;
    }
    queue_.push_back(e);
    ++it->second;
    notify = notify_;
  }
  if (evicted) dropped_.fetch_add(1);
  if (notify) notify();
  return evicted;
}

std::optional<Envelope> Mailbox::pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  Envelope e = std::move(queue_.front());
  queue_.pop_front();
  --per_topic_.find(e.topic)->second;
  return e;
}

std::size_t Mailbox::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void Mailbox::set_notify(std::function<void()> fn) {
  std::lock_guard lock(mu_);
  notify_ = std::move(fn);
}

std::string_view transport_name(TransportKind t) {
  switch (t) {
    case TransportKind::InProcess:
      return "in-process";
    case TransportKind::FramedStream:
      return "framed-stream";
    case TransportKind::BrowserGateway:
      return "browser-gateway";
  }
  return "?";
}

Session::Session(std::uint64_t id, std::string name, wire::Role role, TransportKind transport)
    : id_(id), transport_(transport), name_(std::move(name)), role_(role) {}

std::string Session::name() const {
  std::lock_guard lock(mu_);
  return name_;
}

wire::Role Session::role() const {
  std::lock_guard lock(mu_);
  return role_;
}

void Session::set_identity(std::string name, wire::Role role) {
  std::lock_guard lock(mu_);
  name_ = std::move(name);
  role_ = role;
}

std::set<std::string> Session::subscriptions() const {
  std::lock_guard lock(mu_);
  return subscriptions_;
}

Hub::Hub(std::vector<TopicSpec> topics) {
  for (TopicSpec& spec : topics) {
    if (spec.queue_depth < 1) throw BridgeError(fmt::format("topic {} needs queue_depth >= 1", spec.name));
    if (spec.name.empty()) throw BridgeError("topic names cannot be empty");
    auto t = std::make_unique<Topic>();
    t->spec = spec;
    if (!topics_.emplace(spec.name, std::move(t)).second) {
      throw BridgeError(fmt::format("duplicate topic {}", spec.name));
    }
  }
}

std::shared_ptr<Session> Hub::open_session(std::string name, wire::Role role, TransportKind transport) {
  std::unique_lock lock(mu_);
  auto s = std::make_shared<Session>(next_id_++, std::move(name), role, transport);
  sessions_.emplace(s->id(), s);
  return s;
}

void Hub::close_session(std::uint64_t session_id) {
  std::unique_lock lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return;
  std::set<std::string> subs;
  {
    std::lock_guard sl(it->second->mu_);
    subs.swap(it->second->subscriptions_);
  }
  for (const std::string& name : subs) {
    auto& list = topics_.find(name)->second->subscribers;
    std::erase_if(list, [&](const auto& s) { return s->id() == session_id; });
  }
  it->second->mailbox().set_notify({});
  sessions_.erase(it);
}

SubscriptionHandle Hub::subscribe(std::uint64_t session_id, const std::string& topic) {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) throw BridgeError(fmt::format("unknown topic '{}'", topic));
  std::unique_lock lock(mu_);
  const auto s = sessions_.find(session_id);
  if (s == sessions_.end()) throw BridgeError(fmt::format("unknown session {}", session_id));
  Session& session = *s->second;
  {
    std::lock_guard sl(session.mu_);
    if (!session.subscriptions_.insert(topic).second) return {session_id, topic, false};
  }
  Topic& tp = *t->second;
  tp.subscribers.push_back(s->second);
  std::lock_guard pl(tp.latest_mu);
  if (tp.spec.latched && tp.latest) {
    if (session.mailbox().push(*tp.latest, tp.spec.queue_depth)) dropped_.fetch_add(1);
    delivered_.fetch_add(1);
  }
  return {session_id, topic, true};
}

bool Hub::unsubscribe(std::uint64_t session_id, const std::string& topic) {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) throw BridgeError(fmt::format("unknown topic '{}'", topic));
  std::unique_lock lock(mu_);
  const auto s = sessions_.find(session_id);
  if (s == sessions_.end()) return false;
  {
    std::lock_guard sl(s->second->mu_);
    if (s->second->subscriptions_.erase(topic) == 0) return false;
  }
  std::erase_if(t->second->subscribers, [&](const auto& p) { return p->id() == session_id; });
  return true;
}

std::size_t Hub::publish(const std::string& topic, const wire::WireMessage& msg) {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) throw BridgeError(fmt::format("unknown topic '{}'", topic));
  Topic& tp = *t->second;
  if (msg.type() != tp.spec.msg_type) {
    throw BridgeError(fmt::format("topic {} carries {}, not {}", topic, wire::type_name(tp.spec.msg_type),
                                  wire::type_name(msg.type())));
  }
  Envelope env{topic, msg.type(), msg.timestamp_ns,
               std::make_shared<const std::vector<std::uint8_t>>(wire::encode(msg))};

  std::shared_lock lock(mu_);
  // Held across the fan-out so every subscriber sees one publish order.
  std::lock_guard pl(tp.latest_mu);
  for (const auto& s : tp.subscribers) {
    if (s->mailbox().push(env, tp.spec.queue_depth)) dropped_.fetch_add(1);
  }
  if (tp.spec.latched) tp.latest = env;
  published_.fetch_add(1);
  delivered_.fetch_add(tp.subscribers.size());
  return tp.subscribers.size();
}

std::size_t Hub::route_teleop(const wire::WireMessage& twist) {
  const auto* t = std::get_if<wire::Twist>(&twist.body);
  if (t == nullptr) throw BridgeError("teleop command must be a Twist message");
  if (!std::isfinite(t->linear) || !std::isfinite(t->angular)) {
    throw BridgeError("teleop twist must have finite linear and angular velocity");
  }
  return publish(kTopicTwist, twist);
}

std::optional<std::string> Hub::topic_for(wire::MessageType type) const {
  for (const auto& [name, t] : topics_) {
    if (t->spec.msg_type == type) return name;
  }
  return std::nullopt;
}

std::vector<TopicSpec> Hub::topics() const {
  std::vector<TopicSpec> out;
  for (const auto& [name, t] : topics_) out.push_back(t->spec);
  return out;
}

std::size_t Hub::subscriber_count(const std::string& topic) const {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) throw BridgeError(fmt::format("unknown topic '{}'", topic));
  std::shared_lock lock(mu_);
  return t->second->subscribers.size();
}

std::optional<Envelope> Hub::retained(const std::string& topic) const {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) throw BridgeError(fmt::format("unknown topic '{}'", topic));
  std::lock_guard pl(t->second->latest_mu);
  return t->second->latest;
}

HubStats Hub::stats() const {
  std::shared_lock lock(mu_);
  return {published_.load(), delivered_.load(), dropped_.load(), sessions_.size()};
}

}  // namespace asab::bridge
