#pragma once

#include <map>
#include <string>

#include "asab/wire.hpp"

namespace asab::test {

// Messages behind the frozen hex vectors in fixtures/wire_golden.txt.
inline std::map<std::string, wire::WireMessage> golden_messages() {
  std::map<std::string, wire::WireMessage> m;
  m["hello"] = {1, "viewer", 0, wire::Hello{wire::Role::Subscriber, "headless"}};
  m["subscribe"] = {2, "", 0, wire::Subscribe{"map/cloud", true}};
  m["cloud_empty"] = {3, "map", 0, wire::Cloud{}};
  m["cloud_two"] = {1'700'000'000'000'000'000ull, "map", 0,
                    wire::Cloud{{{1.0f, -2.5f, 0.25f, {255, 128, 0}}, {0.1f, 0.2f, 0.3f, {1, 2, 3}}}}};
  m["pose"] = {5, "map", 0, wire::PoseBody{{{1, 2, 3}, UnitQuaternion::from_unit(0.5, 0.5, 0.5, 0.5)}}};
  m["twist"] = {6, "base_link", 0, wire::Twist{0.5, -0.25}};
  m["stream_frame"] = {7, "camera", 0, wire::StreamFrame{3, 42, {0, 1, 2, 0xFE, 0xFF}}};
  m["tag_observation"] = {8, "device", 0, wire::TagSighting{11, {{0, 0, 1}, UnitQuaternion::from_unit(0, 1, 0, 0)}}};
  m["mode_change"] = {9, "", 0, wire::ModeChange{ShadingMode(NaturalColor{2.0, 4.0})}};
  m["heartbeat"] = wire::make_heartbeat(0);
  m["heartbeat_flags"] = wire::make_heartbeat(123456789);
  m["heartbeat_flags"].flags = 0xBEEF;
  return m;
}

}  // namespace asab::test
