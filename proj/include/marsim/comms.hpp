// Copyright 2026 The marsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acoustic modems, USBL positioning and visual-light links.
// Transducer boresight is the +X axis of the node's mount frame.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "marsim/core/noise.hpp"
#include "marsim/core/scene.hpp"

namespace marsim::comms {

inline constexpr double kDefaultSoundSpeed = 1500.0;  // m/s
inline constexpr std::size_t kDefaultPayloadCap = 4096;

struct AcousticNode {
  int id = 0;
  int mount_body = 0;  // instance id of the carrying body, 0 = world
  Pose local_pose;
  double cone_half_angle = kPi;  // π = omnidirectional
  double max_range = 1e4;

  void validate() const {
    require(cone_half_angle > 0.0 && cone_half_angle <= kPi, "AcousticNode: cone_half_angle must be in (0, pi]");
    require(max_range > 0.0, "AcousticNode: max_range must be > 0");
  }
};

struct VlcNode {
  int id = 0;
  int mount_body = 0;
  Pose local_pose;
  double beam_half_angle = kPi / 4;
  double max_range_clear = 50.0;
  double turbidity_coeff = 0.0;  // 1/m
  double link_threshold = 0.1;

  void validate() const {
    require(beam_half_angle > 0.0 && beam_half_angle <= 0.5 * kPi, "VlcNode: beam_half_angle must be in (0, pi/2]");
    require(max_range_clear > 0.0, "VlcNode: max_range_clear must be > 0");
    require(turbidity_coeff >= 0.0, "VlcNode: turbidity_coeff must be >= 0");
    require(link_threshold > 0.0 && link_threshold <= 1.0, "VlcNode: link_threshold must be in (0,1]");
  }
};

struct AcousticMessage {
  int src = 0;
  int dst = 0;
  std::vector<std::uint8_t> payload;
  double emit_time = 0.0;
};

/// Dropped is the seeded quality-of-service loss applied after a geometric delivery.
enum class Outcome { Delivered, BlockedOcclusion, OutOfRange, OutsideCone, Dropped };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Delivered: return "Delivered";
    case Outcome::BlockedOcclusion: return "BlockedOcclusion";
    case Outcome::OutOfRange: return "OutOfRange";
    case Outcome::OutsideCone: return "OutsideCone";
    case Outcome::Dropped: return "Dropped";
  }
  return "?";
}

struct Delivery {
  double receive_time = kInf;
  Outcome outcome = Outcome::OutOfRange;
};

/// Angle between the node's boresight and the direction to `target`.
inline double off_boresight(const Pose& node_world, const Vec3& target) {
  const Vec3 axis = node_world.transform_vector(Vec3::UnitX());
  const Vec3 to = (target - node_world.position).normalized();
  return std::acos(std::clamp(axis.dot(to), -1.0, 1.0));
}

inline bool within_cone(double angle, double half_angle) { return half_angle >= kPi || angle <= half_angle; }

/// Straight-line spherical-wavefront propagation with gating precedence
/// OutOfRange > OutsideCone > BlockedOcclusion. Geometry is taken as given
/// (the emit-time snapshot).
inline Delivery propagate_acoustic(const Scene& scene, const AcousticNode& tx, const Pose& tx_world,
                                   const AcousticNode& rx, const Pose& rx_world, const AcousticMessage& msg,
                                   double sound_speed = kDefaultSoundSpeed) {
  require(sound_speed > 0.0, "propagate_acoustic: sound speed must be > 0");
  const double d = (rx_world.position - tx_world.position).norm();
  if (d > std::min(tx.max_range, rx.max_range)) return {kInf, Outcome::OutOfRange};
  if (d > 0.0) {
    if (!within_cone(off_boresight(tx_world, rx_world.position), tx.cone_half_angle) ||
        !within_cone(off_boresight(rx_world, tx_world.position), rx.cone_half_angle))
      return {kInf, Outcome::OutsideCone};
    const int ignore[] = {tx.mount_body, rx.mount_body};
    if (scene.occluded(tx_world.position, rx_world.position, ignore)) return {kInf, Outcome::BlockedOcclusion};
  }
  return {msg.emit_time + d / sound_speed, Outcome::Delivered};
}

struct UsblFix {
  double range = 0.0;
  double bearing = 0.0;    // (-π, π], about the receiver's +Z from +X
  double elevation = 0.0;  // [-π/2, π/2], positive towards +Z
  bool noise_applied = false;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

/// Position of the transponder `tx` in spherical coordinates of the receiver `rx`.
inline UsblFix usbl_fix(const Pose& tx_world, const Pose& rx_world, double range_noise_std, double angle_noise_std,
                        std::uint64_t seed, std::uint64_t query_index) {
  const Vec3 rel = rx_world.inverse_transform_point(tx_world.position);
  const double r = rel.norm();
  require(r > 0.0, "usbl_fix: transceiver and transponder coincide");
  UsblFix fix;
  fix.range = r;
  fix.bearing = std::atan2(rel.y(), rel.x());
  fix.elevation = std::asin(std::clamp(rel.z() / r, -1.0, 1.0));
  if (range_noise_std > 0.0 || angle_noise_std > 0.0) {
    fix.noise_applied = true;
    fix.range = std::max(0.0, fix.range + range_noise_std * noise::gaussian({seed, query_index, 0x72ULL}));
    fix.bearing = wrap_angle(fix.bearing + angle_noise_std * noise::gaussian({seed, query_index, 0x62ULL}));
    fix.elevation = std::clamp(fix.elevation + angle_noise_std * noise::gaussian({seed, query_index, 0x65ULL}),
                               -0.5 * kPi, 0.5 * kPi);
  }
  return fix;
}

/// Optical link quality in [0,1]: Beer–Lambert attenuation times both
/// boresight alignment cosines; 0 when not mutually facing, occluded or too far.
inline double vlc_link(const Scene& scene, const VlcNode& tx, const Pose& tx_world, const VlcNode& rx,
                       const Pose& rx_world) {
  const double d = (rx_world.position - tx_world.position).norm();
  if (d <= 0.0 || d > std::min(tx.max_range_clear, rx.max_range_clear)) return 0.0;
  const double a_tx = off_boresight(tx_world, rx_world.position);
  const double a_rx = off_boresight(rx_world, tx_world.position);
  if (a_tx > tx.beam_half_angle || a_rx > rx.beam_half_angle) return 0.0;
  const int ignore[] = {tx.mount_body, rx.mount_body};
  if (scene.occluded(tx_world.position, rx_world.position, ignore)) return 0.0;
  const double k = std::max(tx.turbidity_coeff, rx.turbidity_coeff);
  return std::clamp(std::exp(-k * d) * std::cos(a_tx) * std::cos(a_rx), 0.0, 1.0);
}

struct ScheduledMessage {
  AcousticMessage message;
  Delivery delivery;
  std::uint64_t sequence = 0;  // emit order
  double quality = 1.0;
};

/// Queue of in-flight messages. Geometry is resolved by the caller at emit
/// time; the queue only orders and releases deliveries.
class ChannelScheduler {
 public:
  explicit ChannelScheduler(double drop_probability = 0.0, std::uint64_t seed = 0)
      : drop_probability_(drop_probability), seed_(seed) {
    require(drop_probability >= 0.0 && drop_probability <= 1.0, "ChannelScheduler: drop probability in [0,1]");
  }

  /// Registers an emitted message; returns its final record (after QoS drop).
  ScheduledMessage submit(AcousticMessage msg, Delivery delivery, double quality = 1.0) {
    ScheduledMessage entry{std::move(msg), delivery, next_sequence_++, quality};
    if (entry.delivery.outcome == Outcome::Delivered && drop_probability_ > 0.0 &&
        noise::uniform({seed_, 0x716f73ULL, entry.sequence}) < drop_probability_) {
      entry.delivery = {kInf, Outcome::Dropped};
    }
    if (entry.delivery.outcome == Outcome::Delivered) pending_.push_back(entry);
    return entry;
  }

  /// All deliveries due by `now`, ordered by (receive_time, emit order).
  std::vector<ScheduledMessage> poll(double now) {
    require(now >= last_poll_, "ChannelScheduler: time must not go backwards");
    last_poll_ = now;
    auto due_end = std::stable_partition(pending_.begin(), pending_.end(), [&](const ScheduledMessage& m) {
      return m.delivery.receive_time <= now;
    });
    std::vector<ScheduledMessage> due(pending_.begin(), due_end);
    pending_.erase(pending_.begin(), due_end);
    std::sort(due.begin(), due.end(), [](const ScheduledMessage& a, const ScheduledMessage& b) {
      if (a.delivery.receive_time != b.delivery.receive_time)
        return a.delivery.receive_time < b.delivery.receive_time;
      return a.sequence < b.sequence;
    });
    return due;
  }

  std::size_t pending() const { return pending_.size(); }

 private:
  double drop_probability_;
  std::uint64_t seed_;
  std::uint64_t next_sequence_ = 0;
  double last_poll_ = -kInf;
  std::vector<ScheduledMessage> pending_;
};

}  // namespace marsim::comms
