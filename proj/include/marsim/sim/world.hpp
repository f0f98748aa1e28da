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

// Shared simulation clock: body motion, actuators and channels per tick.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "marsim/comms.hpp"
#include "marsim/core/noise.hpp"
#include "marsim/sim/scenario.hpp"

namespace marsim::sim {

struct MessageRecord {
  double emit_time = 0.0;
  int src = 0;
  int dst = 0;
  comms::Outcome outcome = comms::Outcome::Delivered;
  double receive_time = kInf;
  double quality = 1.0;
};

/// Seed for subsystem `index` of kind `tag`; all run randomness derives from it.
inline std::uint64_t subsystem_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return noise::hash_key({seed, tag, index});
}

inline constexpr std::uint64_t kSensorTag = 0x73656e736f72ULL;
inline constexpr std::uint64_t kCommsTag = 0x636f6d6d73ULL;

class World {
 public:
  explicit World(std::shared_ptr<const ScenarioConfig> cfg) : cfg_(std::move(cfg)) { reset(); }

  /// Point-mass dynamics for one body (mass and thrust only); its trajectory is
  /// then used only for the initial pose.
  void set_dynamic_vehicle(int body_index, double mass) {
    require(body_index >= 0 && body_index < static_cast<int>(cfg_->bodies.size()), "World: bad vehicle index");
    require(mass > 0.0, "World: vehicle mass must be > 0");
    vehicle_ = body_index;
    vehicle_mass_ = mass;
    reset();
  }

  void reset() {
    tick_ = 0;
    states_.assign(cfg_->bodies.size(), RigidBodyState{});
    sample_bodies();
    thrusters_.clear();
    inputs_.clear();
    for (const auto& t : cfg_->thrusters) {
      thrusters_.emplace_back(t.rotor, t.generation);
      inputs_.push_back(t.input_at(0.0));
    }
    tethers_.clear();
    for (const auto& t : cfg_->tethers) {
      std::vector<tether::Attachment> atts;
      for (const auto& a : t.attachments) {
        tether::Attachment att;
        att.endpoint = a.endpoint;
        if (a.fixed) att.mode = tether::FixedWorld{*a.fixed};
        else att.mode = tether::BodyFrame{cfg_->bodies[cfg_->body_index(a.body)].id, a.offset};
        atts.push_back(att);
      }
      tethers_.emplace_back(t.config, tether::TetherState::straight(t.config, t.start, t.direction), std::move(atts));
    }
    scheduler_ = comms::ChannelScheduler(cfg_->channel.drop_probability, subsystem_seed(cfg_->seed, kCommsTag, 0));
    emitted_.assign(cfg_->channel.messages.size(), false);
    log_.clear();
    rebuild_scene();
    service_comms();
  }

  /// One base step: trajectories, thrusters, tethers, then the channel queue.
  /// `actions` overrides the thruster input schedules when given.
  void advance(const std::vector<double>* actions = nullptr) {
    const double dt = cfg_->base_dt;
    const double t_prev = time();
    std::vector<RigidBodyState> before = states_;
    ++tick_;
    // thrusters integrate over [t_prev, t] with inputs held from t_prev
    Vec3 vehicle_force = Vec3::Zero();
    for (std::size_t i = 0; i < thrusters_.size(); ++i) {
      const auto& spec = cfg_->thrusters[i];
      inputs_[i] = actions ? (*actions)[i] : spec.input_at(t_prev);
      const RigidBodyState mount = mount_state(spec.mount, before);
      const Vec3 axis = mount.pose.transform_vector(Vec3::UnitX());
      thrusters_[i].step(inputs_[i], mount.linear_velocity.dot(axis), dt);
      if (vehicle_ >= 0 && spec.mount.body == cfg_->bodies[vehicle_].name) vehicle_force += thrusters_[i].thrust() * axis;
    }
    sample_bodies();
    if (vehicle_ >= 0) {
      auto& s = states_[vehicle_];
      const RigidBodyState& b = before[vehicle_];
      s = b;
      s.linear_velocity = b.linear_velocity + vehicle_force / vehicle_mass_ * dt;
      s.pose = Pose(b.pose.position + s.linear_velocity * dt, b.pose.orientation);
    }
    const auto lookup = [this](int id) -> Pose {
      for (std::size_t i = 0; i < cfg_->bodies.size(); ++i)
        if (cfg_->bodies[i].id == id) return states_[i].pose;
      throw ConfigError("tether attached to unknown body id " + std::to_string(id));
    };
    for (std::size_t i = 0; i < tethers_.size(); ++i) {
      const int n = cfg_->tethers[i].substeps;
      for (int k = 0; k < n; ++k) tethers_[i].step(cfg_->gravity, dt / n, lookup);
    }
    rebuild_scene();
    service_comms();
  }

  std::int64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * cfg_->base_dt; }
  const ScenarioConfig& config() const { return *cfg_; }
  const Scene& scene() const { return scene_; }
  const RigidBodyState& body_state(int index) const { return states_.at(index); }

  /// Motion state of every body with geometry, keyed by instance id.
  std::map<int, RigidBodyState> instance_states() const {
    std::map<int, RigidBodyState> out;
    for (std::size_t i = 0; i < cfg_->bodies.size(); ++i)
      if (!cfg_->bodies[i].mesh.empty()) out[cfg_->bodies[i].id] = states_[i];
    return out;
  }

  RigidBodyState mount_state(const MountSpec& m) const { return mount_state(m, states_); }

  const std::vector<thruster::Thruster>& thrusters() const { return thrusters_; }
  const std::vector<double>& thruster_inputs() const { return inputs_; }
  const std::vector<tether::Tether>& tethers() const { return tethers_; }

  /// Messages resolved so far (failures at emit, deliveries when due).
  const std::vector<MessageRecord>& message_log() const { return log_; }

  /// Releases every in-flight message; call once at the end of a run.
  void flush_messages() {
    for (const auto& m : scheduler_.poll(kInf)) log_.push_back(record(m));
  }

 private:
  RigidBodyState mount_state(const MountSpec& m, const std::vector<RigidBodyState>& states) const {
    RigidBodyState out;
    if (m.body.empty()) {
      out.pose = m.local;
      return out;
    }
    const RigidBodyState& b = states[cfg_->body_index(m.body)];
    out.pose = b.pose.compose(m.local);
    out.linear_velocity = b.point_velocity(out.pose.position);
    out.angular_velocity = b.angular_velocity;
    return out;
  }

  void sample_bodies() {
    for (std::size_t i = 0; i < cfg_->bodies.size(); ++i) {
      if (static_cast<int>(i) == vehicle_ && tick_ > 0) continue;
      states_[i] = cfg_->bodies[i].trajectory.sample(time(), cfg_->bodies[i].center_of_rotation);
      if (static_cast<int>(i) == vehicle_) {
        states_[i].linear_velocity.setZero();
        states_[i].angular_velocity.setZero();
      }
    }
  }

  void rebuild_scene() {
    std::vector<Instance> instances;
    for (std::size_t i = 0; i < cfg_->bodies.size(); ++i) {
      const auto& b = cfg_->bodies[i];
      if (b.mesh.empty()) continue;
      instances.push_back(Instance{b.id, cfg_->meshes.at(b.mesh), cfg_->materials.at(b.material), states_[i].pose,
                                   b.ocean_surface});
    }
    scene_ = Scene(std::move(instances));
  }

  static MessageRecord record(const comms::ScheduledMessage& m) {
    return MessageRecord{m.message.emit_time, m.message.src, m.message.dst, m.delivery.outcome,
                         m.delivery.receive_time, m.quality};
  }

  comms::Outcome vlc_failure(const CommNodeSpec& tx, const Pose& txw, const CommNodeSpec& rx, const Pose& rxw) const {
    const double d = (rxw.position - txw.position).norm();
    if (d > std::min(tx.vlc.max_range_clear, rx.vlc.max_range_clear)) return comms::Outcome::OutOfRange;
    if (comms::off_boresight(txw, rxw.position) > tx.vlc.beam_half_angle ||
        comms::off_boresight(rxw, txw.position) > rx.vlc.beam_half_angle)
      return comms::Outcome::OutsideCone;
    const int ignore[] = {tx.vlc.mount_body, rx.vlc.mount_body};
    if (scene_.occluded(txw.position, rxw.position, ignore)) return comms::Outcome::BlockedOcclusion;
    return comms::Outcome::OutOfRange;  // attenuated below the link threshold
  }

  void service_comms() {
    const double now = time();
    const auto& msgs = cfg_->channel.messages;
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      if (emitted_[i] || msgs[i].t > now + 1e-9) continue;
      emitted_[i] = true;
      const auto& tx = cfg_->comm_nodes[cfg_->node_index(msgs[i].src)];
      const auto& rx = cfg_->comm_nodes[cfg_->node_index(msgs[i].dst)];
      const Pose txw = mount_state(tx.mount).pose, rxw = mount_state(rx.mount).pose;
      comms::AcousticMessage m{tx.id(), rx.id(), std::vector<std::uint8_t>(msgs[i].payload.begin(), msgs[i].payload.end()),
                               now};
      comms::ScheduledMessage entry;
      if (tx.kind == NodeKind::Acoustic) {
        const auto delivery = comms::propagate_acoustic(scene_, tx.acoustic, txw, rx.acoustic, rxw, m, cfg_->channel.sound_speed);
        entry = scheduler_.submit(std::move(m), delivery);
      } else {
        const double q = comms::vlc_link(scene_, tx.vlc, txw, rx.vlc, rxw);
        const double threshold = std::max(tx.vlc.link_threshold, rx.vlc.link_threshold);
        const comms::Delivery delivery = q >= threshold ? comms::Delivery{now, comms::Outcome::Delivered}
                                                        : comms::Delivery{kInf, vlc_failure(tx, txw, rx, rxw)};
        entry = scheduler_.submit(std::move(m), delivery, q);
      }
      if (entry.delivery.outcome != comms::Outcome::Delivered) log_.push_back(record(entry));
    }
    for (const auto& m : scheduler_.poll(now)) log_.push_back(record(m));
  }

  std::shared_ptr<const ScenarioConfig> cfg_;
  std::int64_t tick_ = 0;
  std::vector<RigidBodyState> states_;
  Scene scene_;
  std::vector<thruster::Thruster> thrusters_;
  std::vector<double> inputs_;
  std::vector<tether::Tether> tethers_;
  comms::ChannelScheduler scheduler_;
  std::vector<bool> emitted_;
  std::vector<MessageRecord> log_;
  int vehicle_ = -1;
  double vehicle_mass_ = 1.0;
};

}  // namespace marsim::sim
