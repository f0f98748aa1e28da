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

// Tether cable as a chain of spheres joined by stiff spring-damper links.

#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "marsim/core/types.hpp"

namespace marsim::tether {

struct TetherConfig {
  int n_spheres = 10;
  double mass_per_sphere = 0.1;
  double sphere_radius = 0.02;
  double segment_rest_length = 0.5;
  double total_length = 4.5;
  double joint_damping = 0.01;     // N·m·s/rad, bending
  double stretch_stiffness = 1e4;  // N/m
  double axial_damping = 10.0;     // N·s/m along each segment
  double water_density = 1025.0;
  double drag_coefficient = 1.0;

  static TetherConfig uniform(int n, double spacing) {
    TetherConfig c;
    c.n_spheres = n;
    c.segment_rest_length = spacing;
    c.total_length = (n - 1) * spacing;
    return c;
  }

  double sphere_volume() const { return 4.0 / 3.0 * kPi * sphere_radius * sphere_radius * sphere_radius; }
  double cross_section() const { return kPi * sphere_radius * sphere_radius; }

  void validate() const {
    require(n_spheres >= 2, "TetherConfig: n_spheres must be >= 2");
    require(mass_per_sphere > 0, "TetherConfig: mass_per_sphere must be > 0");
    require(sphere_radius > 0, "TetherConfig: sphere_radius must be > 0");
    require(segment_rest_length > 0, "TetherConfig: segment_rest_length must be > 0");
    require(std::abs(total_length - (n_spheres - 1) * segment_rest_length) < 1e-9,
            "TetherConfig: total_length must equal (n_spheres - 1) * segment_rest_length");
    require(joint_damping >= 0 && axial_damping >= 0, "TetherConfig: damping must be >= 0");
    require(stretch_stiffness > 0, "TetherConfig: stretch_stiffness must be > 0");
    require(water_density >= 0 && drag_coefficient >= 0, "TetherConfig: water_density and drag must be >= 0");
  }
};

struct TetherState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  /// Straight chain from `start` along `direction` at rest spacing, at rest.
  static TetherState straight(const TetherConfig& cfg, const Vec3& start, const Vec3& direction) {
    TetherState s;
    const Vec3 d = direction.normalized();
    for (int i = 0; i < cfg.n_spheres; ++i) {
      s.positions.push_back(start + (i * cfg.segment_rest_length) * d);
      s.velocities.push_back(Vec3::Zero());
    }
    return s;
  }
};

enum class Endpoint { First, Last };

struct FixedWorld {
  Vec3 point = Vec3::Zero();
};
struct BodyFrame {
  int body_id = 0;
  Vec3 local_offset = Vec3::Zero();
};

struct Attachment {
  Endpoint endpoint = Endpoint::First;
  std::variant<FixedWorld, BodyFrame> mode;
};

/// Resolves body ids to their current world pose.
using BodyPoseLookup = std::function<Pose(int)>;

struct StepOutput {
  TetherState state;
  std::vector<Vec3> endpoint_forces;  // force the tether exerts on each attachment, same order
};

inline void validate_attachments(const std::vector<Attachment>& attachments) {
  int first = 0, last = 0;
  for (const auto& a : attachments) (a.endpoint == Endpoint::First ? first : last)++;
  require(first <= 1 && last <= 1, "tether: at most one attachment per endpoint");
}

inline Vec3 attachment_point(const Attachment& a, const BodyPoseLookup& lookup) {
  if (const auto* f = std::get_if<FixedWorld>(&a.mode)) return f->point;
  const auto& b = std::get<BodyFrame>(a.mode);
  require(static_cast<bool>(lookup), "tether: body attachment without a pose lookup");
  return lookup(b.body_id).transform_point(b.local_offset);
}

/// Net external + internal force on every sphere.
inline std::vector<Vec3> tether_forces(const TetherState& s, const TetherConfig& cfg, const Vec3& gravity) {
  const int n = cfg.n_spheres;
  std::vector<Vec3> f(n, Vec3::Zero());
  const double displaced = cfg.water_density * cfg.sphere_volume();
  for (int i = 0; i < n; ++i) {
    f[i] = cfg.mass_per_sphere * gravity;
    if (s.positions[i].z() < 0.0) {
      f[i] -= displaced * gravity;
      const Vec3& v = s.velocities[i];
      f[i] -= 0.5 * cfg.water_density * cfg.drag_coefficient * cfg.cross_section() * v.norm() * v;
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    const Vec3 d = s.positions[i + 1] - s.positions[i];
    const double len = d.norm();
    if (len <= 0.0) continue;
    const Vec3 u = d / len;
    const double rate = (s.velocities[i + 1] - s.velocities[i]).dot(u);
    const Vec3 pull = (cfg.stretch_stiffness * (len - cfg.segment_rest_length) + cfg.axial_damping * rate) * u;
    f[i] += pull;
    f[i + 1] -= pull;
  }
  if (cfg.joint_damping > 0.0) {
    // couple opposing the relative angular rate of the two segments meeting at sphere i
    for (int i = 1; i + 1 < n; ++i) {
      const Vec3 a = s.positions[i] - s.positions[i - 1];
      const Vec3 b = s.positions[i + 1] - s.positions[i];
      const double a2 = a.squaredNorm(), b2 = b.squaredNorm();
      if (a2 <= 0.0 || b2 <= 0.0) continue;
      const Vec3 wa = a.cross(s.velocities[i] - s.velocities[i - 1]) / a2;
      const Vec3 wb = b.cross(s.velocities[i + 1] - s.velocities[i]) / b2;
      const Vec3 torque = -cfg.joint_damping * (wb - wa);  // acts on segment b, reaction on a
      const Vec3 fb = torque.cross(b) / b2;
      const Vec3 fa = -torque.cross(a) / a2;
      f[i + 1] += fb;
      f[i] -= fb;
      f[i] += fa;
      f[i - 1] -= fa;
    }
  }
  return f;
}

/// Semi-implicit Euler step followed by endpoint position constraints.
inline StepOutput tether_step(const TetherState& state, const TetherConfig& cfg,
                              const std::vector<Attachment>& attachments, const Vec3& gravity, double dt,
                              const BodyPoseLookup& lookup = {}) {
  cfg.validate();
  require(dt > 0.0, "tether_step: dt must be > 0");
  require(static_cast<int>(state.positions.size()) == cfg.n_spheres &&
              static_cast<int>(state.velocities.size()) == cfg.n_spheres,
          "tether_step: state size does not match n_spheres");
  validate_attachments(attachments);

  const auto forces = tether_forces(state, cfg, gravity);
  StepOutput out{state, {}};
  auto& x = out.state.positions;
  auto& v = out.state.velocities;
  for (int i = 0; i < cfg.n_spheres; ++i) {
    v[i] += (dt / cfg.mass_per_sphere) * forces[i];
    x[i] += dt * v[i];
  }
  for (const auto& a : attachments) {
    const int i = a.endpoint == Endpoint::First ? 0 : cfg.n_spheres - 1;
    const Vec3 target = attachment_point(a, lookup);
    const Vec3 v_target = (target - state.positions[i]) / dt;
    const Vec3 impulse = cfg.mass_per_sphere * (v_target - v[i]);
    x[i] = target;
    v[i] = v_target;
    out.endpoint_forces.push_back(-impulse / dt);
  }
  return out;
}

/// Signed spring tension of a segment, positive when stretched.
inline double tether_tension(const TetherState& state, const TetherConfig& cfg, int segment_index) {
  require(segment_index >= 0 && segment_index < cfg.n_spheres - 1, "tether_tension: segment index out of range");
  const double len = (state.positions[segment_index + 1] - state.positions[segment_index]).norm();
  return cfg.stretch_stiffness * (len - cfg.segment_rest_length);
}

/// Kinetic + gravitational/buoyant + elastic energy (J).
inline double mechanical_energy(const TetherState& s, const TetherConfig& cfg, const Vec3& gravity) {
  double e = 0.0;
  const double displaced = cfg.water_density * cfg.sphere_volume();
  for (int i = 0; i < cfg.n_spheres; ++i) {
    e += 0.5 * cfg.mass_per_sphere * s.velocities[i].squaredNorm();
    e -= cfg.mass_per_sphere * gravity.dot(s.positions[i]);
    if (s.positions[i].z() < 0.0) e += displaced * gravity.dot(s.positions[i]);
  }
  for (int i = 0; i + 1 < cfg.n_spheres; ++i) {
    const double stretch = (s.positions[i + 1] - s.positions[i]).norm() - cfg.segment_rest_length;
    e += 0.5 * cfg.stretch_stiffness * stretch * stretch;
  }
  return e;
}

class Tether {
 public:
  Tether(TetherConfig cfg, TetherState initial, std::vector<Attachment> attachments)
      : cfg_(cfg), state_(std::move(initial)), attachments_(std::move(attachments)) {
    cfg_.validate();
    validate_attachments(attachments_);
  }

  const std::vector<Vec3>& step(const Vec3& gravity, double dt, const BodyPoseLookup& lookup = {}) {
    auto out = tether_step(state_, cfg_, attachments_, gravity, dt, lookup);
    state_ = std::move(out.state);
    forces_ = std::move(out.endpoint_forces);
    return forces_;
  }

  const TetherState& state() const { return state_; }
  const TetherConfig& config() const { return cfg_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  const std::vector<Vec3>& endpoint_forces() const { return forces_; }

 private:
  TetherConfig cfg_;
  TetherState state_;
  std::vector<Attachment> attachments_;
  std::vector<Vec3> forces_;
};

}  // namespace marsim::tether
