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

#pragma once

#include <algorithm>
#include <vector>

#include "marsim/core/types.hpp"

namespace marsim {

struct Waypoint {
  double t = 0.0;
  Pose pose;
};

enum class Interpolation { Hold, Linear };

class KinematicTrajectory {
 public:
  KinematicTrajectory() : waypoints_{Waypoint{}} {}

  KinematicTrajectory(std::vector<Waypoint> waypoints, Interpolation mode)
      : waypoints_(std::move(waypoints)), mode_(mode) {
    if (waypoints_.empty()) throw ConfigError("KinematicTrajectory: at least one waypoint required");
    for (std::size_t i = 1; i < waypoints_.size(); ++i)
      if (!(waypoints_[i].t > waypoints_[i - 1].t))
        throw ConfigError("KinematicTrajectory: waypoint times must be strictly increasing");
  }

  static KinematicTrajectory fixed(const Pose& pose) { return KinematicTrajectory({Waypoint{0.0, pose}}, Interpolation::Hold); }

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  Interpolation interpolation() const { return mode_; }

  /// Pose and analytic velocities at time t. Velocities are zero outside the
  /// waypoint span and under Hold; Linear segments have constant velocities.
  RigidBodyState sample(double t, const Vec3& center_of_rotation = Vec3::Zero()) const {
    RigidBodyState s;
    s.center_of_rotation = center_of_rotation;
    const auto& first = waypoints_.front();
    const auto& last = waypoints_.back();
    if (t < first.t) {
      s.pose = first.pose;
      return s;
    }
    if (t >= last.t) {
      s.pose = last.pose;
      return s;
    }
    // first waypoint with time > t; the segment is [k-1, k)
    const auto it = std::upper_bound(waypoints_.begin(), waypoints_.end(), t,
                                     [](double tv, const Waypoint& w) { return tv < w.t; });
    const auto& a = *(it - 1);
    const auto& b = *it;
    if (mode_ == Interpolation::Hold) {
      s.pose = a.pose;
      return s;
    }
    const double duration = b.t - a.t;
    const double alpha = (t - a.t) / duration;
    Quat qa = a.pose.orientation;
    Quat qb = b.pose.orientation;
    if (qa.dot(qb) < 0.0) qb.coeffs() = -qb.coeffs();
    Quat q = qa.slerp(alpha, qb);
    q.normalize();
    s.pose = Pose(a.pose.position + alpha * (b.pose.position - a.pose.position), q);
    s.linear_velocity = (b.pose.position - a.pose.position) / duration;
    // world-frame angular velocity of the relative rotation qb * qa^-1
    const Eigen::AngleAxisd rel(qb * qa.conjugate());
    s.angular_velocity = rel.axis() * (rel.angle() / duration);
    if (!all_finite(s.angular_velocity)) s.angular_velocity.setZero();
    // linear velocity above is of the frame origin; report the velocity of the
    // centre of rotation so that point_velocity() stays consistent
    s.linear_velocity += s.angular_velocity.cross(s.pose.orientation * center_of_rotation);
    return s;
  }

 private:
  std::vector<Waypoint> waypoints_;
  Interpolation mode_ = Interpolation::Hold;
};

inline RigidBodyState sample_trajectory(const KinematicTrajectory& traj, double t) { return traj.sample(t); }

}  // namespace marsim
