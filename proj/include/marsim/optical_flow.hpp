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

// Ground-truth optical flow: on-screen velocity of scene content in px/s.

#pragma once

#include <map>
#include <string>

#include "marsim/core/scene.hpp"

namespace marsim::flow {

struct FlowField {
  Grid<Vec2> flow;
  Grid<std::uint8_t> valid;  // 1 where a fragment was hit
};

/// Velocity of a body fragment relative to the camera, camera frame.
inline Vec3 fragment_velocity(const Vec3& frag_world, const RigidBodyState& body, const RigidBodyState& camera) {
  const Vec3 v_world = body.linear_velocity + body.angular_velocity.cross(frag_world - body.world_center_of_rotation()) -
                       camera.linear_velocity - camera.angular_velocity.cross(frag_world - camera.pose.position);
  return camera.pose.inverse_transform_vector(v_world);
}

/// Time derivative of the pinhole projection of p (camera frame, Z > 0).
inline Vec2 project_flow(const Vec3& v_cam, const Vec3& p_cam, double focal_length) {
  require(p_cam.z() > 0.0, "project_flow: point must be in front of the camera");
  const double z = p_cam.z();
  const double z2 = z * z;
  return Vec2(focal_length * (v_cam.x() * z - p_cam.x() * v_cam.z()) / z2,
              focal_length * (v_cam.y() * z - p_cam.y() * v_cam.z()) / z2);
}

/// `camera.center_of_rotation` is ignored: the camera is treated as rotating
/// about its own optical centre.
inline FlowField render_flow(const Scene& scene, const RigidBodyState& camera, const CameraIntrinsics& intr,
                             const std::map<int, RigidBodyState>& body_states) {
  intr.validate();
  FlowField out{Grid<Vec2>(intr.width, intr.height, Vec2::Zero()), Grid<std::uint8_t>(intr.width, intr.height, 0)};
  const Pose& cam_pose = camera.pose;
  RigidBodyState cam = camera;
  cam.center_of_rotation.setZero();
  parallel_for(intr.height, [&](int v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 d_cam = intr.pixel_direction(u, v);
      const double len = d_cam.norm();
      const auto hit = scene.raycast(cam_pose.position, cam_pose.transform_vector(d_cam / len));
      if (!hit) continue;
      const auto it = body_states.find(hit->instance_id);
      if (it == body_states.end())
        throw ConfigError("render_flow: no motion state for visible instance " + std::to_string(hit->instance_id));
      // fragment in camera frame from the perpendicular depth, exact along the pixel ray
      const Vec3 p_cam = d_cam * (hit->range / len);
      const Vec3 v_cam = fragment_velocity(hit->point, it->second, cam);
      out.flow(u, v) = project_flow(v_cam, p_cam, intr.focal_length);
      out.valid(u, v) = 1;
    }
  });
  return out;
}

}  // namespace marsim::flow
