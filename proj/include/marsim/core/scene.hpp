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

// Scene snapshot and CPU ray casting.
//
// World frame is right-handed with +Z up; the water surface is the plane z = 0.
// Image-like sensors use the optical frame: +Z along the optical axis, +X to the
// right of the image and +Y down. Pixel (u, v) has its centre at image
// coordinate (u, v).

#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marsim/core/bvh.hpp"
#include "marsim/core/parallel.hpp"

namespace marsim {

inline constexpr double kRayEpsilon = 1e-6;

struct Instance {
  int id = 0;  // > 0; 0 is reserved for background
  std::shared_ptr<const MeshBvh> mesh;
  std::shared_ptr<const Material> material;
  Pose pose;
  bool ocean_surface = false;
};

struct Hit {
  int instance_id = 0;
  double range = kInf;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // interpolated, world frame
  Vec2 uv = Vec2::Zero();
  const Material* material = nullptr;  // owned by the scene
  bool ocean_surface = false;
};

struct RayOptions {
  double t_max = kInf;
  std::span<const int> ignore = {};  // instance ids skipped by the cast
};

/// Immutable set of posed mesh instances.
class Scene {
 public:
  Scene() = default;

  explicit Scene(std::vector<Instance> instances) : instances_(std::move(instances)) {
    std::vector<int> ids;
    for (const auto& inst : instances_) {
      if (inst.id <= 0) throw ConfigError("Scene: instance ids must be positive");
      if (!inst.mesh || !inst.material) throw ConfigError("Scene: instance without mesh or material");
      inst.material->validate();
      ids.push_back(inst.id);
      bounds_.push_back(world_bounds(inst));
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ConfigError("Scene: duplicate instance id");
  }

  const std::vector<Instance>& instances() const { return instances_; }
  bool empty() const { return instances_.empty(); }

  const Instance* find(int id) const {
    for (const auto& inst : instances_)
      if (inst.id == id) return &inst;
    return nullptr;
  }

  /// Nearest hit along a unit-direction ray, excluding t ≤ 0.
  std::optional<Hit> raycast(const Vec3& origin, const Vec3& direction, const RayOptions& opts = {}) const {
    require(is_unit(direction), "raycast: direction must have unit norm");
    const Vec3 inv(1.0 / direction.x(), 1.0 / direction.y(), 1.0 / direction.z());
    std::optional<Hit> best;
    double limit = opts.t_max;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      if (std::find(opts.ignore.begin(), opts.ignore.end(), inst.id) != opts.ignore.end()) continue;
      if (!bounds_[i].intersects(origin, inv, limit)) continue;
      const Vec3 lo = inst.pose.inverse_transform_point(origin);
      const Vec3 ld = inst.pose.inverse_transform_vector(direction);
      auto th = inst.mesh->intersect(lo, ld, 0.0, limit);
      if (!th) continue;
      if (best && !(th->t < best->range)) continue;
      limit = th->t;
      best = make_hit(inst, *th, origin, direction);
    }
    return best;
  }

  /// True when geometry blocks the open segment a→b (endpoints pulled in by kRayEpsilon).
  bool occluded(const Vec3& a, const Vec3& b, std::span<const int> ignore = {}) const {
    const Vec3 d = b - a;
    const double len = d.norm();
    if (len <= 2.0 * kRayEpsilon) return false;
    const Vec3 dir = d / len;
    return raycast(a + kRayEpsilon * dir, dir, RayOptions{len - 2.0 * kRayEpsilon, ignore}).has_value();
  }

 private:
  static Aabb world_bounds(const Instance& inst) {
    const Aabb local = inst.mesh->bounds();
    Aabb out;
    if (local.empty()) return out;
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1) ? local.hi.x() : local.lo.x(), (c & 2) ? local.hi.y() : local.lo.y(),
                        (c & 4) ? local.hi.z() : local.lo.z());
      out.extend(inst.pose.transform_point(corner));
    }
    // rotation round-off can shave the last ulp off a face
    const Vec3 pad = Vec3::Constant(1e-9) + 1e-12 * out.hi.cwiseAbs().cwiseMax(out.lo.cwiseAbs());
    out.lo -= pad;
    out.hi += pad;
    return out;
  }

  static Hit make_hit(const Instance& inst, const TriangleHit& th, const Vec3& origin, const Vec3& dir) {
    const auto& mesh = inst.mesh->mesh();
    const auto& tri = mesh.triangles()[th.triangle];
    const double b0 = 1.0 - th.b1 - th.b2;
    Vec3 n = b0 * mesh.normals()[tri[0]] + th.b1 * mesh.normals()[tri[1]] + th.b2 * mesh.normals()[tri[2]];
    if (n.norm() < 1e-12) {
      const auto& v = mesh.vertices();
      n = (v[tri[1]] - v[tri[0]]).cross(v[tri[2]] - v[tri[0]]);
    }
    Hit h;
    h.instance_id = inst.id;
    h.range = th.t;
    h.point = origin + th.t * dir;
    h.normal = inst.pose.transform_vector(n.normalized());
    if (mesh.has_uvs())
      h.uv = b0 * mesh.uvs()[tri[0]] + th.b1 * mesh.uvs()[tri[1]] + th.b2 * mesh.uvs()[tri[2]];
    h.material = inst.material.get();
    h.ocean_surface = inst.ocean_surface;
    return h;
  }

  std::vector<Instance> instances_;
  std::vector<Aabb> bounds_;
};

inline std::optional<Hit> raycast(const Scene& scene, const Vec3& origin, const Vec3& direction,
                                  const RayOptions& opts = {}) {
  return scene.raycast(origin, direction, opts);
}

// ---------------------------------------------------------------------------
// Render buffers

struct LightingEnvironment {
  Vec3 sun_direction = Vec3(0.3, 0.2, 1.0).normalized();  // towards the sun
  double ambient = 0.2;
  double background_luminance = 0.0;
  bool shadows = true;

  void validate() const {
    require(is_unit(sun_direction), "LightingEnvironment: sun_direction must have unit norm");
    require(ambient >= 0.0 && ambient <= 1.0, "LightingEnvironment: ambient must be in [0,1]");
    require(background_luminance >= 0.0, "LightingEnvironment: background luminance must be >= 0");
  }
};

struct RenderBuffers {
  Grid<double> depth;  // along the optical axis; +inf where nothing was hit
  Grid<double> range;  // along the ray
  Grid<Vec3> normal;
  Grid<int> instance_id;
  Grid<int> class_id;
  Grid<double> luminance;

  RenderBuffers() = default;
  RenderBuffers(int w, int h)
      : depth(w, h, kInf), range(w, h, kInf), normal(w, h, Vec3::Zero()), instance_id(w, h, 0),
        class_id(w, h, 0), luminance(w, h, 0.0) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

/// Sun visibility from a surface point; the origin is nudged off the surface.
inline bool sun_visible(const Scene& scene, const Hit& hit, const Vec3& sun_direction) {
  const Vec3 side = hit.normal.dot(sun_direction) >= 0.0 ? hit.normal : Vec3(-hit.normal);
  return !scene.raycast(hit.point + kRayEpsilon * side, sun_direction).has_value();
}

/// World-frame unit ray through pixel (u, v) of a camera at `camera_pose`.
inline Vec3 pixel_ray(const Pose& camera_pose, const CameraIntrinsics& intr, int u, int v) {
  return camera_pose.transform_vector(intr.pixel_direction(u, v).normalized());
}

inline RenderBuffers render_buffers(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr,
                                    const LightingEnvironment& lighting) {
  intr.validate();
  lighting.validate();
  RenderBuffers out(intr.width, intr.height);
  std::fill(out.luminance.data().begin(), out.luminance.data().end(), lighting.background_luminance);
  parallel_for(intr.height, [&](int v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 d_cam = intr.pixel_direction(u, v);
      const double len = d_cam.norm();
      const Vec3 dir = camera_pose.transform_vector(d_cam / len);
      const auto hit = scene.raycast(camera_pose.position, dir);
      if (!hit) continue;
      out.range(u, v) = hit->range;
      out.depth(u, v) = hit->range / len;
      out.normal(u, v) = hit->normal;
      out.instance_id(u, v) = hit->instance_id;
      out.class_id(u, v) = hit->material->class_id;
      double direct = std::max(0.0, hit->normal.dot(lighting.sun_direction));
      if (direct > 0.0 && lighting.shadows && !sun_visible(scene, *hit, lighting.sun_direction)) direct = 0.0;
      out.luminance(u, v) = hit->material->albedo * (lighting.ambient + direct);
    }
  });
  return out;
}

}  // namespace marsim
