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
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "marsim/core/mesh.hpp"

namespace marsim {

struct Aabb {
  Vec3 lo = Vec3::Constant(kInf);
  Vec3 hi = Vec3::Constant(-kInf);

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool empty() const { return lo.x() > hi.x(); }
  Vec3 centre() const { return 0.5 * (lo + hi); }

  /// Slab test; true when [t_enter, t_exit] overlaps [0, t_max].
  bool intersects(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double tn = (lo[a] - origin[a]) * inv_dir[a];
      double tf = (hi[a] - origin[a]) * inv_dir[a];
      if (tn > tf) std::swap(tn, tf);
      // NaN from 0 * inf (origin on a slab face, axis-parallel ray) must not reject
      if (!(tn <= t1) && !std::isnan(tn)) return false;
      if (!(tf >= t0) && !std::isnan(tf)) return false;
      if (tn > t0) t0 = tn;
      if (tf < t1) t1 = tf;
    }
    return t0 <= t1;
  }
};

struct TriangleHit {
  double t = kInf;
  double b1 = 0.0;  // barycentric weight of vertex 1
  double b2 = 0.0;  // barycentric weight of vertex 2
  std::uint32_t triangle = 0;
};

/// Möller–Trumbore, two-sided. Accepts t in (t_min, t_max).
inline std::optional<TriangleHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                                     const Vec3& v1, const Vec3& v2, double t_min,
                                                     double t_max) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - v0;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > t_min && t < t_max)) return std::nullopt;
  return TriangleHit{t, u, v, 0};
}

/// Bounding-volume hierarchy over one mesh, in the mesh's local frame.
class MeshBvh {
 public:
  explicit MeshBvh(TriangleMesh mesh) : mesh_(std::move(mesh)) {
    const auto& tris = mesh_.triangles();
    order_.resize(tris.size());
    std::iota(order_.begin(), order_.end(), 0u);
    centroids_.reserve(tris.size());
    for (const auto& t : tris) {
      const auto& v = mesh_.vertices();
      centroids_.push_back((v[t[0]] + v[t[1]] + v[t[2]]) / 3.0);
    }
    if (!tris.empty()) {
      nodes_.emplace_back();
      build(0, 0, static_cast<std::uint32_t>(tris.size()));
    }
    centroids_.clear();
    centroids_.shrink_to_fit();
  }

  const TriangleMesh& mesh() const { return mesh_; }
  Aabb bounds() const { return nodes_.empty() ? Aabb{} : nodes_.front().box; }

  std::optional<TriangleHit> intersect(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
    if (nodes_.empty()) return std::nullopt;
    const Vec3 inv_dir(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    std::optional<TriangleHit> best;
    double limit = t_max;
    std::array<std::uint32_t, 64> stack{};
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!node.box.intersects(origin, inv_dir, limit)) continue;
      if (node.count > 0) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
          const auto tri_index = order_[i];
          const auto& tri = mesh_.triangles()[tri_index];
          const auto& v = mesh_.vertices();
          if (auto h = intersect_triangle(origin, dir, v[tri[0]], v[tri[1]], v[tri[2]], t_min, limit)) {
            // equal t: keep the lower triangle index so the result matches a linear scan
            if (!best || h->t < best->t || (h->t == best->t && tri_index < best->triangle)) {
              h->triangle = tri_index;
              best = h;
              limit = std::nextafter(h->t, kInf);
            }
          }
        }
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    }
    return best;
  }

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first index into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  // Fills nodes_[index]; children of an inner node occupy two consecutive slots.
  void build(std::uint32_t index, std::uint32_t begin, std::uint32_t end) {
    Aabb box, cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
      const auto& t = mesh_.triangles()[order_[i]];
      for (auto vi : t) box.extend(mesh_.vertices()[vi]);
      cbox.extend(centroids_[order_[i]]);
    }
    nodes_[index].box = box;
    const std::uint32_t n = end - begin;
    const Vec3 extent = cbox.hi - cbox.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    if (n <= kLeafSize || extent[axis] <= 0.0) {
      nodes_[index].first = begin;
      nodes_[index].count = n;
      return;
    }
    const std::uint32_t mid = begin + n / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = centroids_[a][axis], cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const auto children = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[index].first = children;
    nodes_[index].count = 0;
    build(children, begin, mid);
    build(children + 1, mid, end);
  }

  static constexpr std::uint32_t kLeafSize = 4;

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> centroids_;
};

}  // namespace marsim
