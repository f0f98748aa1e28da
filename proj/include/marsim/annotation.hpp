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

// Ground-truth labels from render buffers.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "marsim/core/scene.hpp"

namespace marsim::annotation {

/// Normalised centre-size box; pixels are treated as unit cells.
struct YoloBox {
  int instance_id = 0;
  int class_id = 0;
  double cx = 0, cy = 0, w = 0, h = 0;
};

struct PixelExtent {
  int min_x, min_y, max_x, max_y;
  int class_id;
  long pixels;
};

/// Tight pixel extent of every visible instance, keyed by instance id.
inline std::map<int, PixelExtent> instance_extents(const RenderBuffers& b) {
  std::map<int, PixelExtent> ext;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      const int id = b.instance_id(x, y);
      if (id <= 0) continue;
      auto [it, fresh] = ext.try_emplace(id, PixelExtent{x, y, x, y, b.class_id(x, y), 0});
      auto& e = it->second;
      e.min_x = std::min(e.min_x, x);
      e.max_x = std::max(e.max_x, x);
      e.min_y = std::min(e.min_y, y);
      e.max_y = std::max(e.max_y, y);
      ++e.pixels;
    }
  }
  return ext;
}

/// One box per visible instance, ordered by instance id. Instances with fewer
/// than `min_pixels` visible pixels are skipped.
inline std::vector<YoloBox> bounding_boxes(const RenderBuffers& b, long min_pixels = 1) {
  std::vector<YoloBox> boxes;
  const double W = b.width(), H = b.height();
  for (const auto& [id, e] : instance_extents(b)) {
    if (e.pixels < min_pixels) continue;
    YoloBox box;
    box.instance_id = id;
    box.class_id = e.class_id;
    box.cx = (e.min_x + e.max_x + 1) / (2.0 * W);
    box.cy = (e.min_y + e.max_y + 1) / (2.0 * H);
    box.w = (e.max_x - e.min_x + 1) / W;
    box.h = (e.max_y - e.min_y + 1) / H;
    boxes.push_back(box);
  }
  return boxes;
}

struct SegmentationMasks {
  Grid<int> semantic;
  Grid<int> instance;
  Grid<std::pair<int, int>> panoptic;  // (class id, instance id)
};

inline SegmentationMasks segmentation(const RenderBuffers& b) {
  SegmentationMasks m{b.class_id, b.instance_id, Grid<std::pair<int, int>>(b.width(), b.height())};
  for (std::size_t i = 0; i < m.semantic.size(); ++i) m.panoptic[i] = {m.semantic[i], m.instance[i]};
  return m;
}

struct LabeledPoint {
  Vec3 position;  // camera frame
  int class_id = 0;
  int instance_id = 0;
};

using LabeledPointCloud = std::vector<LabeledPoint>;

/// Pinhole back-projection of every pixel with finite depth.
inline LabeledPointCloud point_cloud(const RenderBuffers& b, const CameraIntrinsics& intr) {
  LabeledPointCloud cloud;
  for (int v = 0; v < b.height(); ++v) {
    for (int u = 0; u < b.width(); ++u) {
      const double z = b.depth(u, v);
      if (!std::isfinite(z)) continue;
      const Vec3 p((u - intr.principal_point.x()) * z / intr.focal_length,
                   (v - intr.principal_point.y()) * z / intr.focal_length, z);
      cloud.push_back(LabeledPoint{p, b.class_id(u, v), b.instance_id(u, v)});
    }
  }
  return cloud;
}

}  // namespace marsim::annotation
