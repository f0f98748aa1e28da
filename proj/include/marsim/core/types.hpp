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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace marsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for bad user-supplied configuration (scenario files, meshes, tables).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

inline bool is_unit(const Vec3& v, double tol = 1e-9) { return std::abs(v.norm() - 1.0) <= tol; }

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Pose() = default;
  Pose(Vec3 p, Quat q) : position(std::move(p)), orientation(q) {
    require(std::abs(orientation.norm() - 1.0) <= 1e-9, "Pose: quaternion must have unit norm");
  }

  Vec3 transform_point(const Vec3& local) const { return position + orientation * local; }
  Vec3 transform_vector(const Vec3& local) const { return orientation * local; }
  Vec3 inverse_transform_point(const Vec3& world) const {
    return orientation.conjugate() * (world - position);
  }
  Vec3 inverse_transform_vector(const Vec3& world) const { return orientation.conjugate() * world; }

  /// this ∘ child: child expressed in this frame, result in the parent frame of this.
  Pose compose(const Pose& child) const {
    Quat q = orientation * child.orientation;
    q.normalize();
    return Pose(transform_point(child.position), q);
  }
};

struct RigidBodyState {
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Vec3 center_of_rotation = Vec3::Zero();  // body frame

  Vec3 world_center_of_rotation() const { return pose.transform_point(center_of_rotation); }

  /// Velocity of a world point rigidly attached to this body.
  Vec3 point_velocity(const Vec3& world_point) const {
    return linear_velocity + angular_velocity.cross(world_point - world_center_of_rotation());
  }
};

/// Row-major W×H plane. Index (x, y) with x the column.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    require(width >= 0 && height >= 0, "Grid: negative dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid& other) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct CameraIntrinsics {
  int width = 1;
  int height = 1;
  double focal_length = 1.0;  // pixels
  Vec2 principal_point = Vec2::Zero();

  /// Principal point at the image centre, pixel centres on integer coordinates.
  static CameraIntrinsics centered(int w, int h, double f) {
    return CameraIntrinsics{w, h, f, Vec2((w - 1) * 0.5, (h - 1) * 0.5)};
  }

  void validate() const {
    require(width >= 1 && height >= 1, "CameraIntrinsics: width and height must be >= 1");
    require(focal_length > 0.0 && std::isfinite(focal_length), "CameraIntrinsics: focal_length must be > 0");
  }

  /// Unnormalised camera-frame direction through the centre of pixel (u, v); z = 1.
  Vec3 pixel_direction(double u, double v) const {
    return Vec3((u - principal_point.x()) / focal_length, (v - principal_point.y()) / focal_length, 1.0);
  }

  Vec2 project(const Vec3& p_cam) const {
    return Vec2(focal_length * p_cam.x() / p_cam.z() + principal_point.x(),
                focal_length * p_cam.y() / p_cam.z() + principal_point.y());
  }
};

inline Quat quat_from_rpy(double roll, double pitch, double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

}  // namespace marsim
