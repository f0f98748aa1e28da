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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "marsim/core/parallel.hpp"
#include "marsim/core/scene.hpp"
#include "marsim/core/trajectory.hpp"
#include "support/oracles.hpp"

namespace marsim {
namespace {

std::shared_ptr<const MeshBvh> bvh(TriangleMesh m) { return std::make_shared<const MeshBvh>(std::move(m)); }

std::shared_ptr<const Material> material(int class_id = 1, double albedo = 0.5) {
  auto m = std::make_shared<Material>();
  m->class_id = class_id;
  m->albedo = albedo;
  return m;
}

Scene unit_sphere_scene() {
  return Scene({Instance{1, bvh(make_sphere(1.0, 32, 64)), material(), Pose{}}});
}

TEST(Raycast, SphereFromBelowHitsAtFour) {
  const auto hit = unit_sphere_scene().raycast(Vec3(0, 0, -5), Vec3(0, 0, 1));
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->instance_id, 1);
  // the pole is a mesh vertex, so the tessellated sphere is exact here
  EXPECT_NEAR(hit->range, 4.0, 1e-12);
  EXPECT_NEAR(hit->normal.z(), -1.0, 1e-9);
}

TEST(Raycast, SphereBehindRayMisses) {
  EXPECT_FALSE(unit_sphere_scene().raycast(Vec3(0, 0, -5), Vec3(0, 0, -1)));
}

TEST(Raycast, SingleTriangleMatchesLinearSolve) {
  TriangleMesh tri({Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)}, {Triangle{0, 1, 2}});
  const Scene scene({Instance{7, bvh(tri), material(), Pose{}}});
  const Vec3 o(0.2, 0.2, 0), d(0, 0, 1);
  const auto hit = scene.raycast(o, d);
  ASSERT_TRUE(hit);
  const auto oracle = testing::solve_ray_triangle(o, d, Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1));
  ASSERT_TRUE(oracle);
  EXPECT_NEAR(*oracle, 1.0, 1e-15);
  EXPECT_NEAR(hit->range, *oracle, 1e-12);
}

TEST(Raycast, NonUnitDirectionIsContractViolation) {
  EXPECT_THROW(unit_sphere_scene().raycast(Vec3(0, 0, -5), Vec3(0, 0, 2)), ContractViolation);
}

TEST(Raycast, IgnoreListSkipsInstances) {
  const Scene scene({Instance{1, bvh(make_box(Vec3(1, 1, 1))), material(), Pose(Vec3(0, 0, 3), Quat::Identity())},
                     Instance{2, bvh(make_box(Vec3(1, 1, 1))), material(), Pose(Vec3(0, 0, 6), Quat::Identity())}});
  const int skip[] = {1};
  const auto hit = scene.raycast(Vec3::Zero(), Vec3::UnitZ(), RayOptions{kInf, skip});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->instance_id, 2);
  EXPECT_NEAR(hit->range, 5.5, 1e-12);
}

TEST(Raycast, NearestHitAgreesWithBruteForceScan) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Instance> inst;
  for (int i = 0; i < 6; ++i) {
    const Quat q = quat_from_rpy(u(rng) * kPi, u(rng) * kPi, u(rng) * kPi);
    const Vec3 p(3 * u(rng), 3 * u(rng), 4 + 2 * u(rng));
    auto mesh = i % 2 ? make_sphere(0.5 + 0.3 * std::abs(u(rng)), 6, 10) : make_box(Vec3(1.0, 0.6, 0.8));
    inst.push_back(Instance{i + 1, bvh(std::move(mesh)), material(i), Pose(p, q)});
  }
  const Scene scene(std::move(inst));
  int hits = 0;
  for (int k = 0; k < 2000; ++k) {
    const Vec3 d = Vec3(0.6 * u(rng), 0.6 * u(rng), 1.0).normalized();
    const auto hit = scene.raycast(Vec3::Zero(), d);
    const auto ref = testing::brute_force_raycast(scene, Vec3::Zero(), d);
    if (!hit) {
      EXPECT_EQ(ref.instance_id, 0) << "ray " << k;
      continue;
    }
    ++hits;
    EXPECT_NEAR(hit->range, ref.range, 1e-9) << "ray " << k;
    EXPECT_LE(hit->range, ref.range + 1e-9);
  }
  EXPECT_GT(hits, 200);
}

TEST(Occlusion, WallBlocksSegment) {
  const Scene scene({Instance{1, bvh(make_box(Vec3(0.1, 4, 4))), material(), Pose{}}});
  EXPECT_TRUE(scene.occluded(Vec3(-2, 0, 0), Vec3(2, 0, 0)));
  EXPECT_FALSE(scene.occluded(Vec3(-2, 0, 3), Vec3(2, 0, 3)));
  EXPECT_FALSE(scene.occluded(Vec3(-2, 0, 0), Vec3(-1, 0, 0)));
}

TEST(Scene, RejectsDuplicateAndNonPositiveIds) {
  auto m = bvh(make_box(Vec3(1, 1, 1)));
  EXPECT_THROW(Scene({Instance{0, m, material(), Pose{}}}), ConfigError);
  EXPECT_THROW(Scene({Instance{1, m, material(), Pose{}}, Instance{1, m, material(), Pose{}}}), ConfigError);
}

TEST(Mesh, RejectsDegenerateAndOutOfRange) {
  EXPECT_THROW(TriangleMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}, {Triangle{0, 1, 2}}), ConfigError);
  EXPECT_THROW(TriangleMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {Triangle{0, 1, 3}}), ConfigError);
}

TEST(Mesh, ParsesObjWithNormalsAndQuads) {
  std::istringstream obj(R"(# quad
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vn 0 0 1
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1/1 2/2/1 3/3/1 4/4/1
)");
  const TriangleMesh m = parse_obj(obj);
  EXPECT_EQ(m.triangles().size(), 2u);
  ASSERT_TRUE(m.has_uvs());
  for (const auto& n : m.normals()) EXPECT_NEAR(n.z(), 1.0, 1e-15);
}

TEST(Mesh, ObjErrorsCarryLineNumbers) {
  std::istringstream obj("v 0 0 0\nv 1 0 0\nf 1 2 9\n");
  try {
    parse_obj(obj, "bad.obj");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.obj:3"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------------------

TEST(RenderBuffers, EmptySceneIsBackground) {
  const auto intr = CameraIntrinsics::centered(8, 6, 5.0);
  const auto b = render_buffers(Scene{}, Pose{}, intr, LightingEnvironment{});
  for (std::size_t i = 0; i < b.depth.size(); ++i) {
    EXPECT_EQ(b.instance_id[i], 0);
    EXPECT_EQ(b.depth[i], kInf);
  }
}

TEST(RenderBuffers, FrontoParallelPlaneDepthAndRange) {
  const double d = 3.0;
  // plane normal +Z faces away from the camera; raycasts are two-sided
  const Scene scene({Instance{1, bvh(make_plane(100, 100)), material(), Pose(Vec3(0, 0, d), Quat::Identity())}});
  const auto intr = CameraIntrinsics::centered(16, 12, 10.0);
  const auto b = render_buffers(scene, Pose{}, intr, LightingEnvironment{});
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const double du = u - intr.principal_point.x(), dv = v - intr.principal_point.y();
      const double cos_theta = intr.focal_length / std::sqrt(du * du + dv * dv + intr.focal_length * intr.focal_length);
      EXPECT_NEAR(b.depth(u, v), d, 1e-12);
      EXPECT_NEAR(b.range(u, v), d / cos_theta, 1e-12);
      EXPECT_EQ(b.instance_id(u, v), 1);
    }
  }
}

TEST(RenderBuffers, SphereOccludesWall) {
  const Scene scene({Instance{1, bvh(make_box(Vec3(20, 20, 0.1))), material(1), Pose(Vec3(0, 0, 10), Quat::Identity())},
                     Instance{2, bvh(make_sphere(1.0)), material(2), Pose(Vec3(0, 0, 5), Quat::Identity())}});
  const auto intr = CameraIntrinsics::centered(21, 21, 20.0);
  const auto b = render_buffers(scene, Pose{}, intr, LightingEnvironment{});
  int sphere_px = 0;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 dir = pixel_ray(Pose{}, intr, u, v);
      const auto ref = testing::brute_force_raycast(scene, Vec3::Zero(), dir);
      EXPECT_EQ(b.instance_id(u, v), ref.instance_id);
      sphere_px += b.instance_id(u, v) == 2;
    }
  }
  EXPECT_EQ(b.instance_id(10, 10), 2);
  EXPECT_GT(sphere_px, 10);
}

TEST(RenderBuffers, LambertLuminanceWithShadow) {
  LightingEnvironment light;
  light.sun_direction = Vec3(0, 0, -1);  // sun behind the camera
  light.ambient = 0.25;
  const Scene lit({Instance{1, bvh(make_plane(50, 50)), material(1, 0.8), Pose(Vec3(0, 0, 4), Quat::Identity())}});
  const auto intr = CameraIntrinsics::centered(5, 5, 4.0);
  const auto b = render_buffers(lit, Pose{}, intr, light);
  // interpolated normal is +Z, facing away from the sun
  EXPECT_DOUBLE_EQ(b.luminance(2, 2), 0.8 * 0.25);

  light.sun_direction = Vec3(0, 0, 1);
  const auto b2 = render_buffers(lit, Pose{}, intr, light);
  EXPECT_DOUBLE_EQ(b2.luminance(2, 2), 0.8 * 1.25);

  // a blocker above the plane casts a shadow over the centre
  const Scene shadowed({lit.instances()[0], Instance{2, bvh(make_box(Vec3(20, 20, 0.1))), material(2),
                                                      Pose(Vec3(0, 0, 8), Quat::Identity())}});
  const auto b3 = render_buffers(shadowed, Pose{}, intr, light);
  EXPECT_DOUBLE_EQ(b3.luminance(2, 2), 0.8 * 0.25);
}

TEST(RenderBuffers, ParallelScheduleIsBitIdentical) {
  std::vector<Instance> inst;
  for (int i = 0; i < 5; ++i)
    inst.push_back(Instance{i + 1, bvh(make_sphere(0.7)), material(i), Pose(Vec3(i - 2.0, 0.3 * i, 6), Quat::Identity())});
  const Scene scene(std::move(inst));
  const auto intr = CameraIntrinsics::centered(40, 30, 30.0);
  set_max_threads(1);
  const auto a = render_buffers(scene, Pose{}, intr, LightingEnvironment{});
  set_max_threads(4);
  const auto b = render_buffers(scene, Pose{}, intr, LightingEnvironment{});
  set_max_threads(0);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.luminance, b.luminance);
  EXPECT_EQ(a.instance_id, b.instance_id);
}

// ---------------------------------------------------------------------------

TEST(Trajectory, SingleWaypointIsStatic) {
  const Pose p(Vec3(1, 2, 3), quat_from_rpy(0.1, 0.2, 0.3));
  const auto traj = KinematicTrajectory::fixed(p);
  for (double t : {-1.0, 0.0, 5.0}) {
    const auto s = traj.sample(t);
    EXPECT_EQ(s.pose.position, p.position);
    EXPECT_EQ(s.linear_velocity, Vec3::Zero());
    EXPECT_EQ(s.angular_velocity, Vec3::Zero());
  }
}

TEST(Trajectory, LinearMidpoint) {
  KinematicTrajectory traj({{0.0, Pose{}}, {2.0, Pose(Vec3(4, 0, 0), Quat::Identity())}}, Interpolation::Linear);
  const auto s = traj.sample(1.0);
  EXPECT_NEAR(s.pose.position.x(), 2.0, 1e-12);
  EXPECT_NEAR((s.linear_velocity - Vec3(2, 0, 0)).norm(), 0.0, 1e-12);
  // outside the span: end poses with zero velocity
  EXPECT_EQ(traj.sample(-1).linear_velocity, Vec3::Zero());
  EXPECT_EQ(traj.sample(3).pose.position, Vec3(4, 0, 0));
  EXPECT_EQ(traj.sample(3).linear_velocity, Vec3::Zero());
}

TEST(Trajectory, YawSlerpRate) {
  KinematicTrajectory traj({{0.0, Pose{}}, {1.0, Pose(Vec3::Zero(), quat_from_rpy(0, 0, kPi / 2))}},
                           Interpolation::Linear);
  const auto s = traj.sample(0.5);
  const Eigen::AngleAxisd aa(s.pose.orientation);
  EXPECT_NEAR(aa.angle(), kPi / 4, 1e-12);
  EXPECT_NEAR(aa.axis().z(), 1.0, 1e-12);
  EXPECT_NEAR(s.angular_velocity.norm(), kPi / 2, 1e-12);
  // numerical derivative of the interpolated orientation
  const double h = 1e-6;
  const Quat dq = traj.sample(0.5 + h).pose.orientation * traj.sample(0.5 - h).pose.orientation.conjugate();
  const Eigen::AngleAxisd step(dq);
  EXPECT_NEAR((step.axis() * step.angle() / (2 * h) - s.angular_velocity).norm(), 0.0, 1e-6);
}

TEST(Trajectory, HoldKeepsLastWaypoint) {
  KinematicTrajectory traj({{0.0, Pose{}}, {1.0, Pose(Vec3(1, 0, 0), Quat::Identity())}}, Interpolation::Hold);
  EXPECT_EQ(traj.sample(0.99).pose.position, Vec3::Zero());
  EXPECT_EQ(traj.sample(1.0).pose.position, Vec3(1, 0, 0));
  EXPECT_EQ(traj.sample(0.5).linear_velocity, Vec3::Zero());
}

TEST(Trajectory, ContinuousAndMatchesClosedForm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<Waypoint> wps;
  for (int i = 0; i < 6; ++i) wps.push_back({i * 0.7, Pose(Vec3(u(rng), u(rng), u(rng)), quat_from_rpy(u(rng), u(rng), u(rng)))});
  const KinematicTrajectory traj(wps, Interpolation::Linear);
  for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
    for (int k = 0; k <= 20; ++k) {
      const double a = k / 20.0;
      const double t = wps[i].t + a * (wps[i + 1].t - wps[i].t);
      const Vec3 expected = (1 - a) * wps[i].pose.position + a * wps[i + 1].pose.position;
      EXPECT_LT((traj.sample(t).pose.position - expected).norm(), 1e-9);
    }
    const double tw = wps[i + 1].t;
    EXPECT_LT((traj.sample(tw - 1e-12).pose.position - traj.sample(tw).pose.position).norm(), 1e-9);
    EXPECT_LT(traj.sample(tw - 1e-12).pose.orientation.angularDistance(traj.sample(tw).pose.orientation), 1e-9);
  }
}

TEST(Trajectory, RejectsNonIncreasingTimes) {
  EXPECT_THROW(KinematicTrajectory({{1.0, Pose{}}, {1.0, Pose{}}}, Interpolation::Linear), ConfigError);
  EXPECT_THROW(KinematicTrajectory({}, Interpolation::Linear), ConfigError);
}

}  // namespace
}  // namespace marsim
