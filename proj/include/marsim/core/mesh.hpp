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

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "marsim/core/types.hpp"

namespace marsim {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle list with per-vertex unit normals and optional UVs.
class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Validates indices and triangle areas; normals are normalised. Empty
  /// `normals` means area-weighted vertex normals are computed.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, std::vector<Vec3> normals = {},
               std::vector<Vec2> uvs = {})
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)), normals_(std::move(normals)),
        uvs_(std::move(uvs)) {
    const auto n = vertices_.size();
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (auto idx : triangles_[t]) {
        if (idx >= n) throw ConfigError("TriangleMesh: triangle " + std::to_string(t) + " index out of range");
      }
      if (area2(t) <= 1e-12) throw ConfigError("TriangleMesh: triangle " + std::to_string(t) + " has zero area");
    }
    if (normals_.empty()) compute_vertex_normals();
    if (normals_.size() != n) throw ConfigError("TriangleMesh: normal count must match vertex count");
    for (auto& nv : normals_) {
      const double len = nv.norm();
      if (!(len > 0.0) || !std::isfinite(len)) throw ConfigError("TriangleMesh: degenerate vertex normal");
      nv /= len;
    }
    if (!uvs_.empty() && uvs_.size() != n) throw ConfigError("TriangleMesh: uv count must match vertex count");
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<Vec2>& uvs() const { return uvs_; }
  bool has_uvs() const { return !uvs_.empty(); }

  /// Twice the area of triangle t.
  double area2(std::size_t t) const {
    const auto& tri = triangles_[t];
    return (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]).norm();
  }

 private:
  void compute_vertex_normals() {
    normals_.assign(vertices_.size(), Vec3::Zero());
    for (const auto& tri : triangles_) {
      const Vec3 fn = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
      for (auto idx : tri) normals_[idx] += fn;
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> normals_;
  std::vector<Vec2> uvs_;
};

/// Rows × cols grid of °C, sampled bilinearly with uv in [0,1]².
struct TemperatureMap {
  int rows = 1;
  int cols = 1;
  std::vector<double> values{0.0};

  void validate() const {
    if (rows < 1 || cols < 1) throw ConfigError("TemperatureMap: grid must be at least 1x1");
    if (values.size() != static_cast<std::size_t>(rows) * cols)
      throw ConfigError("TemperatureMap: value count does not match grid size");
    for (double v : values)
      if (!std::isfinite(v)) throw ConfigError("TemperatureMap: non-finite entry");
  }

  double sample(const Vec2& uv) const {
    const double x = std::clamp(uv.x(), 0.0, 1.0) * (cols - 1);
    const double y = std::clamp(uv.y(), 0.0, 1.0) * (rows - 1);
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, cols - 1), y1 = std::min(y0 + 1, rows - 1);
    const double fx = x - x0, fy = y - y0;
    auto at = [&](int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; };
    const double top = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
    const double bottom = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
    return top * (1 - fy) + bottom * fy;
  }
};

struct AirTemperature {};
struct ConstantTemperature {
  double celsius = 20.0;
};
using ThermalMode = std::variant<AirTemperature, ConstantTemperature, TemperatureMap>;

struct Material {
  double albedo = 0.5;
  double roughness = 0.5;
  double acoustic_reflectivity = 0.5;
  ThermalMode thermal_mode = AirTemperature{};
  int class_id = 0;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(albedo)) throw ConfigError("Material: albedo must be in [0,1]");
    if (!unit(roughness)) throw ConfigError("Material: roughness must be in [0,1]");
    if (!unit(acoustic_reflectivity)) throw ConfigError("Material: acoustic_reflectivity must be in [0,1]");
    if (class_id < 0) throw ConfigError("Material: class_id must be non-negative");
    if (const auto* map = std::get_if<TemperatureMap>(&thermal_mode)) map->validate();
  }
};

// ---------------------------------------------------------------------------
// Primitive builders

/// Axis-aligned box centred at the origin with outward flat-shaded normals.
inline TriangleMesh make_box(const Vec3& size) {
  const Vec3 h = size * 0.5;
  std::vector<Vec3> v, n;
  std::vector<Vec2> uv;
  std::vector<Triangle> t;
  auto face = [&](const Vec3& normal, const Vec3& u, const Vec3& w) {
    // u, w span the face; u × w = normal
    const Vec3 c = normal.cwiseProduct(h);
    const Vec3 du = u.cwiseProduct(h), dw = w.cwiseProduct(h);
    const auto base = static_cast<std::uint32_t>(v.size());
    v.push_back(c - du - dw);
    v.push_back(c + du - dw);
    v.push_back(c + du + dw);
    v.push_back(c - du + dw);
    for (int i = 0; i < 4; ++i) n.push_back(normal);
    uv.insert(uv.end(), {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)});
    t.push_back({base, base + 1, base + 2});
    t.push_back({base, base + 2, base + 3});
  };
  face(Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ());
  face(-Vec3::UnitX(), Vec3::UnitZ(), Vec3::UnitY());
  face(Vec3::UnitY(), Vec3::UnitZ(), Vec3::UnitX());
  face(-Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitZ());
  face(Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY());
  face(-Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX());
  return TriangleMesh(std::move(v), std::move(t), std::move(n), std::move(uv));
}

/// Rectangle in the local XY plane, normal +Z.
inline TriangleMesh make_plane(double size_x, double size_y) {
  const double hx = size_x * 0.5, hy = size_y * 0.5;
  std::vector<Vec3> v{Vec3(-hx, -hy, 0), Vec3(hx, -hy, 0), Vec3(hx, hy, 0), Vec3(-hx, hy, 0)};
  std::vector<Vec3> n(4, Vec3::UnitZ());
  std::vector<Vec2> uv{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  return TriangleMesh(std::move(v), {{0, 1, 2}, {0, 2, 3}}, std::move(n), std::move(uv));
}

/// UV sphere with poles on ±Z. Each pole-cap triangle lists its pole vertex first.
inline TriangleMesh make_sphere(double radius, int stacks = 16, int slices = 32) {
  require(radius > 0 && stacks >= 2 && slices >= 3, "make_sphere: invalid tessellation");
  std::vector<Vec3> v, n;
  std::vector<Vec2> uv;
  std::vector<Triangle> t;
  v.push_back(Vec3(0, 0, -radius));
  n.push_back(-Vec3::UnitZ());
  uv.push_back(Vec2(0.5, 0.0));
  for (int i = 1; i < stacks; ++i) {
    const double theta = kPi * i / stacks;  // from the south pole
    for (int j = 0; j < slices; ++j) {
      const double phi = 2.0 * kPi * j / slices;
      const Vec3 dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), -std::cos(theta));
      v.push_back(radius * dir);
      n.push_back(dir);
      uv.push_back(Vec2(static_cast<double>(j) / slices, static_cast<double>(i) / stacks));
    }
  }
  v.push_back(Vec3(0, 0, radius));
  n.push_back(Vec3::UnitZ());
  uv.push_back(Vec2(0.5, 1.0));
  const auto south = 0u;
  const auto north = static_cast<std::uint32_t>(v.size() - 1);
  auto ring = [&](int i, int j) { return static_cast<std::uint32_t>(1 + (i - 1) * slices + (j % slices)); };
  for (int j = 0; j < slices; ++j) t.push_back({south, ring(1, j + 1), ring(1, j)});
  for (int i = 1; i < stacks - 1; ++i) {
    for (int j = 0; j < slices; ++j) {
      t.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
      t.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
    }
  }
  for (int j = 0; j < slices; ++j) t.push_back({north, ring(stacks - 1, j), ring(stacks - 1, j + 1)});
  return TriangleMesh(std::move(v), std::move(t), std::move(n), std::move(uv));
}

// ---------------------------------------------------------------------------
// OBJ subset: v, vn, vt, f. Polygons are fan-triangulated; other records ignored.

inline TriangleMesh parse_obj(std::istream& in, const std::string& source = "<obj>") {
  std::vector<Vec3> pos, nrm;
  std::vector<Vec2> tex;
  struct Corner {
    int v, t, n;
    auto operator<=>(const Corner&) const = default;
  };
  std::map<Corner, std::uint32_t> remap;
  std::vector<Vec3> out_v, out_n;
  std::vector<Vec2> out_uv;
  std::vector<Triangle> tris;
  bool any_normals = false, any_uvs = false, missing_normals = false, missing_uvs = false;

  auto fail = [&](int line, const std::string& msg) {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
  };
  auto resolve = [&](int line, long idx, std::size_t count) -> int {
    if (idx > 0 && static_cast<std::size_t>(idx) <= count) return static_cast<int>(idx - 1);
    if (idx < 0 && static_cast<std::size_t>(-idx) <= count) return static_cast<int>(count + idx);
    fail(line, "face index out of range");
    return -1;
  };

  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::istringstream ls(text);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail(line_no, "malformed vertex");
      pos.emplace_back(x, y, z);
    } else if (tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail(line_no, "malformed normal");
      nrm.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, w = 0;
      if (!(ls >> u)) fail(line_no, "malformed texture coordinate");
      ls >> w;
      tex.emplace_back(u, w);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        Corner c{-1, -1, -1};
        std::array<std::string, 3> parts;
        std::size_t k = 0;
        for (char ch : tok) {
          if (ch == '/') {
            if (++k > 2) fail(line_no, "malformed face corner");
          } else {
            parts[k] += ch;
          }
        }
        try {
          c.v = resolve(line_no, std::stol(parts[0]), pos.size());
          if (!parts[1].empty()) c.t = resolve(line_no, std::stol(parts[1]), tex.size());
          if (!parts[2].empty()) c.n = resolve(line_no, std::stol(parts[2]), nrm.size());
        } catch (const std::invalid_argument&) {
          fail(line_no, "malformed face index");
        }
        (c.n >= 0 ? any_normals : missing_normals) = true;
        (c.t >= 0 ? any_uvs : missing_uvs) = true;
        auto [it, inserted] = remap.try_emplace(c, static_cast<std::uint32_t>(out_v.size()));
        if (inserted) {
          out_v.push_back(pos[c.v]);
          out_n.push_back(c.n >= 0 ? nrm[c.n] : Vec3::Zero());
          out_uv.push_back(c.t >= 0 ? tex[c.t] : Vec2::Zero());
        }
        poly.push_back(it->second);
      }
      if (poly.size() < 3) fail(line_no, "face needs at least 3 corners");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) tris.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  if (tris.empty()) throw ConfigError(source + ": no faces");
  if (!any_normals || missing_normals) out_n.clear();
  if (!any_uvs || missing_uvs) out_uv.clear();
  return TriangleMesh(std::move(out_v), std::move(tris), std::move(out_n), std::move(out_uv));
}

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mesh file '" + path + "'");
  return parse_obj(in, path);
}

}  // namespace marsim
