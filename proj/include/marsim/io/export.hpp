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

// File formats for every sensor and label product. All binary data is
// little-endian. Raw grids start with two uint32 values (W, H) followed by
// row-major float32 samples.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "marsim/annotation.hpp"
#include "marsim/event_camera.hpp"
#include "marsim/io/png.hpp"
#include "marsim/optical_flow.hpp"
#include "marsim/sonar.hpp"
#include "marsim/tether.hpp"
#include "marsim/thermal_camera.hpp"

namespace marsim::io {

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

namespace detail {

inline std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline std::string format(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

}  // namespace detail

// --- raw grids ---------------------------------------------------------------

/// Scalar grid as float32 with a (W, H) header.
inline void write_raw_grid(const std::string& path, const Grid<double>& g) {
  auto out = detail::open_out(path, true);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.width()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.height()));
  for (double v : g.data()) detail::put<float>(out, static_cast<float>(v));
}

struct RawGrid {
  int width = 0, height = 0;
  int components = 1;
  std::vector<float> values;
};

inline RawGrid read_raw_grid(const std::string& path, int components = 1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  RawGrid g{static_cast<int>(w), static_cast<int>(h), components,
            std::vector<float>(static_cast<std::size_t>(w) * h * components)};
  in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(g.values.size() * sizeof(float)));
  if (!in) throw IoError("truncated raw grid '" + path + "'");
  return g;
}

// --- image planes ------------------------------------------------------------

/// Id plane as 16-bit grayscale; ids above 65535 are saturated.
inline void write_id_png(const std::string& path, const Grid<int>& ids) {
  std::vector<std::uint16_t> s(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) s[i] = static_cast<std::uint16_t>(std::clamp(ids[i], 0, 65535));
  write_png_16(path, ids.width(), ids.height(), 1, s);
}

inline std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

/// Luminance mapped linearly from [0, display_max] to 0..255.
inline void write_luminance_png(const std::string& path, const Grid<double>& lum, double display_max = 1.0) {
  std::vector<std::uint8_t> px(lum.size());
  for (std::size_t i = 0; i < lum.size(); ++i) px[i] = to_byte(lum[i] / display_max);
  write_png_gray8(path, lum.width(), lum.height(), px);
}

/// Beam = column, bin = row with bin 0 on the bottom row.
inline void write_sonar_png(const std::string& path, const sonar::SonarImage& img) {
  const auto& g = img.intensities;
  std::vector<std::uint8_t> px(g.size());
  for (int bin = 0; bin < g.height(); ++bin)
    for (int beam = 0; beam < g.width(); ++beam)
      px[static_cast<std::size_t>(g.height() - 1 - bin) * g.width() + beam] = to_byte(g(beam, bin));
  write_png_gray8(path, g.width(), g.height(), px);
}

/// Fan display: nearest-neighbour polar to Cartesian, apex at the bottom centre.
inline void write_sonar_fan_png(const std::string& path, const sonar::SonarImage& img, const sonar::SonarConfig& cfg,
                                int height_px = 256) {
  const double half = 0.5 * cfg.horizontal_fov;
  const double r_max = cfg.range_max;
  const double width_m = half < 0.5 * kPi ? 2.0 * r_max * std::sin(half) : 2.0 * r_max;
  const double scale = height_px / r_max;
  const int width_px = std::max(1, static_cast<int>(std::ceil(width_m * scale)));
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width_px) * height_px, 0);
  for (int y = 0; y < height_px; ++y) {
    for (int x = 0; x < width_px; ++x) {
      const double fx = (x + 0.5 - 0.5 * width_px) / scale;
      const double fz = (height_px - y - 0.5) / scale;
      const double r = std::hypot(fx, fz);
      const double az = std::atan2(fx, fz);
      if (az < -half || az >= half) continue;
      const auto bin = sonar::bin_index(r, cfg);
      if (!bin) continue;
      const int beam = std::clamp(static_cast<int>(std::floor((az + half) / cfg.horizontal_fov * cfg.num_beams)), 0,
                                  cfg.num_beams - 1);
      px[static_cast<std::size_t>(y) * width_px + x] = to_byte(img.intensities(beam, *bin));
    }
  }
  write_png_gray8(path, width_px, height_px, px);
}

inline void write_rgb_png(const std::string& path, const Grid<thermal::Rgb8>& rgb) {
  std::vector<std::uint8_t> px;
  px.reserve(rgb.size() * 3);
  for (const auto& c : rgb.data()) px.insert(px.end(), {c.r, c.g, c.b});
  write_png_rgb8(path, rgb.width(), rgb.height(), px);
}

// --- events ------------------------------------------------------------------

/// One `t x y p` line per event, t with 9 decimals.
inline void write_events_text(const std::string& path, const std::vector<ebc::Event>& events) {
  auto out = detail::open_out(path, false);
  char buf[96];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.9f %d %d %d\n", e.t, e.x, e.y, e.polarity);
    out << buf;
  }
}

/// Packed records: float64 t, uint16 x, uint16 y, int8 p (13 bytes each).
inline void write_events_binary(const std::string& path, const std::vector<ebc::Event>& events) {
  auto out = detail::open_out(path, true);
  for (const auto& e : events) {
    detail::put<double>(out, e.t);
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(e.x));
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(e.y));
    detail::put<std::int8_t>(out, static_cast<std::int8_t>(e.polarity));
  }
}

inline std::vector<ebc::Event> read_events_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<ebc::Event> events;
  std::array<char, 13> rec{};
  while (in.read(rec.data(), rec.size())) {
    ebc::Event e;
    std::uint16_t x, y;
    std::int8_t p;
    std::memcpy(&e.t, rec.data(), 8);
    std::memcpy(&x, rec.data() + 8, 2);
    std::memcpy(&y, rec.data() + 10, 2);
    std::memcpy(&p, rec.data() + 12, 1);
    e.x = x;
    e.y = y;
    e.polarity = p;
    events.push_back(e);
  }
  return events;
}

// --- optical flow ------------------------------------------------------------

inline void write_flow_raw(const std::string& path, const flow::FlowField& f) {
  auto out = detail::open_out(path, true);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.flow.width()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.flow.height()));
  for (const auto& uv : f.flow.data()) {
    detail::put<float>(out, static_cast<float>(uv.x()));
    detail::put<float>(out, static_cast<float>(uv.y()));
  }
}

/// Middlebury colour wheel (Baker et al.); saturation scaled by the largest
/// valid flow magnitude in the frame, invalid pixels black.
inline void write_flow_png(const std::string& path, const flow::FlowField& f) {
  static const std::vector<std::array<double, 3>> wheel = [] {
    std::vector<std::array<double, 3>> w;
    const int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    for (int i = 0; i < RY; ++i) w.push_back({255, 255.0 * i / RY, 0});
    for (int i = 0; i < YG; ++i) w.push_back({255 - 255.0 * i / YG, 255, 0});
    for (int i = 0; i < GC; ++i) w.push_back({0, 255, 255.0 * i / GC});
    for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255.0 * i / CB, 255});
    for (int i = 0; i < BM; ++i) w.push_back({255.0 * i / BM, 0, 255});
    for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255.0 * i / MR});
    return w;
  }();
  double max_mag = 0.0;
  for (std::size_t i = 0; i < f.flow.size(); ++i)
    if (f.valid[i]) max_mag = std::max(max_mag, f.flow[i].norm());
  const int ncols = static_cast<int>(wheel.size());
  std::vector<std::uint8_t> px(f.flow.size() * 3, 0);
  for (std::size_t i = 0; i < f.flow.size(); ++i) {
    if (!f.valid[i]) continue;
    const double u = max_mag > 0 ? f.flow[i].x() / max_mag : 0.0;
    const double v = max_mag > 0 ? f.flow[i].y() / max_mag : 0.0;
    const double rad = std::min(1.0, std::hypot(u, v));
    const double a = std::atan2(-v, -u) / kPi;
    const double fk = (a + 1.0) / 2.0 * (ncols - 1);
    const int k0 = static_cast<int>(std::floor(fk));
    const int k1 = (k0 + 1) % ncols;
    const double t = fk - k0;
    for (int c = 0; c < 3; ++c) {
      const double col = ((1 - t) * wheel[k0][c] + t * wheel[k1][c]) / 255.0;
      px[3 * i + c] = to_byte(1.0 - rad * (1.0 - col));
    }
  }
  write_png_rgb8(path, f.flow.width(), f.flow.height(), px);
}

// --- annotation --------------------------------------------------------------

/// `class cx cy w h` per line, 6 decimals.
inline void write_yolo_labels(const std::string& path, const std::vector<annotation::YoloBox>& boxes) {
  auto out = detail::open_out(path, false);
  char buf[128];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx, b.cy, b.w, b.h);
    out << buf;
  }
}

inline void write_class_names(const std::string& path, const std::vector<std::string>& names_by_id) {
  auto out = detail::open_out(path, false);
  for (const auto& n : names_by_id) out << n << '\n';
}

/// Semantic and instance planes as 16-bit gray; panoptic as 16-bit RGB
/// (R = class, G = instance, B = 0).
inline void write_masks(const std::string& stem, const annotation::SegmentationMasks& m) {
  write_id_png(stem + ".semantic.png", m.semantic);
  write_id_png(stem + ".instance.png", m.instance);
  std::vector<std::uint16_t> s;
  s.reserve(m.panoptic.size() * 3);
  for (const auto& [c, i] : m.panoptic.data())
    s.insert(s.end(), {static_cast<std::uint16_t>(std::clamp(c, 0, 65535)),
                       static_cast<std::uint16_t>(std::clamp(i, 0, 65535)), 0});
  write_png_16(stem + ".panoptic.png", m.panoptic.width(), m.panoptic.height(), 3, s);
}

/// `x y z class instance` per line, camera frame.
inline void write_point_cloud(const std::string& path, const annotation::LabeledPointCloud& cloud) {
  auto out = detail::open_out(path, false);
  char buf[160];
  for (const auto& p : cloud) {
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %d %d\n", p.position.x(), p.position.y(), p.position.z(),
                  p.class_id, p.instance_id);
    out << buf;
  }
}

// --- tether ------------------------------------------------------------------

/// Rows of (sphere_index, x, y, z, vx, vy, vz).
inline void write_tether_csv(const std::string& path, const tether::TetherState& s) {
  auto out = detail::open_out(path, false);
  out << "sphere_index,x,y,z,vx,vy,vz\n";
  char buf[256];
  for (std::size_t i = 0; i < s.positions.size(); ++i) {
    const auto& p = s.positions[i];
    const auto& v = s.velocities[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i, p.x(), p.y(), p.z(), v.x(), v.y(), v.z());
    out << buf;
  }
}

}  // namespace marsim::io
