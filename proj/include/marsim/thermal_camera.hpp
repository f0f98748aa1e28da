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

// Steady-state thermal imaging in screen space.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "marsim/core/noise.hpp"
#include "marsim/core/scene.hpp"

namespace marsim::thermal {

inline constexpr double kKelvinOffset = 273.15;

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};

/// Monotone colour ramp black → red → yellow → white, indexed 0..255.
struct Colormap {
  static constexpr int kLevels = 256;

  static int index(double fraction) {
    const double f = std::clamp(fraction, 0.0, 1.0);
    return std::min(kLevels - 1, static_cast<int>(std::floor(f * kLevels)));
  }

  static Rgb8 color(int idx) {
    const double f = static_cast<double>(std::clamp(idx, 0, kLevels - 1)) / (kLevels - 1);
    auto ch = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    // three equal legs: ramp red, then green, then blue
    return Rgb8{ch(3.0 * f), ch(3.0 * f - 1.0), ch(3.0 * f - 2.0)};
  }
};

struct ThermalConfig {
  CameraIntrinsics intrinsics = CameraIntrinsics::centered(64, 48, 60.0);
  double temp_min = -10.0;
  double temp_max = 60.0;
  double noise_stddev = 0.0;
  std::uint64_t noise_seed = 0;

  void validate() const {
    intrinsics.validate();
    require(temp_min < temp_max, "ThermalConfig: temp_min must be < temp_max");
    require(noise_stddev >= 0.0, "ThermalConfig: noise_stddev must be >= 0");
  }
};

struct ThermalEnvironment {
  double air_temperature = 20.0;    // °C
  double water_temperature = 15.0;  // °C
  double solar_irradiance = 0.0;    // W/m²
  Vec3 sun_direction = Vec3::UnitZ();
  double solar_absorption_gain = 15.0;        // °C at 1000 W/m², full absorption
  double water_solar_absorption_gain = 2.0;   // °C at 1000 W/m²

  void validate() const {
    require(solar_irradiance >= 0.0, "ThermalEnvironment: solar_irradiance must be >= 0");
    require(is_unit(sun_direction), "ThermalEnvironment: sun_direction must have unit norm");
  }
};

inline double base_temperature(const Material& m, const Vec2& uv, const ThermalEnvironment& env) {
  if (std::holds_alternative<AirTemperature>(m.thermal_mode)) return env.air_temperature;
  if (const auto* c = std::get_if<ConstantTemperature>(&m.thermal_mode)) return c->celsius;
  return std::get<TemperatureMap>(m.thermal_mode).sample(uv);
}

inline double surface_temperature(const Material& m, const Vec3& normal, bool sun_visible,
                                  const ThermalEnvironment& env, const Vec2& uv = Vec2::Zero()) {
  const double base = base_temperature(m, uv, env);
  if (!sun_visible) return base;
  const double cos_sun = std::max(0.0, normal.dot(env.sun_direction));
  return base + env.solar_absorption_gain * (1.0 - m.albedo) * (1.0 - 0.5 * m.roughness) *
                    (env.solar_irradiance / 1000.0) * cos_sun;
}

/// Clear-sky temperature, Swinbank form: T_sky = 0.0552 · T_air^1.5 in kelvin.
inline double sky_temperature(double air_celsius) {
  require(air_celsius > -kKelvinOffset, "sky_temperature: air temperature below absolute zero");
  const double t_air = air_celsius + kKelvinOffset;
  return 0.0552 * std::pow(t_air, 1.5) - kKelvinOffset;
}

/// Schlick-style reflected fraction of sky radiance at the sea surface.
inline double sky_reflection_weight(double view_incidence) {
  constexpr double w0 = 0.02;
  return w0 + (1.0 - w0) * std::pow(1.0 - std::cos(view_incidence), 5.0);
}

inline double ocean_surface_temperature(const ThermalEnvironment& env, double view_incidence) {
  require(view_incidence >= 0.0 && view_incidence <= 0.5 * kPi + 1e-12,
          "ocean_surface_temperature: incidence must be in [0, pi/2]");
  const double w = sky_reflection_weight(std::min(view_incidence, 0.5 * kPi));
  const double water = env.water_temperature + env.water_solar_absorption_gain * env.solar_irradiance / 1000.0;
  return (1.0 - w) * water + w * sky_temperature(env.air_temperature);
}

struct ThermalImage {
  Grid<double> celsius;
  Grid<Rgb8> display;
};

inline Rgb8 display_color(double celsius, const ThermalConfig& cfg) {
  return Colormap::color(Colormap::index((celsius - cfg.temp_min) / (cfg.temp_max - cfg.temp_min)));
}

/// Noise-free reading of one camera ray.
inline double ray_temperature(const Scene& scene, const Vec3& origin, const Vec3& dir,
                              const ThermalEnvironment& env) {
  const auto hit = scene.raycast(origin, dir);
  if (!hit) return sky_temperature(env.air_temperature);
  if (hit->ocean_surface) {
    const double c = std::clamp(std::abs(dir.dot(hit->normal)), 0.0, 1.0);
    return ocean_surface_temperature(env, std::acos(c));
  }
  const bool lit = env.solar_irradiance > 0.0 && hit->normal.dot(env.sun_direction) > 0.0 &&
                   sun_visible(scene, *hit, env.sun_direction);
  return surface_temperature(*hit->material, hit->normal, lit, env, hit->uv);
}

inline ThermalImage render_thermal(const Scene& scene, const Pose& camera_pose, const ThermalConfig& cfg,
                                   const ThermalEnvironment& env, std::uint64_t frame_index) {
  cfg.validate();
  env.validate();
  const auto& intr = cfg.intrinsics;
  ThermalImage img{Grid<double>(intr.width, intr.height), Grid<Rgb8>(intr.width, intr.height)};
  parallel_for(intr.height, [&](int v) {
    for (int u = 0; u < intr.width; ++u) {
      double t = ray_temperature(scene, camera_pose.position, pixel_ray(camera_pose, intr, u, v), env);
      if (cfg.noise_stddev > 0.0) {
        const auto pixel = static_cast<std::uint64_t>(v) * intr.width + u;
        t += cfg.noise_stddev * noise::gaussian({cfg.noise_seed, frame_index, pixel});
      }
      t = std::clamp(t, cfg.temp_min, cfg.temp_max);
      img.celsius(u, v) = t;
      img.display(u, v) = display_color(t, cfg);
    }
  });
  return img;
}

}  // namespace marsim::thermal
