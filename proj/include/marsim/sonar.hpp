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

// Forward-looking multibeam sonar.
//
// The sonar frame is the optical frame: boresight +Z, azimuth grows towards +X,
// elevation grows towards -Y. Beam 0 is the leftmost beam.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "marsim/core/noise.hpp"
#include "marsim/core/scene.hpp"

namespace marsim::sonar {

struct SonarConfig {
  int num_beams = 256;
  double horizontal_fov = 120.0 * kPi / 180.0;
  double vertical_fov = 20.0 * kPi / 180.0;
  int vertical_rays_per_beam = 16;
  double range_min = 0.5;
  double range_max = 50.0;
  int num_bins = 500;
  double gain = 1.0;
  double noise_stddev = 0.0;
  std::uint64_t noise_seed = 0;
  double perlin_scale = 0.1;
  std::optional<double> perlin_amplitude;  // defaults to noise_stddev when unset
  double beam_pattern_noise_amplitude = 0.0;
  double hold_factor = 0.0;
  double ghosting_factor = 0.0;

  double range_step() const { return (range_max - range_min) / num_bins; }
  double effective_perlin_amplitude() const { return perlin_amplitude.value_or(noise_stddev); }

  void validate() const {
    require(num_beams >= 1, "SonarConfig: num_beams must be >= 1");
    require(num_bins >= 1, "SonarConfig: num_bins must be >= 1");
    require(vertical_rays_per_beam >= 1, "SonarConfig: vertical_rays_per_beam must be >= 1");
    require(range_min >= 0.0 && range_min < range_max, "SonarConfig: require 0 <= range_min < range_max");
    require(horizontal_fov > 0.0 && horizontal_fov < 2.0 * kPi, "SonarConfig: horizontal_fov out of range");
    require(vertical_fov >= 0.0 && vertical_fov < kPi, "SonarConfig: vertical_fov out of range");
    require(gain > 0.0, "SonarConfig: gain must be > 0");
    require(noise_stddev >= 0.0, "SonarConfig: noise_stddev must be >= 0");
    require(perlin_scale > 0.0, "SonarConfig: perlin_scale must be > 0");
    require(effective_perlin_amplitude() >= 0.0, "SonarConfig: perlin_amplitude must be >= 0");
    require(beam_pattern_noise_amplitude >= 0.0, "SonarConfig: beam_pattern_noise_amplitude must be >= 0");
    require(hold_factor >= 0.0 && hold_factor <= 1.0, "SonarConfig: hold_factor must be in [0,1]");
    require(ghosting_factor >= 0.0 && ghosting_factor < 1.0, "SonarConfig: ghosting_factor must be in [0,1)");
  }

  /// Tuning that resembles a Tritech Gemini 1200ik display. A preset, not a datasheet.
  static SonarConfig gemini_1200ik() {
    SonarConfig c;
    c.num_beams = 512;
    c.horizontal_fov = 120.0 * kPi / 180.0;
    c.vertical_fov = 20.0 * kPi / 180.0;
    c.vertical_rays_per_beam = 32;
    c.range_min = 0.2;
    c.range_max = 50.0;
    c.num_bins = 1000;
    c.gain = 4.0;
    c.noise_stddev = 0.02;
    c.perlin_scale = 0.05;
    c.perlin_amplitude = 0.3;
    c.beam_pattern_noise_amplitude = 0.1;
    c.hold_factor = 0.6;
    c.ghosting_factor = 0.5;
    return c;
  }
};

struct SonarImage {
  Grid<double> intensities;  // width = num_beams (x), height = num_bins (y)
  double timestamp = 0.0;

  double& at(int beam, int bin) { return intensities(beam, bin); }
  double at(int beam, int bin) const { return intensities(beam, bin); }
};

/// Bin holding `range`, or nullopt outside [range_min, range_max).
inline std::optional<int> bin_index(double range, const SonarConfig& cfg) {
  require(std::isfinite(range), "bin_index: range must be finite");
  if (range < cfg.range_min || range >= cfg.range_max) return std::nullopt;
  const int bin = static_cast<int>(std::floor((range - cfg.range_min) / cfg.range_step()));
  if (bin < 0 || bin >= cfg.num_bins) return std::nullopt;
  return bin;
}

/// Echo strength of one ray: reflectivity × cos(incidence) / range².
inline double raw_return(const Hit& hit, const Vec3& ray_direction) {
  const double cos_incidence = std::max(0.0, -ray_direction.dot(hit.normal));
  return hit.material->acoustic_reflectivity * cos_incidence / (hit.range * hit.range);
}

/// Sonar-frame unit direction for a beam/vertical-ray pair.
inline Vec3 beam_direction(const SonarConfig& cfg, int beam, int ray) {
  const double az = -0.5 * cfg.horizontal_fov + (beam + 0.5) * cfg.horizontal_fov / cfg.num_beams;
  const double el = -0.5 * cfg.vertical_fov + (ray + 0.5) * cfg.vertical_fov / cfg.vertical_rays_per_beam;
  return Vec3(std::sin(az) * std::cos(el), -std::sin(el), std::cos(az) * std::cos(el)).normalized();
}

/// Per-beam gain perturbation p(beam) in [-1, 1), fixed by the seed.
inline double beam_pattern(std::uint64_t seed, int beam) {
  return noise::uniform_signed({seed, 0x6265616dULL, static_cast<std::uint64_t>(beam)});
}

/// Echo histogram (steps 1-2 of the scan): raw returns accumulated per (beam, bin).
inline Grid<double> echo_histogram(const Scene& scene, const Pose& sonar_pose, const SonarConfig& cfg) {
  Grid<double> hist(cfg.num_beams, cfg.num_bins, 0.0);
  parallel_for(cfg.num_beams, [&](int beam) {
    for (int r = 0; r < cfg.vertical_rays_per_beam; ++r) {
      const Vec3 dir = sonar_pose.transform_vector(beam_direction(cfg, beam, r)).normalized();
      const auto hit = scene.raycast(sonar_pose.position, dir, RayOptions{cfg.range_max});
      if (!hit) continue;
      const auto bin = bin_index(hit->range, cfg);
      if (!bin) continue;
      hist(beam, *bin) += raw_return(*hit, dir);
    }
  });
  return hist;
}

/// Full scan: histogram, gain, beam pattern, Perlin modulation and Gaussian
/// noise, temporal hold/ghosting against `prev`, clamp to [0,1].
inline SonarImage sonar_scan(const Scene& scene, const Pose& sonar_pose, const SonarConfig& cfg,
                             const SonarImage* prev, std::int64_t frame_index) {
  cfg.validate();
  if (prev) {
    require(prev->intensities.width() == cfg.num_beams && prev->intensities.height() == cfg.num_bins,
            "sonar_scan: previous image has a different shape");
  }
  SonarImage out;
  out.intensities = echo_histogram(scene, sonar_pose, cfg);
  const double perlin_amp = cfg.effective_perlin_amplitude();
  const noise::Perlin3 perlin(noise::hash_key({cfg.noise_seed, 0x706e6f697365ULL}));
  const auto frame = static_cast<std::uint64_t>(frame_index);
  const double persist = cfg.hold_factor * cfg.ghosting_factor;
  parallel_for(cfg.num_beams, [&](int beam) {
    const double pattern = 1.0 + cfg.beam_pattern_noise_amplitude * beam_pattern(cfg.noise_seed, beam);
    for (int bin = 0; bin < cfg.num_bins; ++bin) {
      double value = out.at(beam, bin) * cfg.gain;
      value *= pattern;
      if (perlin_amp > 0.0) {
        value *= 1.0 + perlin_amp * perlin(beam * cfg.perlin_scale, bin * cfg.perlin_scale,
                                           static_cast<double>(frame_index));
      }
      if (cfg.noise_stddev > 0.0) {
        value += cfg.noise_stddev * noise::gaussian({cfg.noise_seed, frame, static_cast<std::uint64_t>(beam),
                                                     static_cast<std::uint64_t>(bin)});
      }
      if (prev) value = std::max(value, persist * prev->at(beam, bin));
      out.at(beam, bin) = std::clamp(value, 0.0, 1.0);
    }
  });
  return out;
}

}  // namespace marsim::sonar
