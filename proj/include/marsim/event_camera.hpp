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

// Event-based camera driven by rendered frames.
//
// Between two frames each pixel's log-luminance is a straight line in time.
// A pixel fires when the line reaches reference ± threshold coming from inside
// the band; the reference then moves by exactly that threshold. A crossing
// inside the refractory window is dropped and the reference stays put, so the
// pixel stays silent until the signal re-enters the band and crosses again.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "marsim/core/noise.hpp"
#include "marsim/core/parallel.hpp"
#include "marsim/core/types.hpp"

namespace marsim::ebc {

struct EbcConfig {
  double contrast_threshold_pos = 0.2;
  double contrast_threshold_neg = 0.2;
  double threshold_noise_stddev = 0.0;
  double refractory_period = 0.0;  // s
  double frame_rate = 100.0;       // Hz
  std::uint64_t noise_seed = 0;
  double log_eps = 1e-3;

  void validate() const {
    require(contrast_threshold_pos > 0.0 && contrast_threshold_neg > 0.0, "EbcConfig: thresholds must be > 0");
    require(threshold_noise_stddev >= 0.0, "EbcConfig: threshold noise must be >= 0");
    require(refractory_period >= 0.0, "EbcConfig: refractory period must be >= 0");
    require(frame_rate > 0.0, "EbcConfig: frame_rate must be > 0");
    require(log_eps > 0.0, "EbcConfig: log_eps must be > 0");
  }
};

struct Event {
  int x = 0;
  int y = 0;
  double t = 0.0;
  int polarity = 1;  // +1 or -1

  bool operator==(const Event&) const = default;
};

/// Sort order for simultaneous events: (t, y, x, polarity).
inline bool event_before(const Event& a, const Event& b) {
  return std::tie(a.t, a.y, a.x, a.polarity) < std::tie(b.t, b.y, b.x, b.polarity);
}

struct PixelState {
  double reference_logL = 0.0;
  double last_event_time = -kInf;
  double sampled_threshold_pos = 0.0;
  double sampled_threshold_neg = 0.0;
};

inline double log_luminance(double luminance, double log_eps) {
  require(luminance >= 0.0, "log_luminance: luminance must be non-negative");
  return std::log(luminance + log_eps);
}

inline Grid<double> log_luminance(const Grid<double>& luminance, double log_eps) {
  Grid<double> out(luminance.width(), luminance.height());
  for (std::size_t i = 0; i < luminance.size(); ++i) out[i] = log_luminance(luminance[i], log_eps);
  return out;
}

/// Draw from N(nominal, stddev), clamped to at least 1% of nominal.
/// Keyed by (seed, frame, pixel, per-pixel event counter, polarity).
inline double sample_threshold(const EbcConfig& cfg, double nominal, std::uint64_t frame, std::uint64_t pixel,
                               std::uint64_t counter, int polarity) {
  if (cfg.threshold_noise_stddev <= 0.0) return nominal;
  const double g = noise::gaussian({cfg.noise_seed, frame, pixel, counter, polarity > 0 ? 1ULL : 2ULL});
  return std::max(0.01 * nominal, nominal + cfg.threshold_noise_stddev * g);
}

/// Reference := logL and fresh thresholds; no events. Used for the first frame.
inline Grid<PixelState> initialize_state(const Grid<double>& logL, const EbcConfig& cfg) {
  cfg.validate();
  Grid<PixelState> state(logL.width(), logL.height());
  for (std::size_t i = 0; i < logL.size(); ++i) {
    state[i].reference_logL = logL[i];
    state[i].sampled_threshold_pos = sample_threshold(cfg, cfg.contrast_threshold_pos, 0, i, 0, +1);
    state[i].sampled_threshold_neg = sample_threshold(cfg, cfg.contrast_threshold_neg, 0, i, 0, -1);
  }
  return state;
}

/// Events of one pixel over [t0, t1], appended to `out`.
inline void pixel_events(double prev, double cur, double t0, double t1, const EbcConfig& cfg, PixelState& s,
                         std::uint64_t frame, std::uint64_t pixel_index, int x, int y, std::vector<Event>& out) {
  if (cur == prev) return;
  const double slope = (cur - prev) / (t1 - t0);
  const int polarity = cur > prev ? +1 : -1;
  double value = prev;  // logL at the current scan position
  std::uint64_t counter = 1;
  while (true) {
    const double threshold = polarity > 0 ? s.sampled_threshold_pos : s.sampled_threshold_neg;
    const double level = s.reference_logL + polarity * threshold;
    // must approach the level from inside the band and reach it by t1
    const bool ahead = polarity > 0 ? (value < level && level <= cur) : (value > level && level >= cur);
    if (!ahead) return;
    const double t = std::min(t1, t0 + (level - prev) / slope);
    if (!(t - s.last_event_time > cfg.refractory_period)) return;  // suppressed; reference unchanged
    out.push_back(Event{x, y, t, polarity});
    s.reference_logL = level;
    s.last_event_time = t;
    const double nominal = polarity > 0 ? cfg.contrast_threshold_pos : cfg.contrast_threshold_neg;
    const double fresh = sample_threshold(cfg, nominal, frame, pixel_index, counter++, polarity);
    (polarity > 0 ? s.sampled_threshold_pos : s.sampled_threshold_neg) = fresh;
    value = level;
  }
}

/// Events between two log-luminance frames, sorted by (t, y, x, polarity).
/// `state` is advanced in place.
inline std::vector<Event> generate_events(const Grid<double>& prev_logL, const Grid<double>& cur_logL, double t0,
                                          double t1, const EbcConfig& cfg, Grid<PixelState>& state,
                                          std::uint64_t frame_index = 1) {
  cfg.validate();
  require(t1 > t0, "generate_events: t1 must be greater than t0");
  require(prev_logL.same_shape(cur_logL) && prev_logL.same_shape(state),
          "generate_events: frame and state dimensions must match");
  const int w = cur_logL.width();
  std::vector<std::vector<Event>> rows(static_cast<std::size_t>(cur_logL.height()));
  parallel_for(cur_logL.height(), [&](int y) {
    for (int x = 0; x < w; ++x) {
      const auto idx = static_cast<std::uint64_t>(y) * w + x;
      pixel_events(prev_logL(x, y), cur_logL(x, y), t0, t1, cfg, state(x, y), frame_index, idx, x, y, rows[y]);
    }
  });
  std::vector<Event> events;
  for (auto& r : rows) events.insert(events.end(), r.begin(), r.end());
  std::sort(events.begin(), events.end(), event_before);
  return events;
}

/// Stateful wrapper: feed rendered luminance frames at a fixed rate.
class EventCamera {
 public:
  explicit EventCamera(EbcConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  /// First call only initialises and returns no events.
  std::vector<Event> feed(const Grid<double>& luminance, double t) {
    Grid<double> logL = log_luminance(luminance, cfg_.log_eps);
    std::vector<Event> events;
    if (frames_ == 0) {
      state_ = initialize_state(logL, cfg_);
    } else {
      events = generate_events(prev_logL_, logL, prev_t_, t, cfg_, state_, frames_);
    }
    prev_logL_ = std::move(logL);
    prev_t_ = t;
    ++frames_;
    return events;
  }

  const EbcConfig& config() const { return cfg_; }
  const Grid<PixelState>& state() const { return state_; }

 private:
  EbcConfig cfg_;
  Grid<PixelState> state_;
  Grid<double> prev_logL_;
  double prev_t_ = 0.0;
  std::uint64_t frames_ = 0;
};

}  // namespace marsim::ebc
