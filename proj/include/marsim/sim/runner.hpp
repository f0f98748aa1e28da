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

// Scenario runs: sensor firing on the shared clock, output tree and manifest.

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "marsim/annotation.hpp"
#include "marsim/io/export.hpp"
#include "marsim/optical_flow.hpp"
#include "marsim/sim/world.hpp"

namespace marsim::sim {

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
};

/// Applies command-line overrides; a bad duration is a validation error.
inline void apply_overrides(ScenarioConfig& cfg, const RunOptions& opts) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.duration) {
    if (!(*opts.duration > 0.0) || !std::isfinite(*opts.duration))
      throw ValidationError(cfg.source, {Diagnostic{"/duration", {}, "duration override must be > 0"}});
    cfg.duration = *opts.duration;
  }
}

/// Per-sensor state carried between frames.
struct SensorState {
  std::uint64_t noise_seed = 0;
  std::int64_t frames = 0;
  std::optional<sonar::SonarImage> previous_sonar;
  std::optional<ebc::EventCamera> event_camera;
  std::vector<std::string> files;
};

inline SensorState make_sensor_state(const ScenarioConfig& cfg, std::size_t index) {
  SensorState s;
  s.noise_seed = subsystem_seed(cfg.seed, kSensorTag, index);
  const auto& spec = cfg.sensors[index];
  if (spec.type == SensorType::EventCamera) {
    ebc::EbcConfig e = spec.ebc;
    e.noise_seed = s.noise_seed;
    s.event_camera.emplace(e);
  }
  return s;
}

inline sonar::SonarImage capture_sonar(const World& w, const SensorSpec& spec, SensorState& st) {
  sonar::SonarConfig c = spec.sonar;
  c.noise_seed = st.noise_seed;
  auto img = sonar::sonar_scan(w.scene(), w.mount_state(spec.mount).pose, c,
                               st.previous_sonar ? &*st.previous_sonar : nullptr, st.frames);
  img.timestamp = w.time();
  st.previous_sonar = img;
  return img;
}

inline thermal::ThermalImage capture_thermal(const World& w, const SensorSpec& spec, const SensorState& st) {
  thermal::ThermalConfig c = spec.thermal;
  c.noise_seed = st.noise_seed;
  return thermal::render_thermal(w.scene(), w.mount_state(spec.mount).pose, c, w.config().thermal_env,
                                 static_cast<std::uint64_t>(st.frames));
}

inline RenderBuffers capture_buffers(const World& w, const SensorSpec& spec) {
  return render_buffers(w.scene(), w.mount_state(spec.mount).pose, spec.intrinsics, w.config().lighting);
}

namespace detail {

inline std::string format_hash(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string frame_stem(std::int64_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(frame));
  return buf;
}

inline std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class OutputTree {
 public:
  explicit OutputTree(std::filesystem::path root) : root_(std::move(root)) {}

  /// Absolute path for `rel`, creating its directory, recorded for the manifest.
  std::string path(const std::string& rel, std::vector<std::string>& files) {
    const auto full = root_ / rel;
    std::error_code ec;
    std::filesystem::create_directories(full.parent_path(), ec);
    if (ec) throw io::IoError("cannot create directory '" + full.parent_path().string() + "': " + ec.message());
    files.push_back(rel);
    return full.string();
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

inline void write_usbl(const std::string& path, const std::optional<comms::UsblFix>& fix, comms::Outcome why) {
  auto out = io::detail::open_out(path, false);
  out << "valid,range,bearing,elevation,outcome\n";
  if (fix) out << "1," << format_g(fix->range) << ',' << format_g(fix->bearing) << ',' << format_g(fix->elevation);
  else out << "0,nan,nan,nan";
  out << ',' << comms::to_string(why) << '\n';
}

inline void fire_sensor(const World& w, const SensorSpec& spec, SensorState& st, OutputTree& tree) {
  const std::string stem = spec.name + "/" + frame_stem(st.frames);
  auto& files = st.files;
  switch (spec.type) {
    case SensorType::Camera: {
      const auto b = capture_buffers(w, spec);
      if (spec.enabled("depth")) io::write_raw_grid(tree.path(stem + ".depth.raw", files), b.depth);
      if (spec.enabled("range")) io::write_raw_grid(tree.path(stem + ".range.raw", files), b.range);
      if (spec.enabled("luminance"))
        io::write_luminance_png(tree.path(stem + ".luminance.png", files), b.luminance, 1.0 + w.config().lighting.ambient);
      if (spec.enabled("ids")) {
        io::write_id_png(tree.path(stem + ".instance.png", files), b.instance_id);
        io::write_id_png(tree.path(stem + ".class.png", files), b.class_id);
      }
      break;
    }
    case SensorType::Sonar: {
      const auto img = capture_sonar(w, spec, st);
      if (spec.enabled("png")) io::write_sonar_png(tree.path(stem + ".png", files), img);
      if (spec.enabled("raw")) io::write_raw_grid(tree.path(stem + ".raw", files), img.intensities);
      if (spec.enabled("fan")) io::write_sonar_fan_png(tree.path(stem + ".fan.png", files), img, spec.sonar);
      break;
    }
    case SensorType::EventCamera: {
      const auto b = capture_buffers(w, spec);
      const auto events = st.event_camera->feed(b.luminance, w.time());
      if (spec.enabled("text")) io::write_events_text(tree.path(stem + ".events.txt", files), events);
      if (spec.enabled("binary")) io::write_events_binary(tree.path(stem + ".events.bin", files), events);
      break;
    }
    case SensorType::Thermal: {
      const auto img = capture_thermal(w, spec, st);
      if (spec.enabled("raw")) io::write_raw_grid(tree.path(stem + ".raw", files), img.celsius);
      if (spec.enabled("png")) io::write_rgb_png(tree.path(stem + ".png", files), img.display);
      break;
    }
    case SensorType::OpticalFlow: {
      const auto flow = flow::render_flow(w.scene(), w.mount_state(spec.mount), spec.intrinsics, w.instance_states());
      if (spec.enabled("raw")) io::write_flow_raw(tree.path(stem + ".flow.raw", files), flow);
      if (spec.enabled("png")) io::write_flow_png(tree.path(stem + ".png", files), flow);
      break;
    }
    case SensorType::Annotation: {
      const auto b = capture_buffers(w, spec);
      if (st.frames == 0) io::write_class_names(tree.path(spec.name + "/classes.txt", files), w.config().class_names);
      if (spec.enabled("boxes"))
        io::write_yolo_labels(tree.path(stem + ".txt", files), annotation::bounding_boxes(b, spec.min_box_pixels));
      if (spec.enabled("masks")) {
        tree.path(stem + ".semantic.png", files);
        io::write_masks((tree.root() / stem).string(), annotation::segmentation(b));
        for (const char* plane : {".instance.png", ".panoptic.png"}) files.push_back(stem + plane);
      }
      if (spec.enabled("point_cloud"))
        io::write_point_cloud(tree.path(stem + ".xyz", files), annotation::point_cloud(b, spec.intrinsics));
      break;
    }
    case SensorType::Usbl: {
      const auto& cfg = w.config();
      const auto& a = cfg.comm_nodes[cfg.node_index(spec.transceiver)];
      const auto& b = cfg.comm_nodes[cfg.node_index(spec.transponder)];
      const Pose aw = w.mount_state(a.mount).pose, bw = w.mount_state(b.mount).pose;
      // interrogation and reply must both get through
      const comms::AcousticMessage ping{a.id(), b.id(), {}, w.time()};
      auto d = comms::propagate_acoustic(w.scene(), a.acoustic, aw, b.acoustic, bw, ping, cfg.channel.sound_speed);
      if (d.outcome == comms::Outcome::Delivered)
        d = comms::propagate_acoustic(w.scene(), b.acoustic, bw, a.acoustic, aw, ping, cfg.channel.sound_speed);
      std::optional<comms::UsblFix> fix;
      if (d.outcome == comms::Outcome::Delivered && (aw.position - bw.position).norm() > 0.0)
        fix = comms::usbl_fix(bw, aw, spec.range_noise_std, spec.angle_noise_std, st.noise_seed,
                              static_cast<std::uint64_t>(st.frames));
      detail::write_usbl(tree.path(stem + ".txt", files), fix, d.outcome);
      break;
    }
  }
  ++st.frames;
}

}  // namespace detail

struct RunManifest {
  Json json;
  std::map<std::string, std::int64_t> frame_counts;
};

/// Runs the scenario into `out_dir`. The manifest is written last; on an I/O
/// failure a partial manifest is attempted and the error rethrown.
inline RunManifest run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  const auto started = std::chrono::steady_clock::now();
  auto cfg = std::make_shared<const ScenarioConfig>(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io::IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  detail::OutputTree tree(out_dir);

  std::vector<SensorState> sensors;
  for (std::size_t i = 0; i < cfg->sensors.size(); ++i) sensors.push_back(make_sensor_state(*cfg, i));
  std::vector<std::int64_t> tether_frames(cfg->tethers.size(), 0);
  std::vector<std::vector<std::string>> tether_files(cfg->tethers.size());
  std::vector<std::string> thruster_rows(cfg->thrusters.size());
  std::vector<std::string> thruster_files, comms_files;

  RunManifest manifest;
  auto finish = [&](bool complete, const std::string& error) {
    Json outputs = Json::object();
    for (std::size_t i = 0; i < cfg->sensors.size(); ++i) {
      const auto& s = cfg->sensors[i];
      outputs[s.name] = {{"type", to_string(s.type)}, {"frames", sensors[i].frames}, {"files", sensors[i].files}};
      manifest.frame_counts[s.name] = sensors[i].frames;
    }
    for (std::size_t i = 0; i < cfg->tethers.size(); ++i) {
      outputs[cfg->tethers[i].name] = {{"type", "tether"}, {"frames", tether_frames[i]}, {"files", tether_files[i]}};
      manifest.frame_counts[cfg->tethers[i].name] = tether_frames[i];
    }
    if (!thruster_files.empty()) outputs["thrusters"] = {{"type", "thrusters"}, {"files", thruster_files}};
    if (!comms_files.empty()) outputs["comms"] = {{"type", "comms"}, {"files", comms_files}};
    manifest.json = {{"config_hash", detail::format_hash(noise::hash_string(cfg->text))},
                     {"seed", cfg->seed},
                     {"duration", cfg->duration},
                     {"base_dt", cfg->base_dt},
                     {"ticks", cfg->tick_count() + 1},
                     {"outputs", outputs},
                     {"complete", complete}};
    if (!error.empty()) manifest.json["error"] = error;
    manifest.json["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    auto out = io::detail::open_out((out_dir / "manifest.json").string(), false);
    out << manifest.json.dump(2) << '\n';
    if (!out) throw io::IoError("cannot write manifest");
  };

  try {
    World world(cfg);
    const std::int64_t last = cfg->tick_count();
    for (std::int64_t k = 0; k <= last; ++k) {
      if (k > 0) world.advance();
      for (std::size_t i = 0; i < world.thrusters().size(); ++i) {
        const auto& th = world.thrusters()[i];
        thruster_rows[i] += detail::format_g(world.time()) + ',' + detail::format_g(world.thruster_inputs()[i]) + ',' +
                            detail::format_g(th.state().omega) + ',' + detail::format_g(th.thrust()) + ',' +
                            detail::format_g(th.state().torque) + '\n';
      }
      for (std::size_t i = 0; i < cfg->tethers.size(); ++i) {
        if (k % cfg->tethers[i].ticks_per_frame) continue;
        const std::string rel = cfg->tethers[i].name + "/" + detail::frame_stem(tether_frames[i]++) + ".csv";
        io::write_tether_csv(tree.path(rel, tether_files[i]), world.tethers()[i].state());
      }
      for (std::size_t i = 0; i < cfg->sensors.size(); ++i)
        if (k % cfg->sensors[i].ticks_per_frame == 0) detail::fire_sensor(world, cfg->sensors[i], sensors[i], tree);
    }
    world.flush_messages();

    for (std::size_t i = 0; i < cfg->thrusters.size(); ++i) {
      auto out =
          io::detail::open_out(tree.path("thrusters/" + cfg->thrusters[i].name + ".csv", thruster_files), false);
      out << "t,input,omega,thrust,torque\n" << thruster_rows[i];
    }
    if (!cfg->comm_nodes.empty()) {
      auto out = io::detail::open_out(tree.path("comms/messages.csv", comms_files), false);
      out << "emit_time,src,dst,outcome,receive_time,quality\n";
      for (const auto& m : world.message_log())
        out << detail::format_g(m.emit_time) << ',' << m.src << ',' << m.dst << ',' << comms::to_string(m.outcome)
            << ',' << detail::format_g(m.receive_time) << ',' << detail::format_g(m.quality) << '\n';
    }
    finish(true, "");
  } catch (const io::IoError& e) {
    try {
      finish(false, e.what());
    } catch (...) {
    }
    throw;
  }
  return manifest;
}

}  // namespace marsim::sim
