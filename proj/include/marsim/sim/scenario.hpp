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

// Scenario files: JSON parsing and validation with per-field diagnostics.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "marsim/comms.hpp"
#include "marsim/core/bvh.hpp"
#include "marsim/core/mesh.hpp"
#include "marsim/core/scene.hpp"
#include "marsim/core/trajectory.hpp"
#include "marsim/event_camera.hpp"
#include "marsim/sonar.hpp"
#include "marsim/tether.hpp"
#include "marsim/thermal_camera.hpp"
#include "marsim/thrusters.hpp"

namespace marsim::sim {

using Json = nlohmann::json;

// --- diagnostics -------------------------------------------------------------

struct SourceLocation {
  int line = 0;  // 1-based; 0 = unknown
  int column = 0;
};

struct Diagnostic {
  std::string pointer;  // JSON pointer of the offending field
  SourceLocation where;
  std::string message;
};

inline std::string format_diagnostic(const Diagnostic& d, const std::string& source) {
  std::ostringstream os;
  os << source;
  if (d.where.line > 0) os << ':' << d.where.line << ':' << d.where.column;
  os << ": ";
  if (!d.pointer.empty()) os << d.pointer << ": ";
  os << d.message;
  return os.str();
}

class ValidationError : public ConfigError {
 public:
  ValidationError(const std::string& source, std::vector<Diagnostic> diags)
      : ConfigError(join(source, diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::string& source, const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      out += format_diagnostic(d, source);
    }
    return out;
  }

  std::vector<Diagnostic> diagnostics_;
};

inline std::string pointer_escape(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/// Line/column of every value in an already well-formed JSON text, by pointer.
class JsonLocator {
 public:
  explicit JsonLocator(std::string_view text) : text_(text) {
    skip_ws();
    if (pos_ < text_.size()) value("");
  }

  /// Location of `pointer`, or of its closest existing ancestor.
  SourceLocation find(std::string pointer) const {
    while (true) {
      const auto it = map_.find(pointer);
      if (it != map_.end()) return it->second;
      if (pointer.empty()) return {};
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      advance();
  }

  std::string string_token() {
    std::string s;
    advance();  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') advance();
      if (pos_ < text_.size()) {
        s += text_[pos_];
        advance();
      }
    }
    if (pos_ < text_.size()) advance();
    return s;
  }

  void value(const std::string& ptr) {
    map_[ptr] = {line_, col_};
    const char c = text_[pos_];
    if (c == '{') {
      advance();
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const std::string key = string_token();
        skip_ws();
        advance();  // ':'
        skip_ws();
        value(ptr + "/" + pointer_escape(key));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') advance();
        skip_ws();
      }
      if (pos_ < text_.size()) advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      for (int i = 0; pos_ < text_.size() && text_[pos_] != ']'; ++i) {
        value(ptr + "/" + std::to_string(i));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') advance();
        skip_ws();
      }
      if (pos_ < text_.size()) advance();
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && std::string_view(",}] \t\r\n").find(text_[pos_]) == std::string_view::npos) advance();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  std::map<std::string, SourceLocation> map_;
};

// --- scenario model ----------------------------------------------------------

/// Rigid placement relative to a body; an empty body name means the world.
struct MountSpec {
  std::string body;
  Pose local;
};

struct BodySpec {
  std::string name;
  int id = 0;
  std::string mesh;  // empty: a body without geometry
  std::string material;
  KinematicTrajectory trajectory;
  Vec3 center_of_rotation = Vec3::Zero();
  bool ocean_surface = false;
};

enum class SensorType { Camera, Sonar, EventCamera, Thermal, OpticalFlow, Annotation, Usbl };

inline const char* to_string(SensorType t) {
  switch (t) {
    case SensorType::Camera: return "camera";
    case SensorType::Sonar: return "sonar";
    case SensorType::EventCamera: return "event_camera";
    case SensorType::Thermal: return "thermal";
    case SensorType::OpticalFlow: return "optical_flow";
    case SensorType::Annotation: return "annotation";
    case SensorType::Usbl: return "usbl";
  }
  return "?";
}

struct SensorSpec {
  std::string name;
  SensorType type = SensorType::Camera;
  double rate = 1.0;  // Hz
  int ticks_per_frame = 1;
  MountSpec mount;
  CameraIntrinsics intrinsics = CameraIntrinsics::centered(64, 48, 60.0);
  sonar::SonarConfig sonar;
  ebc::EbcConfig ebc;
  thermal::ThermalConfig thermal;
  int min_box_pixels = 1;
  // usbl
  std::string transceiver, transponder;
  double range_noise_std = 0.0;
  double angle_noise_std = 0.0;
  std::map<std::string, bool> outputs;

  bool enabled(const std::string& key) const {
    const auto it = outputs.find(key);
    return it != outputs.end() && it->second;
  }
};

struct ThrusterSpec {
  std::string name;
  MountSpec mount;  // thrust acts along the mount's local +X
  thruster::RotorDynamics rotor;
  thruster::ThrustGeneration generation;
  std::vector<std::pair<double, double>> schedule{{0.0, 0.0}};  // (t, input), held

  double input_at(double t) const {
    double v = schedule.front().second;
    for (const auto& [ts, value] : schedule)
      if (ts <= t + 1e-12) v = value;
    return v;
  }
};

struct TetherAttachmentSpec {
  tether::Endpoint endpoint = tether::Endpoint::First;
  std::optional<Vec3> fixed;
  std::string body;
  Vec3 offset = Vec3::Zero();
};

struct TetherSpec {
  std::string name;
  tether::TetherConfig config;
  Vec3 start = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  std::vector<TetherAttachmentSpec> attachments;
  int substeps = 1;
  double rate = 1.0;
  int ticks_per_frame = 1;
};

enum class NodeKind { Acoustic, Vlc };

struct CommNodeSpec {
  std::string name;
  NodeKind kind = NodeKind::Acoustic;
  MountSpec mount;
  comms::AcousticNode acoustic;
  comms::VlcNode vlc;
  int id() const { return kind == NodeKind::Acoustic ? acoustic.id : vlc.id; }
};

struct MessageSpec {
  double t = 0.0;
  std::string src, dst;
  std::string payload;
};

struct ChannelSpec {
  double sound_speed = comms::kDefaultSoundSpeed;
  double drop_probability = 0.0;
  std::vector<MessageSpec> messages;
};

struct EnvSpec {
  bool enabled = false;
  std::string vehicle;
  double mass = 1.0;
  int control_ticks = 1;
  std::vector<std::string> observations;
};

struct ScenarioConfig {
  std::string source = "<scenario>";
  std::string text;  // raw file contents, hashed into the manifest
  double duration = 1.0;
  double base_dt = 0.01;
  std::uint64_t seed = 0;
  Vec3 gravity = Vec3(0, 0, -9.81);
  LightingEnvironment lighting;
  thermal::ThermalEnvironment thermal_env;
  std::map<std::string, std::shared_ptr<const MeshBvh>> meshes;
  std::map<std::string, std::shared_ptr<const Material>> materials;
  std::vector<std::string> class_names{"background"};
  std::vector<BodySpec> bodies;
  std::vector<SensorSpec> sensors;
  std::vector<ThrusterSpec> thrusters;
  std::vector<TetherSpec> tethers;
  std::vector<CommNodeSpec> comm_nodes;
  ChannelSpec channel;
  EnvSpec env;

  /// Ticks after t = 0; the run covers ticks 0..tick_count() inclusive.
  std::int64_t tick_count() const { return static_cast<std::int64_t>(std::floor(duration / base_dt + 1e-9)); }

  int body_index(const std::string& name) const {
    for (std::size_t i = 0; i < bodies.size(); ++i)
      if (bodies[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int node_index(const std::string& name) const {
    for (std::size_t i = 0; i < comm_nodes.size(); ++i)
      if (comm_nodes[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int sensor_index(const std::string& name) const {
    for (std::size_t i = 0; i < sensors.size(); ++i)
      if (sensors[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

/// Frames a rate-r sensor emits over the run, counting t = 0.
inline std::int64_t expected_frames(const ScenarioConfig& cfg, int ticks_per_frame) {
  return cfg.tick_count() / ticks_per_frame + 1;
}

// --- parsing -----------------------------------------------------------------

namespace detail {

class Reader {
 public:
  explicit Reader(const JsonLocator& locator) : locator_(locator) {}

  void error(const std::string& ptr, std::string message) {
    diagnostics.push_back(Diagnostic{ptr, locator_.find(ptr), std::move(message)});
  }

  /// Member `key` of `obj`, or nullptr (with a diagnostic when required).
  const Json* field(const Json& obj, const std::string& ptr, const std::string& key, bool required) {
    if (obj.is_object()) {
      const auto it = obj.find(key);
      if (it != obj.end() && !it->is_null()) return &*it;
    }
    if (required) error(ptr + "/" + pointer_escape(key), "missing required field");
    return nullptr;
  }

  void allow_keys(const Json& obj, const std::string& ptr, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) {
      error(ptr, "expected an object");
      return;
    }
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (auto allowed : keys) known |= allowed == k;
      if (!known) error(ptr + "/" + pointer_escape(k), "unknown field '" + k + "'");
    }
  }

  double number(const Json& obj, const std::string& ptr, const std::string& key, double fallback,
                bool required = false) {
    const Json* v = field(obj, ptr, key, required);
    if (!v) return fallback;
    if (!v->is_number()) {
      error(ptr + "/" + pointer_escape(key), "expected a number");
      return fallback;
    }
    const double d = v->get<double>();
    if (!std::isfinite(d)) error(ptr + "/" + pointer_escape(key), "must be finite");
    return d;
  }

  long long integer(const Json& obj, const std::string& ptr, const std::string& key, long long fallback,
                    bool required = false) {
    const Json* v = field(obj, ptr, key, required);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      error(ptr + "/" + pointer_escape(key), "expected an integer");
      return fallback;
    }
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const Json& obj, const std::string& ptr, const std::string& key,
                                 std::uint64_t fallback) {
    const Json* v = field(obj, ptr, key, false);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) {
      error(ptr + "/" + pointer_escape(key), "expected a non-negative integer");
      return fallback;
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const Json& obj, const std::string& ptr, const std::string& key, bool fallback) {
    const Json* v = field(obj, ptr, key, false);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      error(ptr + "/" + pointer_escape(key), "expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string string(const Json& obj, const std::string& ptr, const std::string& key, std::string fallback,
                     bool required = false) {
    const Json* v = field(obj, ptr, key, required);
    if (!v) return fallback;
    if (!v->is_string()) {
      error(ptr + "/" + pointer_escape(key), "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vector(const Json& obj, const std::string& ptr, const std::string& key,
                                     const Eigen::Matrix<double, N, 1>& fallback, bool required = false) {
    const Json* v = field(obj, ptr, key, required);
    if (!v) return fallback;
    const std::string p = ptr + "/" + pointer_escape(key);
    if (!v->is_array() || v->size() != N) {
      error(p, "expected an array of " + std::to_string(N) + " numbers");
      return fallback;
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!(*v)[i].is_number()) {
        error(p + "/" + std::to_string(i), "expected a number");
        return fallback;
      }
      out[i] = (*v)[i].get<double>();
    }
    if (!out.allFinite()) error(p, "must be finite");
    return out;
  }

  Vec3 vec3(const Json& obj, const std::string& ptr, const std::string& key, const Vec3& fallback,
            bool required = false) {
    return vector<3>(obj, ptr, key, fallback, required);
  }

  /// Runs a module-level validation and turns its complaint into a diagnostic.
  template <typename F>
  void check(const std::string& ptr, F&& f) {
    try {
      f();
    } catch (const ContractViolation& e) {
      error(ptr, e.what());
    } catch (const ConfigError& e) {
      error(ptr, e.what());
    }
  }

  std::vector<Diagnostic> diagnostics;

 private:
  const JsonLocator& locator_;
};

inline bool safe_name(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

inline Pose read_pose(Reader& r, const Json& obj, const std::string& ptr) {
  const Vec3 p = r.vec3(obj, ptr, "position", Vec3::Zero());
  Quat q = Quat::Identity();
  const bool has_rpy = obj.contains("rpy"), has_quat = obj.contains("quaternion");
  if (has_rpy && has_quat) r.error(ptr, "give either rpy or quaternion, not both");
  if (has_rpy) {
    const Vec3 rpy = r.vec3(obj, ptr, "rpy", Vec3::Zero());
    q = quat_from_rpy(rpy.x(), rpy.y(), rpy.z());
  } else if (has_quat) {
    const auto wxyz = r.vector<4>(obj, ptr, "quaternion", Eigen::Vector4d(1, 0, 0, 0));
    if (std::abs(wxyz.norm() - 1.0) > 1e-9) {
      r.error(ptr + "/quaternion", "quaternion must have unit norm");
    } else {
      q = Quat(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    }
  }
  return Pose(p, q);
}

inline MountSpec read_mount(Reader& r, const Json& obj, const std::string& ptr, const ScenarioConfig& cfg) {
  MountSpec m;
  const Json* j = r.field(obj, ptr, "mount", false);
  if (!j) return m;
  const std::string p = ptr + "/mount";
  r.allow_keys(*j, p, {"body", "position", "rpy", "quaternion"});
  if (!j->is_object()) return m;
  m.body = r.string(*j, p, "body", "");
  if (!m.body.empty() && cfg.body_index(m.body) < 0) r.error(p + "/body", "unknown body '" + m.body + "'");
  m.local = read_pose(r, *j, p);
  return m;
}

inline void read_meshes(Reader& r, const Json& root, ScenarioConfig& cfg, const std::filesystem::path& base) {
  const Json* meshes = r.field(root, "", "meshes", false);
  if (!meshes) return;
  if (!meshes->is_object()) {
    r.error("/meshes", "expected an object of named meshes");
    return;
  }
  for (const auto& [name, m] : meshes->items()) {
    const std::string p = "/meshes/" + pointer_escape(name);
    const std::string type = r.string(m, p, "type", "", true);
    r.check(p, [&] {
      std::optional<TriangleMesh> mesh;
      if (type == "box") {
        r.allow_keys(m, p, {"type", "size"});
        mesh = make_box(r.vec3(m, p, "size", Vec3::Ones()));
      } else if (type == "sphere") {
        r.allow_keys(m, p, {"type", "radius", "stacks", "slices"});
        mesh = make_sphere(r.number(m, p, "radius", 1.0), static_cast<int>(r.integer(m, p, "stacks", 16)),
                           static_cast<int>(r.integer(m, p, "slices", 32)));
      } else if (type == "plane") {
        r.allow_keys(m, p, {"type", "size"});
        const Vec2 size = r.vector<2>(m, p, "size", Vec2(1, 1));
        mesh = make_plane(size.x(), size.y());
      } else if (type == "obj") {
        r.allow_keys(m, p, {"type", "path"});
        const std::filesystem::path rel = r.string(m, p, "path", "", true);
        if (!rel.empty()) mesh = load_obj((rel.is_absolute() ? rel : base / rel).string());
      } else if (!type.empty()) {
        r.error(p + "/type", "unknown mesh type '" + type + "' (box, sphere, plane, obj)");
      }
      if (mesh) cfg.meshes[name] = std::make_shared<const MeshBvh>(std::move(*mesh));
    });
  }
}

inline void read_materials(Reader& r, const Json& root, ScenarioConfig& cfg) {
  const Json* mats = r.field(root, "", "materials", false);
  if (!mats) return;
  if (!mats->is_object()) {
    r.error("/materials", "expected an object of named materials");
    return;
  }
  std::map<int, std::string> names;
  for (const auto& [name, j] : mats->items()) {
    const std::string p = "/materials/" + pointer_escape(name);
    r.allow_keys(j, p, {"albedo", "roughness", "acoustic_reflectivity", "class_id", "class_name", "thermal"});
    auto m = std::make_shared<Material>();
    m->albedo = r.number(j, p, "albedo", m->albedo);
    m->roughness = r.number(j, p, "roughness", m->roughness);
    m->acoustic_reflectivity = r.number(j, p, "acoustic_reflectivity", m->acoustic_reflectivity);
    m->class_id = static_cast<int>(r.integer(j, p, "class_id", 0));
    if (m->class_id < 0 || m->class_id > 65535) r.error(p + "/class_id", "class_id must be in [0, 65535]");
    const std::string class_name = r.string(j, p, "class_name", "");
    if (!class_name.empty() && m->class_id > 0) {
      const auto [it, inserted] = names.emplace(m->class_id, class_name);
      if (!inserted && it->second != class_name)
        r.error(p + "/class_name", "class " + std::to_string(m->class_id) + " already named '" + it->second + "'");
    }
    if (const Json* th = r.field(j, p, "thermal", false)) {
      const std::string tp = p + "/thermal";
      const std::string mode = r.string(*th, tp, "mode", "", true);
      if (mode == "air") {
        r.allow_keys(*th, tp, {"mode"});
        m->thermal_mode = AirTemperature{};
      } else if (mode == "constant") {
        r.allow_keys(*th, tp, {"mode", "celsius"});
        m->thermal_mode = ConstantTemperature{r.number(*th, tp, "celsius", 20.0, true)};
      } else if (mode == "map") {
        r.allow_keys(*th, tp, {"mode", "rows", "cols", "values"});
        TemperatureMap tm;
        tm.rows = static_cast<int>(r.integer(*th, tp, "rows", 1, true));
        tm.cols = static_cast<int>(r.integer(*th, tp, "cols", 1, true));
        tm.values.clear();
        if (const Json* vals = r.field(*th, tp, "values", true)) {
          if (!vals->is_array()) r.error(tp + "/values", "expected an array of numbers");
          else
            for (const auto& v : *vals) tm.values.push_back(v.is_number() ? v.get<double>() : kInf);
        }
        r.check(tp, [&] { tm.validate(); });
        m->thermal_mode = tm;
      } else if (!mode.empty()) {
        r.error(tp + "/mode", "unknown thermal mode '" + mode + "' (air, constant, map)");
      }
    }
    r.check(p, [&] { m->validate(); });
    cfg.materials[name] = m;
  }
  int max_id = 0;
  for (const auto& [n, m] : cfg.materials) max_id = std::max(max_id, m->class_id);
  cfg.class_names.assign(static_cast<std::size_t>(max_id) + 1, "");
  cfg.class_names[0] = "background";
  for (int id = 1; id <= max_id; ++id) {
    const auto it = names.find(id);
    cfg.class_names[id] = it != names.end() ? it->second : "class_" + std::to_string(id);
  }
}

inline void read_bodies(Reader& r, const Json& root, ScenarioConfig& cfg) {
  const Json* bodies = r.field(root, "", "bodies", false);
  if (!bodies) return;
  if (!bodies->is_array()) {
    r.error("/bodies", "expected an array");
    return;
  }
  std::set<int> ids;
  std::set<std::string> names;
  for (std::size_t i = 0; i < bodies->size(); ++i) {
    const Json& j = (*bodies)[i];
    const std::string p = "/bodies/" + std::to_string(i);
    r.allow_keys(j, p, {"name", "id", "mesh", "material", "pose", "trajectory", "center_of_rotation", "ocean_surface"});
    BodySpec b;
    b.name = r.string(j, p, "name", "", true);
    if (!b.name.empty() && !names.insert(b.name).second) r.error(p + "/name", "duplicate body name '" + b.name + "'");
    b.id = static_cast<int>(r.integer(j, p, "id", static_cast<long long>(i) + 1));
    if (b.id <= 0 || b.id > 65535) r.error(p + "/id", "body id must be in [1, 65535]");
    else if (!ids.insert(b.id).second) r.error(p + "/id", "duplicate body id " + std::to_string(b.id));
    b.mesh = r.string(j, p, "mesh", "");
    b.material = r.string(j, p, "material", "");
    if (!b.mesh.empty()) {
      if (!cfg.meshes.count(b.mesh)) {
        // a mesh that failed to load already has its own diagnostic
        bool reported = false;
        for (const auto& d : r.diagnostics) reported |= d.pointer.rfind("/meshes/" + pointer_escape(b.mesh), 0) == 0;
        if (!reported) r.error(p + "/mesh", "unknown mesh '" + b.mesh + "'");
      }
      if (b.material.empty()) r.error(p + "/material", "a body with a mesh needs a material");
      else if (!cfg.materials.count(b.material)) r.error(p + "/material", "unknown material '" + b.material + "'");
    }
    b.center_of_rotation = r.vec3(j, p, "center_of_rotation", Vec3::Zero());
    b.ocean_surface = r.boolean(j, p, "ocean_surface", false);
    const Json* traj = r.field(j, p, "trajectory", false);
    const Json* pose = r.field(j, p, "pose", false);
    if (traj && pose) r.error(p, "give either pose or trajectory, not both");
    if (traj) {
      const std::string tp = p + "/trajectory";
      r.allow_keys(*traj, tp, {"interpolation", "waypoints"});
      const std::string mode = r.string(*traj, tp, "interpolation", "linear");
      if (mode != "linear" && mode != "hold") r.error(tp + "/interpolation", "expected 'linear' or 'hold'");
      std::vector<Waypoint> wps;
      if (const Json* w = r.field(*traj, tp, "waypoints", true)) {
        if (!w->is_array() || w->empty()) {
          r.error(tp + "/waypoints", "expected a non-empty array");
        } else {
          for (std::size_t k = 0; k < w->size(); ++k) {
            const std::string wp = tp + "/waypoints/" + std::to_string(k);
            r.allow_keys((*w)[k], wp, {"t", "position", "rpy", "quaternion"});
            Waypoint point{r.number((*w)[k], wp, "t", 0.0, true), read_pose(r, (*w)[k], wp)};
            if (!wps.empty() && !(point.t > wps.back().t)) r.error(wp + "/t", "waypoint times must be strictly increasing");
            wps.push_back(point);
          }
        }
      }
      r.check(tp, [&] {
        if (!wps.empty())
          b.trajectory = KinematicTrajectory(wps, mode == "hold" ? Interpolation::Hold : Interpolation::Linear);
      });
    } else if (pose) {
      r.allow_keys(*pose, p + "/pose", {"position", "rpy", "quaternion"});
      b.trajectory = KinematicTrajectory::fixed(read_pose(r, *pose, p + "/pose"));
    }
    cfg.bodies.push_back(std::move(b));
  }
}

inline CameraIntrinsics read_intrinsics(Reader& r, const Json& j, const std::string& ptr, const CameraIntrinsics& def) {
  const Json* in = r.field(j, ptr, "intrinsics", false);
  if (!in) return def;
  const std::string p = ptr + "/intrinsics";
  r.allow_keys(*in, p, {"width", "height", "focal_length", "principal_point"});
  const int w = static_cast<int>(r.integer(*in, p, "width", def.width, true));
  const int h = static_cast<int>(r.integer(*in, p, "height", def.height, true));
  const double f = r.number(*in, p, "focal_length", def.focal_length, true);
  CameraIntrinsics intr = CameraIntrinsics::centered(w, h, f);
  intr.principal_point = r.vector<2>(*in, p, "principal_point", intr.principal_point);
  if (w < 1 || h < 1 || w > 65535 || h > 65535) r.error(p, "width and height must be in [1, 65535]");
  r.check(p, [&] { intr.validate(); });
  return intr;
}

inline double degrees(Reader& r, const Json& j, const std::string& p, const std::string& key, double fallback_rad) {
  return r.number(j, p, key, fallback_rad * 180.0 / kPi) * kPi / 180.0;
}

inline void read_outputs(Reader& r, const Json& j, const std::string& ptr, SensorSpec& s,
                         std::initializer_list<std::pair<std::string_view, bool>> defaults) {
  for (const auto& [k, v] : defaults) s.outputs[std::string(k)] = v;
  const Json* out = r.field(j, ptr, "outputs", false);
  if (!out) return;
  const std::string p = ptr + "/outputs";
  if (!out->is_object()) {
    r.error(p, "expected an object of output toggles");
    return;
  }
  for (const auto& [k, v] : out->items()) {
    if (!s.outputs.count(k)) {
      std::string known;
      for (const auto& [name, on] : s.outputs) known += (known.empty() ? "" : ", ") + name;
      r.error(p + "/" + pointer_escape(k), "unknown output '" + k + "' for this sensor (" + known + ")");
    } else if (!v.is_boolean()) {
      r.error(p + "/" + pointer_escape(k), "expected true or false");
    } else {
      s.outputs[k] = v.get<bool>();
    }
  }
}

inline int ticks_for_rate(Reader& r, const std::string& ptr, double rate, double base_dt) {
  if (!(rate > 0.0)) {
    r.error(ptr, "rate must be > 0");
    return 1;
  }
  if (!(base_dt > 0.0)) return 1;
  const double ticks = 1.0 / (rate * base_dt);
  const double rounded = std::round(ticks);
  if (rounded < 1.0 || std::abs(ticks - rounded) > 1e-9 * std::max(1.0, ticks)) {
    std::ostringstream os;
    os << "rate does not divide base step (1/(rate*base_dt) = " << ticks << " is not an integer)";
    r.error(ptr, os.str());
    return 1;
  }
  return static_cast<int>(rounded);
}

inline SensorType parse_sensor_type(const std::string& s, bool& ok) {
  ok = true;
  if (s == "camera") return SensorType::Camera;
  if (s == "sonar") return SensorType::Sonar;
  if (s == "event_camera") return SensorType::EventCamera;
  if (s == "thermal") return SensorType::Thermal;
  if (s == "optical_flow") return SensorType::OpticalFlow;
  if (s == "annotation") return SensorType::Annotation;
  if (s == "usbl") return SensorType::Usbl;
  ok = false;
  return SensorType::Camera;
}

inline void read_sensor_config(Reader& r, const Json& j, const std::string& p, SensorSpec& s, const ScenarioConfig& cfg) {
  static const std::initializer_list<std::string_view> common{"name", "type", "rate", "mount", "outputs"};
  auto allow = [&](std::initializer_list<std::string_view> extra) {
    std::vector<std::string_view> keys(common);
    keys.insert(keys.end(), extra);
    if (!j.is_object()) return;
    for (const auto& [k, v] : j.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
        r.error(p + "/" + pointer_escape(k), "unknown field '" + k + "' for sensor type " + to_string(s.type));
  };
  switch (s.type) {
    case SensorType::Camera:
      allow({"intrinsics"});
      s.intrinsics = read_intrinsics(r, j, p, s.intrinsics);
      read_outputs(r, j, p, s, {{"depth", true}, {"range", false}, {"luminance", true}, {"ids", true}});
      break;
    case SensorType::OpticalFlow:
      allow({"intrinsics"});
      s.intrinsics = read_intrinsics(r, j, p, s.intrinsics);
      read_outputs(r, j, p, s, {{"raw", true}, {"png", true}});
      break;
    case SensorType::Annotation:
      allow({"intrinsics", "min_box_pixels"});
      s.intrinsics = read_intrinsics(r, j, p, s.intrinsics);
      s.min_box_pixels = static_cast<int>(r.integer(j, p, "min_box_pixels", 1));
      if (s.min_box_pixels < 1) r.error(p + "/min_box_pixels", "must be >= 1");
      read_outputs(r, j, p, s, {{"boxes", true}, {"masks", true}, {"point_cloud", true}});
      break;
    case SensorType::EventCamera: {
      allow({"intrinsics", "contrast_threshold_pos", "contrast_threshold_neg", "threshold_noise_stddev",
             "refractory_period", "log_eps"});
      s.intrinsics = read_intrinsics(r, j, p, s.intrinsics);
      auto& e = s.ebc;
      e.contrast_threshold_pos = r.number(j, p, "contrast_threshold_pos", e.contrast_threshold_pos);
      e.contrast_threshold_neg = r.number(j, p, "contrast_threshold_neg", e.contrast_threshold_neg);
      e.threshold_noise_stddev = r.number(j, p, "threshold_noise_stddev", e.threshold_noise_stddev);
      e.refractory_period = r.number(j, p, "refractory_period", e.refractory_period);
      e.log_eps = r.number(j, p, "log_eps", e.log_eps);
      e.frame_rate = s.rate > 0 ? s.rate : 1.0;
      r.check(p, [&] { e.validate(); });
      read_outputs(r, j, p, s, {{"text", true}, {"binary", true}});
      break;
    }
    case SensorType::Thermal: {
      allow({"intrinsics", "temp_min", "temp_max", "noise_stddev"});
      auto& t = s.thermal;
      t.intrinsics = read_intrinsics(r, j, p, t.intrinsics);
      s.intrinsics = t.intrinsics;
      t.temp_min = r.number(j, p, "temp_min", t.temp_min);
      t.temp_max = r.number(j, p, "temp_max", t.temp_max);
      t.noise_stddev = r.number(j, p, "noise_stddev", t.noise_stddev);
      r.check(p, [&] { t.validate(); });
      read_outputs(r, j, p, s, {{"raw", true}, {"png", true}});
      break;
    }
    case SensorType::Sonar: {
      allow({"preset", "num_beams", "horizontal_fov_deg", "vertical_fov_deg", "vertical_rays_per_beam", "range_min",
             "range_max", "num_bins", "gain", "noise_stddev", "perlin_scale", "perlin_amplitude",
             "beam_pattern_noise_amplitude", "hold_factor", "ghosting_factor"});
      const std::string preset = r.string(j, p, "preset", "");
      if (preset == "gemini_1200ik") s.sonar = sonar::SonarConfig::gemini_1200ik();
      else if (!preset.empty()) r.error(p + "/preset", "unknown sonar preset '" + preset + "' (gemini_1200ik)");
      auto& c = s.sonar;
      c.num_beams = static_cast<int>(r.integer(j, p, "num_beams", c.num_beams));
      c.horizontal_fov = degrees(r, j, p, "horizontal_fov_deg", c.horizontal_fov);
      c.vertical_fov = degrees(r, j, p, "vertical_fov_deg", c.vertical_fov);
      c.vertical_rays_per_beam = static_cast<int>(r.integer(j, p, "vertical_rays_per_beam", c.vertical_rays_per_beam));
      c.range_min = r.number(j, p, "range_min", c.range_min);
      c.range_max = r.number(j, p, "range_max", c.range_max);
      c.num_bins = static_cast<int>(r.integer(j, p, "num_bins", c.num_bins));
      c.gain = r.number(j, p, "gain", c.gain);
      c.noise_stddev = r.number(j, p, "noise_stddev", c.noise_stddev);
      c.perlin_scale = r.number(j, p, "perlin_scale", c.perlin_scale);
      if (j.contains("perlin_amplitude")) c.perlin_amplitude = r.number(j, p, "perlin_amplitude", 0.0);
      c.beam_pattern_noise_amplitude = r.number(j, p, "beam_pattern_noise_amplitude", c.beam_pattern_noise_amplitude);
      c.hold_factor = r.number(j, p, "hold_factor", c.hold_factor);
      c.ghosting_factor = r.number(j, p, "ghosting_factor", c.ghosting_factor);
      if (c.num_beams > 65535 || c.num_bins > 65535) r.error(p, "num_beams and num_bins must be <= 65535");
      r.check(p, [&] { c.validate(); });
      read_outputs(r, j, p, s, {{"png", true}, {"raw", true}, {"fan", false}});
      break;
    }
    case SensorType::Usbl: {
      allow({"transceiver", "transponder", "range_noise_std", "angle_noise_std"});
      s.transceiver = r.string(j, p, "transceiver", "", true);
      s.transponder = r.string(j, p, "transponder", "", true);
      for (const auto& [key, node] : {std::pair{"transceiver", s.transceiver}, std::pair{"transponder", s.transponder}}) {
        if (node.empty()) continue;
        const int idx = cfg.node_index(node);
        if (idx < 0) r.error(p + "/" + key, "unknown comm node '" + node + "'");
        else if (cfg.comm_nodes[idx].kind != NodeKind::Acoustic) r.error(p + "/" + key, "USBL needs an acoustic node");
      }
      if (!s.transceiver.empty() && s.transceiver == s.transponder) r.error(p, "transceiver and transponder must differ");
      s.range_noise_std = r.number(j, p, "range_noise_std", 0.0);
      s.angle_noise_std = r.number(j, p, "angle_noise_std", 0.0);
      if (s.range_noise_std < 0 || s.angle_noise_std < 0) r.error(p, "noise standard deviations must be >= 0");
      break;
    }
  }
}

inline void read_sensors(Reader& r, const Json& root, ScenarioConfig& cfg, std::set<std::string>& dir_names) {
  const Json* sensors = r.field(root, "", "sensors", false);
  if (!sensors) return;
  if (!sensors->is_array()) {
    r.error("/sensors", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < sensors->size(); ++i) {
    const Json& j = (*sensors)[i];
    const std::string p = "/sensors/" + std::to_string(i);
    if (!j.is_object()) {
      r.error(p, "expected an object");
      continue;
    }
    SensorSpec s;
    s.name = r.string(j, p, "name", "", true);
    if (!s.name.empty()) {
      if (!safe_name(s.name)) r.error(p + "/name", "name must use letters, digits, '_', '-' or '.'");
      else if (!dir_names.insert(s.name).second) r.error(p + "/name", "duplicate output name '" + s.name + "'");
    }
    const std::string type = r.string(j, p, "type", "", true);
    bool ok = false;
    s.type = parse_sensor_type(type, ok);
    if (!ok) {
      if (!type.empty())
        r.error(p + "/type", "unknown sensor type '" + type +
                                 "' (camera, sonar, event_camera, thermal, optical_flow, annotation, usbl)");
      continue;
    }
    s.rate = r.number(j, p, "rate", 0.0, true);
    if (j.contains("rate")) s.ticks_per_frame = ticks_for_rate(r, p + "/rate", s.rate, cfg.base_dt);
    s.mount = read_mount(r, j, p, cfg);
    read_sensor_config(r, j, p, s, cfg);
    cfg.sensors.push_back(std::move(s));
  }
}

inline thruster::RotorDynamics read_rotor(Reader& r, const Json& j, const std::string& p) {
  const std::string model = r.string(j, p, "model", "", true);
  using namespace thruster;
  if (model == "zero_order") {
    r.allow_keys(j, p, {"model"});
    return ZeroOrder{};
  }
  if (model == "first_order") {
    r.allow_keys(j, p, {"model", "tau"});
    return FirstOrder{r.number(j, p, "tau", FirstOrder{}.tau)};
  }
  if (model == "yoerger") {
    r.allow_keys(j, p, {"model", "alpha", "beta"});
    return Yoerger{r.number(j, p, "alpha", Yoerger{}.alpha), r.number(j, p, "beta", Yoerger{}.beta)};
  }
  if (model == "bessa") {
    r.allow_keys(j, p, {"model", "inertia", "k_linear", "k_quad", "k_torque", "resistance"});
    const Bessa d;
    return Bessa{r.number(j, p, "inertia", d.inertia), r.number(j, p, "k_linear", d.k_linear),
                 r.number(j, p, "k_quad", d.k_quad), r.number(j, p, "k_torque", d.k_torque),
                 r.number(j, p, "resistance", d.resistance)};
  }
  if (model == "mechanical_pi") {
    r.allow_keys(j, p, {"model", "inertia", "kp", "ki", "integral_limit"});
    const MechanicalPI d;
    return MechanicalPI{r.number(j, p, "inertia", d.inertia), r.number(j, p, "kp", d.kp), r.number(j, p, "ki", d.ki),
                        r.number(j, p, "integral_limit", d.integral_limit)};
  }
  if (!model.empty())
    r.error(p + "/model", "unknown rotor model '" + model + "' (zero_order, first_order, yoerger, bessa, mechanical_pi)");
  return ZeroOrder{};
}

inline thruster::ThrustGeneration read_generation(Reader& r, const Json& j, const std::string& p,
                                                  const std::filesystem::path& base) {
  const std::string model = r.string(j, p, "model", "", true);
  using namespace thruster;
  if (model == "quadratic") {
    r.allow_keys(j, p, {"model", "ct"});
    return Quadratic{r.number(j, p, "ct", Quadratic{}.ct)};
  }
  if (model == "deadband") {
    r.allow_keys(j, p, {"model", "ct_fwd", "ct_rev", "deadband_lo", "deadband_hi"});
    const Deadband d;
    return Deadband{r.number(j, p, "ct_fwd", d.ct_fwd), r.number(j, p, "ct_rev", d.ct_rev),
                    r.number(j, p, "deadband_lo", d.deadband_lo), r.number(j, p, "deadband_hi", d.deadband_hi)};
  }
  if (model == "linear_interp") {
    r.allow_keys(j, p, {"model", "table", "csv"});
    LinearInterp tab;
    if (const Json* t = r.field(j, p, "table", false)) {
      bool good = t->is_array();
      if (good)
        for (const auto& row : *t) {
          if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
            good = false;
            break;
          }
          tab.table.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
      if (!good) r.error(p + "/table", "expected an array of [omega, thrust] pairs");
    } else if (const Json* csv = r.field(j, p, "csv", false)) {
      r.check(p + "/csv", [&] {
        const std::filesystem::path rel = csv->is_string() ? csv->get<std::string>() : "";
        tab = load_thrust_table((rel.is_absolute() ? rel : base / rel).string());
      });
    } else {
      r.error(p, "linear_interp needs a table or csv");
    }
    return tab;
  }
  if (model == "fluid_dynamics") {
    r.allow_keys(j, p, {"model", "rho", "diameter", "kt0_fwd", "kt0_rev", "kt_j", "kq"});
    const FluidDynamics d;
    return FluidDynamics{r.number(j, p, "rho", d.rho),         r.number(j, p, "diameter", d.diameter),
                         r.number(j, p, "kt0_fwd", d.kt0_fwd), r.number(j, p, "kt0_rev", d.kt0_rev),
                         r.number(j, p, "kt_j", d.kt_j),       r.number(j, p, "kq", d.kq)};
  }
  if (!model.empty())
    r.error(p + "/model",
            "unknown thrust model '" + model + "' (quadratic, deadband, linear_interp, fluid_dynamics)");
  return Quadratic{};
}

}  // namespace detail

/// Parses one thruster declaration (rotor, generation, input schedule, mount).
inline ThrusterSpec parse_thruster(detail::Reader& r, const Json& j, const std::string& p, const ScenarioConfig& cfg,
                                   const std::filesystem::path& base) {
  ThrusterSpec t;
  r.allow_keys(j, p, {"name", "mount", "rotor", "generation", "input"});
  t.name = r.string(j, p, "name", "thruster");
  t.mount = detail::read_mount(r, j, p, cfg);
  if (const Json* rot = r.field(j, p, "rotor", true)) t.rotor = detail::read_rotor(r, *rot, p + "/rotor");
  if (const Json* gen = r.field(j, p, "generation", true))
    t.generation = detail::read_generation(r, *gen, p + "/generation", base);
  r.check(p, [&] {
    thruster::validate(t.rotor);
    thruster::validate(t.generation);
  });
  if (const Json* in = r.field(j, p, "input", false)) {
    if (in->is_number()) {
      t.schedule = {{0.0, in->get<double>()}};
    } else if (in->is_array() && !in->empty()) {
      t.schedule.clear();
      for (std::size_t k = 0; k < in->size(); ++k) {
        const Json& row = (*in)[k];
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
          r.error(p + "/input/" + std::to_string(k), "expected [t, value]");
          continue;
        }
        if (!t.schedule.empty() && !(row[0].get<double>() > t.schedule.back().first))
          r.error(p + "/input/" + std::to_string(k), "schedule times must be strictly increasing");
        t.schedule.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
      if (t.schedule.empty()) t.schedule = {{0.0, 0.0}};
    } else {
      r.error(p + "/input", "expected a number or an array of [t, value]");
    }
  }
  return t;
}

namespace detail {

inline void read_thrusters(Reader& r, const Json& root, ScenarioConfig& cfg, const std::filesystem::path& base) {
  const Json* ts = r.field(root, "", "thrusters", false);
  if (!ts) return;
  if (!ts->is_array()) {
    r.error("/thrusters", "expected an array");
    return;
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < ts->size(); ++i) {
    const std::string p = "/thrusters/" + std::to_string(i);
    auto t = parse_thruster(r, (*ts)[i], p, cfg, base);
    if (!(*ts)[i].contains("name")) r.error(p + "/name", "missing required field");
    else if (!safe_name(t.name)) r.error(p + "/name", "name must use letters, digits, '_', '-' or '.'");
    else if (!names.insert(t.name).second) r.error(p + "/name", "duplicate thruster name '" + t.name + "'");
    cfg.thrusters.push_back(std::move(t));
  }
}

inline void read_tethers(Reader& r, const Json& root, ScenarioConfig& cfg, std::set<std::string>& dir_names) {
  const Json* ts = r.field(root, "", "tethers", false);
  if (!ts) return;
  if (!ts->is_array()) {
    r.error("/tethers", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < ts->size(); ++i) {
    const Json& j = (*ts)[i];
    const std::string p = "/tethers/" + std::to_string(i);
    r.allow_keys(j, p, {"name", "config", "start", "direction", "attachments", "substeps", "rate"});
    TetherSpec t;
    t.name = r.string(j, p, "name", "", true);
    if (!t.name.empty()) {
      if (!safe_name(t.name)) r.error(p + "/name", "name must use letters, digits, '_', '-' or '.'");
      else if (!dir_names.insert(t.name).second) r.error(p + "/name", "duplicate output name '" + t.name + "'");
    }
    if (const Json* c = r.field(j, p, "config", false)) {
      const std::string cp = p + "/config";
      r.allow_keys(*c, cp, {"n_spheres", "mass_per_sphere", "sphere_radius", "segment_rest_length", "total_length",
                            "joint_damping", "stretch_stiffness", "axial_damping", "water_density", "drag_coefficient"});
      auto& k = t.config;
      k.n_spheres = static_cast<int>(r.integer(*c, cp, "n_spheres", k.n_spheres));
      k.mass_per_sphere = r.number(*c, cp, "mass_per_sphere", k.mass_per_sphere);
      k.sphere_radius = r.number(*c, cp, "sphere_radius", k.sphere_radius);
      k.segment_rest_length = r.number(*c, cp, "segment_rest_length", k.segment_rest_length);
      k.total_length = r.number(*c, cp, "total_length", (k.n_spheres - 1) * k.segment_rest_length);
      k.joint_damping = r.number(*c, cp, "joint_damping", k.joint_damping);
      k.stretch_stiffness = r.number(*c, cp, "stretch_stiffness", k.stretch_stiffness);
      k.axial_damping = r.number(*c, cp, "axial_damping", k.axial_damping);
      k.water_density = r.number(*c, cp, "water_density", k.water_density);
      k.drag_coefficient = r.number(*c, cp, "drag_coefficient", k.drag_coefficient);
      r.check(cp, [&] { k.validate(); });
    }
    t.start = r.vec3(j, p, "start", Vec3::Zero(), true);
    t.direction = r.vec3(j, p, "direction", Vec3::UnitX());
    if (t.direction.norm() < 1e-12) r.error(p + "/direction", "direction must be non-zero");
    t.substeps = static_cast<int>(r.integer(j, p, "substeps", 1));
    if (t.substeps < 1) r.error(p + "/substeps", "must be >= 1");
    t.rate = r.number(j, p, "rate", 0.0, true);
    if (j.contains("rate")) t.ticks_per_frame = ticks_for_rate(r, p + "/rate", t.rate, cfg.base_dt);
    if (const Json* atts = r.field(j, p, "attachments", false)) {
      if (!atts->is_array()) r.error(p + "/attachments", "expected an array");
      else
        for (std::size_t k = 0; k < atts->size(); ++k) {
          const Json& a = (*atts)[k];
          const std::string ap = p + "/attachments/" + std::to_string(k);
          r.allow_keys(a, ap, {"endpoint", "fixed", "body", "offset"});
          TetherAttachmentSpec s;
          const std::string ep = r.string(a, ap, "endpoint", "", true);
          if (ep == "last") s.endpoint = tether::Endpoint::Last;
          else if (ep != "first" && !ep.empty()) r.error(ap + "/endpoint", "expected 'first' or 'last'");
          if (a.contains("fixed") == a.contains("body")) r.error(ap, "give exactly one of fixed or body");
          if (a.contains("fixed")) s.fixed = r.vec3(a, ap, "fixed", Vec3::Zero());
          s.body = r.string(a, ap, "body", "");
          if (!s.body.empty() && cfg.body_index(s.body) < 0) r.error(ap + "/body", "unknown body '" + s.body + "'");
          s.offset = r.vec3(a, ap, "offset", Vec3::Zero());
          for (const auto& prev : t.attachments)
            if (prev.endpoint == s.endpoint) r.error(ap + "/endpoint", "endpoint already attached");
          t.attachments.push_back(s);
        }
    }
    cfg.tethers.push_back(std::move(t));
  }
}

inline void read_comms(Reader& r, const Json& root, ScenarioConfig& cfg) {
  if (const Json* nodes = r.field(root, "", "comm_nodes", false)) {
    if (!nodes->is_array()) {
      r.error("/comm_nodes", "expected an array");
    } else {
      std::set<std::string> names;
      std::set<std::pair<int, int>> ids;
      for (std::size_t i = 0; i < nodes->size(); ++i) {
        const Json& j = (*nodes)[i];
        const std::string p = "/comm_nodes/" + std::to_string(i);
        CommNodeSpec n;
        n.name = r.string(j, p, "name", "", true);
        if (!n.name.empty() && !names.insert(n.name).second) r.error(p + "/name", "duplicate node name '" + n.name + "'");
        const std::string kind = r.string(j, p, "type", "", true);
        n.mount = read_mount(r, j, p, cfg);
        const int id = static_cast<int>(r.integer(j, p, "id", static_cast<long long>(i) + 1));
        const int mount_id = n.mount.body.empty() || cfg.body_index(n.mount.body) < 0
                                 ? 0
                                 : cfg.bodies[cfg.body_index(n.mount.body)].id;
        if (kind == "acoustic") {
          r.allow_keys(j, p, {"name", "type", "id", "mount", "cone_half_angle_deg", "max_range"});
          n.kind = NodeKind::Acoustic;
          auto& a = n.acoustic;
          a.id = id;
          a.mount_body = mount_id;
          a.local_pose = n.mount.local;
          a.cone_half_angle = degrees(r, j, p, "cone_half_angle_deg", a.cone_half_angle);
          a.max_range = r.number(j, p, "max_range", a.max_range);
          r.check(p, [&] { a.validate(); });
        } else if (kind == "vlc") {
          r.allow_keys(j, p, {"name", "type", "id", "mount", "beam_half_angle_deg", "max_range_clear",
                              "turbidity_coeff", "link_threshold"});
          n.kind = NodeKind::Vlc;
          auto& v = n.vlc;
          v.id = id;
          v.mount_body = mount_id;
          v.local_pose = n.mount.local;
          v.beam_half_angle = degrees(r, j, p, "beam_half_angle_deg", v.beam_half_angle);
          v.max_range_clear = r.number(j, p, "max_range_clear", v.max_range_clear);
          v.turbidity_coeff = r.number(j, p, "turbidity_coeff", v.turbidity_coeff);
          v.link_threshold = r.number(j, p, "link_threshold", v.link_threshold);
          r.check(p, [&] { v.validate(); });
        } else if (!kind.empty()) {
          r.error(p + "/type", "unknown comm node type '" + kind + "' (acoustic, vlc)");
        }
        if (!ids.insert({static_cast<int>(n.kind), id}).second) r.error(p + "/id", "duplicate node id");
        cfg.comm_nodes.push_back(std::move(n));
      }
    }
  }
  const Json* ch = r.field(root, "", "channels", false);
  if (!ch) return;
  r.allow_keys(*ch, "/channels", {"sound_speed", "drop_probability", "messages"});
  cfg.channel.sound_speed = r.number(*ch, "/channels", "sound_speed", cfg.channel.sound_speed);
  if (!(cfg.channel.sound_speed > 0)) r.error("/channels/sound_speed", "must be > 0");
  cfg.channel.drop_probability = r.number(*ch, "/channels", "drop_probability", 0.0);
  if (cfg.channel.drop_probability < 0 || cfg.channel.drop_probability > 1)
    r.error("/channels/drop_probability", "must be in [0, 1]");
  const Json* msgs = r.field(*ch, "/channels", "messages", false);
  if (!msgs) return;
  if (!msgs->is_array()) {
    r.error("/channels/messages", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < msgs->size(); ++i) {
    const Json& j = (*msgs)[i];
    const std::string p = "/channels/messages/" + std::to_string(i);
    r.allow_keys(j, p, {"t", "src", "dst", "payload"});
    MessageSpec m;
    m.t = r.number(j, p, "t", 0.0, true);
    if (m.t < 0) r.error(p + "/t", "must be >= 0");
    m.src = r.string(j, p, "src", "", true);
    m.dst = r.string(j, p, "dst", "", true);
    m.payload = r.string(j, p, "payload", "");
    if (m.payload.size() > comms::kDefaultPayloadCap) r.error(p + "/payload", "payload exceeds 4096 bytes");
    const int si = cfg.node_index(m.src), di = cfg.node_index(m.dst);
    if (!m.src.empty() && si < 0) r.error(p + "/src", "unknown comm node '" + m.src + "'");
    if (!m.dst.empty() && di < 0) r.error(p + "/dst", "unknown comm node '" + m.dst + "'");
    if (si >= 0 && di >= 0) {
      if (si == di) r.error(p, "src and dst must differ");
      else if (cfg.comm_nodes[si].kind != cfg.comm_nodes[di].kind)
        r.error(p, "src and dst must be on the same channel type");
    }
    cfg.channel.messages.push_back(m);
  }
}

inline void read_environment(Reader& r, const Json& root, ScenarioConfig& cfg) {
  const Json* e = r.field(root, "", "environment", false);
  if (!e) return;
  const std::string p = "/environment";
  r.allow_keys(*e, p, {"vehicle", "mass", "control_period", "observations"});
  cfg.env.enabled = true;
  cfg.env.vehicle = r.string(*e, p, "vehicle", "", true);
  if (!cfg.env.vehicle.empty() && cfg.body_index(cfg.env.vehicle) < 0)
    r.error(p + "/vehicle", "unknown body '" + cfg.env.vehicle + "'");
  cfg.env.mass = r.number(*e, p, "mass", 1.0);
  if (!(cfg.env.mass > 0)) r.error(p + "/mass", "must be > 0");
  const double period = r.number(*e, p, "control_period", cfg.base_dt);
  if (cfg.base_dt > 0 && period > 0) {
    const double ticks = period / cfg.base_dt;
    if (std::abs(ticks - std::round(ticks)) > 1e-9 * std::max(1.0, ticks) || std::round(ticks) < 1)
      r.error(p + "/control_period", "control period must be a whole number of base steps");
    else
      cfg.env.control_ticks = static_cast<int>(std::round(ticks));
  } else {
    r.error(p + "/control_period", "must be > 0");
  }
  if (const Json* obs = r.field(*e, p, "observations", false)) {
    if (!obs->is_array()) {
      r.error(p + "/observations", "expected an array of sensor names");
      return;
    }
    for (std::size_t i = 0; i < obs->size(); ++i) {
      const std::string op = p + "/observations/" + std::to_string(i);
      if (!(*obs)[i].is_string()) {
        r.error(op, "expected a sensor name");
        continue;
      }
      const std::string name = (*obs)[i].get<std::string>();
      const int idx = cfg.sensor_index(name);
      if (idx < 0) {
        r.error(op, "unknown sensor '" + name + "'");
        continue;
      }
      const auto t = cfg.sensors[idx].type;
      if (t != SensorType::Sonar && t != SensorType::Thermal && t != SensorType::Camera)
        r.error(op, std::string("sensor type ") + to_string(t) + " cannot be observed (sonar, thermal, camera)");
      cfg.env.observations.push_back(name);
    }
  }
}

}  // namespace detail

/// Parses and validates scenario text. Throws ValidationError listing every
/// problem found; `base_dir` resolves relative mesh and table paths.
inline ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<scenario>",
                                     const std::filesystem::path& base_dir = ".") {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // byte offset → line/column
    SourceLocation where{1, 1};
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++where.line;
        where.column = 1;
      } else {
        ++where.column;
      }
    }
    std::string msg = e.what();
    if (const auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ValidationError(source, {Diagnostic{"", where, msg}});
  }
  const JsonLocator locator(text);
  detail::Reader r(locator);
  ScenarioConfig cfg;
  cfg.source = source;
  cfg.text = text;
  if (!root.is_object()) {
    r.error("", "scenario must be a JSON object");
    throw ValidationError(source, r.diagnostics);
  }
  r.allow_keys(root, "", {"duration", "base_dt", "seed", "gravity", "lighting", "thermal_environment", "meshes",
                          "materials", "bodies", "sensors", "thrusters", "tethers", "comm_nodes", "channels",
                          "environment", "description"});
  cfg.duration = r.number(root, "", "duration", 0.0, true);
  if (root.contains("duration") && !(cfg.duration > 0.0)) r.error("/duration", "duration must be > 0");
  cfg.base_dt = r.number(root, "", "base_dt", 0.0, true);
  if (root.contains("base_dt") && !(cfg.base_dt > 0.0)) r.error("/base_dt", "base_dt must be > 0");
  cfg.seed = r.unsigned_integer(root, "", "seed", 0);
  cfg.gravity = r.vec3(root, "", "gravity", cfg.gravity);
  if (const Json* l = r.field(root, "", "lighting", false)) {
    r.allow_keys(*l, "/lighting", {"sun_direction", "ambient", "background_luminance", "shadows"});
    const Vec3 sun = r.vec3(*l, "/lighting", "sun_direction", cfg.lighting.sun_direction);
    if (sun.norm() < 1e-12) r.error("/lighting/sun_direction", "must be non-zero");
    else cfg.lighting.sun_direction = sun.normalized();
    cfg.lighting.ambient = r.number(*l, "/lighting", "ambient", cfg.lighting.ambient);
    cfg.lighting.background_luminance = r.number(*l, "/lighting", "background_luminance", 0.0);
    cfg.lighting.shadows = r.boolean(*l, "/lighting", "shadows", true);
    r.check("/lighting", [&] { cfg.lighting.validate(); });
  }
  if (const Json* t = r.field(root, "", "thermal_environment", false)) {
    const std::string p = "/thermal_environment";
    r.allow_keys(*t, p, {"air_temperature", "water_temperature", "solar_irradiance", "sun_direction",
                         "solar_absorption_gain", "water_solar_absorption_gain"});
    auto& e = cfg.thermal_env;
    e.air_temperature = r.number(*t, p, "air_temperature", e.air_temperature);
    e.water_temperature = r.number(*t, p, "water_temperature", e.water_temperature);
    e.solar_irradiance = r.number(*t, p, "solar_irradiance", e.solar_irradiance);
    const Vec3 sun = r.vec3(*t, p, "sun_direction", e.sun_direction);
    if (sun.norm() < 1e-12) r.error(p + "/sun_direction", "must be non-zero");
    else e.sun_direction = sun.normalized();
    e.solar_absorption_gain = r.number(*t, p, "solar_absorption_gain", e.solar_absorption_gain);
    e.water_solar_absorption_gain = r.number(*t, p, "water_solar_absorption_gain", e.water_solar_absorption_gain);
    r.check(p, [&] { e.validate(); });
  }
  detail::read_meshes(r, root, cfg, base_dir);
  detail::read_materials(r, root, cfg);
  detail::read_bodies(r, root, cfg);
  detail::read_comms(r, root, cfg);
  std::set<std::string> dir_names{"thrusters", "comms"};
  detail::read_sensors(r, root, cfg, dir_names);
  detail::read_thrusters(r, root, cfg, base_dir);
  detail::read_tethers(r, root, cfg, dir_names);
  detail::read_environment(r, root, cfg);
  if (!r.diagnostics.empty()) throw ValidationError(source, r.diagnostics);
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path, {Diagnostic{"", {}, "cannot read file"}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path, std::filesystem::path(path).parent_path());
}

}  // namespace marsim::sim
