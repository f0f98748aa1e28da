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

// Step/reset environment over a local stream socket.
//
// Every frame is a 4-byte little-endian length followed by the payload.
// Requests start with an opcode byte:
//   1 RESET    u64 seed
//   2 STEP     u32 n, n × f64 thruster setpoints
//   3 OBS_SPEC
//   4 CLOSE
// Responses start with a status byte (0 ok, 1 error; an error carries a UTF-8
// message and leaves the environment untouched):
//   RESET    u32 n, n × f64 observation
//   STEP     u8 done, u32 n, n × f64 observation
//   OBS_SPEC u32 action size, u32 field count, then per field
//            u16 name length, name, u32 offset, u32 length
//   CLOSE    (empty)

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "marsim/sim/runner.hpp"

namespace marsim::sim {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Opcode : std::uint8_t { Reset = 1, Step = 2, ObsSpec = 3, Close = 4 };
inline constexpr std::uint8_t kStatusOk = 0;
inline constexpr std::uint8_t kStatusError = 1;
inline constexpr std::uint32_t kMaxFrame = 64u << 20;

struct ObsField {
  std::string name;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
  bool operator==(const ObsField&) const = default;
};

// --- byte buffers ------------------------------------------------------------

class ByteWriter {
 public:
  template <typename T>
  ByteWriter& put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
    return *this;
  }
  ByteWriter& put_bytes(const std::string& s) {
    bytes_.insert(bytes_.end(), s.begin(), s.end());
    return *this;
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) throw ProtocolError("truncated message");
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    if (pos_ + n > b_.size()) throw ProtocolError("truncated message");
    std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

// --- environment -------------------------------------------------------------

/// Point-mass vehicle driven by the scenario's thrusters, plus selected sensors.
class Environment {
 public:
  explicit Environment(ScenarioConfig cfg) : base_(std::move(cfg)) {
    if (!base_.env.enabled) throw ConfigError(base_.source + ": scenario has no environment block");
    vehicle_ = base_.body_index(base_.env.vehicle);
    fields_ = {{"position", 0, 3}, {"orientation_wxyz", 3, 4}, {"linear_velocity", 7, 3}, {"angular_velocity", 10, 3}};
    std::uint32_t offset = 13;
    for (const auto& name : base_.env.observations) {
      const auto& s = base_.sensors[base_.sensor_index(name)];
      std::uint32_t n = 0;
      std::string kind;
      if (s.type == SensorType::Sonar) {
        n = static_cast<std::uint32_t>(s.sonar.num_beams * s.sonar.num_bins);
        kind = ".intensity";
      } else if (s.type == SensorType::Thermal) {
        n = static_cast<std::uint32_t>(s.thermal.intrinsics.width * s.thermal.intrinsics.height);
        kind = ".celsius";
      } else {
        n = static_cast<std::uint32_t>(s.intrinsics.width * s.intrinsics.height);
        kind = ".luminance";
      }
      fields_.push_back({name + kind, offset, n});
      offset += n;
    }
    obs_size_ = offset;
  }

  const std::vector<ObsField>& obs_spec() const { return fields_; }
  std::size_t observation_size() const { return obs_size_; }
  std::size_t action_size() const { return base_.thrusters.size(); }
  bool started() const { return world_ != nullptr; }
  double time() const { return world_ ? world_->time() : 0.0; }

  std::vector<double> reset(std::uint64_t seed) {
    auto cfg = std::make_shared<ScenarioConfig>(base_);
    cfg->seed = seed;
    cfg_ = cfg;
    world_ = std::make_unique<World>(cfg_);
    world_->set_dynamic_vehicle(vehicle_, cfg_->env.mass);
    sensors_.clear();
    for (const auto& name : cfg_->env.observations)
      sensors_.push_back(make_sensor_state(*cfg_, static_cast<std::size_t>(cfg_->sensor_index(name))));
    return observe();
  }

  /// Validates fully before touching any state.
  std::pair<std::vector<double>, bool> step(const std::vector<double>& action) {
    if (!world_) throw ProtocolError("STEP before RESET");
    if (action.size() != action_size())
      throw ProtocolError("action has " + std::to_string(action.size()) + " values, expected " +
                          std::to_string(action_size()));
    for (double v : action)
      if (!std::isfinite(v)) throw ProtocolError("action values must be finite");
    for (int k = 0; k < cfg_->env.control_ticks; ++k) world_->advance(&action);
    auto obs = observe();
    return {std::move(obs), done()};
  }

  bool done() const { return world_ && world_->time() >= cfg_->duration - 1e-9 * cfg_->base_dt; }

 private:
  std::vector<double> observe() {
    std::vector<double> obs;
    obs.reserve(obs_size_);
    const auto& s = world_->body_state(vehicle_);
    const auto& q = s.pose.orientation;
    obs.insert(obs.end(), {s.pose.position.x(), s.pose.position.y(), s.pose.position.z(), q.w(), q.x(), q.y(), q.z(),
                           s.linear_velocity.x(), s.linear_velocity.y(), s.linear_velocity.z(), s.angular_velocity.x(),
                           s.angular_velocity.y(), s.angular_velocity.z()});
    for (std::size_t i = 0; i < cfg_->env.observations.size(); ++i) {
      const auto& spec = cfg_->sensors[cfg_->sensor_index(cfg_->env.observations[i])];
      auto& st = sensors_[i];
      if (spec.type == SensorType::Sonar) {
        const auto img = capture_sonar(*world_, spec, st);
        obs.insert(obs.end(), img.intensities.data().begin(), img.intensities.data().end());
      } else if (spec.type == SensorType::Thermal) {
        const auto img = capture_thermal(*world_, spec, st);
        obs.insert(obs.end(), img.celsius.data().begin(), img.celsius.data().end());
      } else {
        const auto b = capture_buffers(*world_, spec);
        obs.insert(obs.end(), b.luminance.data().begin(), b.luminance.data().end());
      }
      ++st.frames;
    }
    return obs;
  }

  ScenarioConfig base_;
  std::shared_ptr<const ScenarioConfig> cfg_;
  std::unique_ptr<World> world_;
  std::vector<SensorState> sensors_;
  std::vector<ObsField> fields_;
  std::size_t obs_size_ = 0;
  int vehicle_ = -1;
};

/// One request in, one response out. Sets `close` on CLOSE.
inline std::vector<std::uint8_t> handle_request(Environment& env, const std::vector<std::uint8_t>& request, bool& close) {
  ByteWriter out;
  try {
    ByteReader in(request);
    const auto op = static_cast<Opcode>(in.get<std::uint8_t>());
    auto put_obs = [&](const std::vector<double>& obs) {
      out.put<std::uint32_t>(static_cast<std::uint32_t>(obs.size()));
      for (double v : obs) out.put<double>(v);
    };
    switch (op) {
      case Opcode::Reset: {
        const auto seed = in.get<std::uint64_t>();
        if (in.remaining()) throw ProtocolError("trailing bytes in RESET");
        const auto obs = env.reset(seed);
        out.put<std::uint8_t>(kStatusOk);
        put_obs(obs);
        break;
      }
      case Opcode::Step: {
        const auto n = in.get<std::uint32_t>();
        if (in.remaining() != static_cast<std::size_t>(n) * 8) throw ProtocolError("STEP length does not match its count");
        std::vector<double> action(n);
        for (auto& v : action) v = in.get<double>();
        const auto [obs, done] = env.step(action);
        out.put<std::uint8_t>(kStatusOk).put<std::uint8_t>(done ? 1 : 0);
        put_obs(obs);
        break;
      }
      case Opcode::ObsSpec: {
        out.put<std::uint8_t>(kStatusOk);
        out.put<std::uint32_t>(static_cast<std::uint32_t>(env.action_size()));
        out.put<std::uint32_t>(static_cast<std::uint32_t>(env.obs_spec().size()));
        for (const auto& f : env.obs_spec()) {
          out.put<std::uint16_t>(static_cast<std::uint16_t>(f.name.size())).put_bytes(f.name);
          out.put<std::uint32_t>(f.offset).put<std::uint32_t>(f.length);
        }
        break;
      }
      case Opcode::Close:
        out.put<std::uint8_t>(kStatusOk);
        close = true;
        break;
      default:
        throw ProtocolError("unknown opcode " + std::to_string(static_cast<int>(op)));
    }
  } catch (const std::exception& e) {
    ByteWriter err;
    err.put<std::uint8_t>(kStatusError).put_bytes(e.what());
    return std::move(err.bytes());
  }
  return std::move(out.bytes());
}

// --- transport ---------------------------------------------------------------

namespace detail {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

inline std::runtime_error sys_error(const std::string& what) {
  return std::runtime_error(what + ": " + std::strerror(errno));
}

inline bool read_exact(int fd, void* buf, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(buf);
  while (n > 0) {
    const ssize_t got = ::read(fd, p, n);
    if (got == 0) return false;
    if (got < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

inline void write_exact(int fd, const void* buf, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(buf);
  while (n > 0) {
    const ssize_t put = ::send(fd, p, n, MSG_NOSIGNAL);
    if (put < 0) {
      if (errno == EINTR) continue;
      throw sys_error("send");
    }
    p += put;
    n -= static_cast<std::size_t>(put);
  }
}

inline std::optional<std::vector<std::uint8_t>> read_frame(int fd) {
  std::uint32_t len = 0;
  if (!read_exact(fd, &len, 4)) return std::nullopt;
  if (len > kMaxFrame) throw ProtocolError("frame too large");
  std::vector<std::uint8_t> payload(len);
  if (len && !read_exact(fd, payload.data(), len)) return std::nullopt;
  return payload;
}

inline void write_frame(int fd, const std::vector<std::uint8_t>& payload) {
  const auto len = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> frame(4 + payload.size());
  std::memcpy(frame.data(), &len, 4);
  std::copy(payload.begin(), payload.end(), frame.begin() + 4);
  write_exact(fd, frame.data(), frame.size());
}

}  // namespace detail

/// `unix:<path>`, a bare path containing '/', `tcp:<host>:<port>` or `<host>:<port>`.
struct ListenAddress {
  bool unix_socket = true;
  std::string path;
  std::string host = "127.0.0.1";
  int port = 0;

  static ListenAddress parse(const std::string& s) {
    ListenAddress a;
    if (s.rfind("unix:", 0) == 0) {
      a.path = s.substr(5);
    } else if (s.rfind("tcp:", 0) == 0 || (s.find('/') == std::string::npos && s.find(':') != std::string::npos)) {
      const std::string rest = s.rfind("tcp:", 0) == 0 ? s.substr(4) : s;
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos) throw ConfigError("listen address needs host:port: '" + s + "'");
      a.unix_socket = false;
      a.host = rest.substr(0, colon);
      if (a.host.empty() || a.host == "localhost") a.host = "127.0.0.1";
      try {
        std::size_t used = 0;
        a.port = std::stoi(rest.substr(colon + 1), &used);
        if (used != rest.size() - colon - 1 || a.port < 0 || a.port > 65535) throw std::out_of_range("port");
      } catch (const std::exception&) {
        throw ConfigError("bad port in listen address '" + s + "'");
      }
    } else {
      a.path = s;
    }
    if (a.unix_socket) {
      if (a.path.empty()) throw ConfigError("empty socket path");
      if (a.path.size() >= sizeof(sockaddr_un{}.sun_path)) throw ConfigError("socket path too long: '" + a.path + "'");
    }
    return a;
  }

  std::string to_string() const { return unix_socket ? "unix:" + path : "tcp:" + host + ":" + std::to_string(port); }
};

class Listener {
 public:
  explicit Listener(const ListenAddress& addr) : addr_(addr) {
    if (addr_.unix_socket) {
      fd_ = detail::Fd(::socket(AF_UNIX, SOCK_STREAM, 0));
      if (fd_.get() < 0) throw detail::sys_error("socket");
      sockaddr_un sa{};
      sa.sun_family = AF_UNIX;
      std::strncpy(sa.sun_path, addr_.path.c_str(), sizeof(sa.sun_path) - 1);
      ::unlink(addr_.path.c_str());
      if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) throw detail::sys_error("bind " + addr_.path);
      unlink_on_close_ = true;
    } else {
      fd_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
      if (fd_.get() < 0) throw detail::sys_error("socket");
      const int one = 1;
      ::setsockopt(fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      sockaddr_in sa{};
      sa.sin_family = AF_INET;
      sa.sin_port = htons(static_cast<std::uint16_t>(addr_.port));
      if (::inet_pton(AF_INET, addr_.host.c_str(), &sa.sin_addr) != 1)
        throw ConfigError("listen host must be an IPv4 address or localhost: '" + addr_.host + "'");
      if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) throw detail::sys_error("bind");
      socklen_t len = sizeof sa;
      ::getsockname(fd_.get(), reinterpret_cast<sockaddr*>(&sa), &len);
      addr_.port = ntohs(sa.sin_port);
    }
    if (::listen(fd_.get(), 1) < 0) throw detail::sys_error("listen");
  }

  ~Listener() {
    if (unlink_on_close_) ::unlink(addr_.path.c_str());
  }

  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  /// Bound address; for TCP port 0 this carries the chosen port.
  const ListenAddress& address() const { return addr_; }

  detail::Fd accept() const {
    while (true) {
      const int c = ::accept(fd_.get(), nullptr, nullptr);
      if (c >= 0) return detail::Fd(c);
      if (errno != EINTR) throw detail::sys_error("accept");
    }
  }

 private:
  ListenAddress addr_;
  detail::Fd fd_;
  bool unlink_on_close_ = false;
};

/// Serves one client at a time, strictly request/response, until CLOSE.
inline void serve(Environment& env, Listener& listener) {
  while (true) {
    detail::Fd client = listener.accept();
    while (true) {
      std::optional<std::vector<std::uint8_t>> req;
      try {
        req = detail::read_frame(client.get());
      } catch (const ProtocolError& e) {
        ByteWriter err;
        err.put<std::uint8_t>(kStatusError).put_bytes(e.what());
        detail::write_frame(client.get(), err.bytes());
        break;
      }
      if (!req) break;  // client went away; wait for the next one
      bool close = false;
      const auto resp = handle_request(env, *req, close);
      try {
        detail::write_frame(client.get(), resp);
      } catch (const std::runtime_error&) {
        break;
      }
      if (close) return;
    }
  }
}

// --- client ------------------------------------------------------------------

/// Minimal blocking client for scripts and tests.
class EnvClient {
 public:
  struct Response {
    bool ok = false;
    std::string error;
    bool done = false;
    std::vector<double> observation;
  };

  explicit EnvClient(const ListenAddress& addr) {
    if (addr.unix_socket) {
      fd_ = detail::Fd(::socket(AF_UNIX, SOCK_STREAM, 0));
      sockaddr_un sa{};
      sa.sun_family = AF_UNIX;
      std::strncpy(sa.sun_path, addr.path.c_str(), sizeof(sa.sun_path) - 1);
      if (::connect(fd_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) throw detail::sys_error("connect");
    } else {
      fd_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
      sockaddr_in sa{};
      sa.sin_family = AF_INET;
      sa.sin_port = htons(static_cast<std::uint16_t>(addr.port));
      ::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr);
      if (::connect(fd_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) throw detail::sys_error("connect");
    }
  }

  std::vector<std::uint8_t> roundtrip(const std::vector<std::uint8_t>& payload) {
    detail::write_frame(fd_.get(), payload);
    auto resp = detail::read_frame(fd_.get());
    if (!resp) throw ProtocolError("server closed the connection");
    return *resp;
  }

  Response reset(std::uint64_t seed) {
    ByteWriter w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Opcode::Reset)).put<std::uint64_t>(seed);
    return decode(roundtrip(w.bytes()), false);
  }

  Response step(const std::vector<double>& action) {
    ByteWriter w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Opcode::Step)).put<std::uint32_t>(static_cast<std::uint32_t>(action.size()));
    for (double v : action) w.put<double>(v);
    return decode(roundtrip(w.bytes()), true);
  }

  std::pair<std::size_t, std::vector<ObsField>> obs_spec() {
    ByteWriter w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Opcode::ObsSpec));
    const auto bytes = roundtrip(w.bytes());
    ByteReader r(bytes);
    if (r.get<std::uint8_t>() != kStatusOk) throw ProtocolError("OBS_SPEC failed");
    const auto action_size = r.get<std::uint32_t>();
    std::vector<ObsField> fields(r.get<std::uint32_t>());
    for (auto& f : fields) {
      f.name = r.get_string(r.get<std::uint16_t>());
      f.offset = r.get<std::uint32_t>();
      f.length = r.get<std::uint32_t>();
    }
    return {action_size, fields};
  }

  bool close() {
    ByteWriter w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Opcode::Close));
    const auto bytes = roundtrip(w.bytes());
    return !bytes.empty() && bytes[0] == kStatusOk;
  }

 private:
  static Response decode(const std::vector<std::uint8_t>& bytes, bool with_done) {
    ByteReader r(bytes);
    Response out;
    out.ok = r.get<std::uint8_t>() == kStatusOk;
    if (!out.ok) {
      out.error = r.get_string(r.remaining());
      return out;
    }
    if (with_done) out.done = r.get<std::uint8_t>() != 0;
    out.observation.resize(r.get<std::uint32_t>());
    for (auto& v : out.observation) v = r.get<double>();
    return out;
  }

  detail::Fd fd_;
};

}  // namespace marsim::sim
