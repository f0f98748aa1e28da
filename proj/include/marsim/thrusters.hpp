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

// Modular thruster: a rotor-dynamics model feeding a thrust/torque model.
// Any rotor variant composes with any generation variant.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "marsim/core/types.hpp"

namespace marsim::thruster {

// --- rotor dynamics ---------------------------------------------------------

/// Input is the angular velocity itself (rad/s).
struct ZeroOrder {};

/// ω̇ = (u − ω)/tau, u in rad/s.
struct FirstOrder {
  double tau = 0.1;
};

/// alpha·ω̇ + beta·ω|ω| = τ, input torque in N·m.
struct Yoerger {
  double alpha = 0.1;
  double beta = 0.01;
};

/// DC motor with back-EMF and linear + quadratic load; input voltage in V.
struct Bessa {
  double inertia = 0.01;
  double k_linear = 0.0;
  double k_quad = 0.0;
  double k_torque = 0.1;
  double resistance = 1.0;
};

/// Propeller inertia driven by a PI speed loop; input setpoint in rad/s.
struct MechanicalPI {
  double inertia = 0.01;
  double kp = 0.1;
  double ki = 0.0;
  double integral_limit = 1.0;
};

using RotorDynamics = std::variant<ZeroOrder, FirstOrder, Yoerger, Bessa, MechanicalPI>;

// --- thrust generation ------------------------------------------------------

/// T = ct·ω|ω|.
struct Quadratic {
  double ct = 0.05;
};

/// Shifted quadratic outside [deadband_lo, deadband_hi], zero inside.
struct Deadband {
  double ct_fwd = 0.05;
  double ct_rev = 0.05;
  double deadband_lo = 0.0;
  double deadband_hi = 0.0;
};

/// Piecewise-linear thrust(ω) table, clamped to its end rows.
struct LinearInterp {
  std::vector<std::pair<double, double>> table;  // (omega, thrust)
};

/// Open-water propeller with advance-ratio thrust loss and induced torque.
struct FluidDynamics {
  double rho = 1025.0;
  double diameter = 0.1;
  double kt0_fwd = 0.4;
  double kt0_rev = 0.4;
  double kt_j = 0.3;
  double kq = 0.05;
};

using ThrustGeneration = std::variant<Quadratic, Deadband, LinearInterp, FluidDynamics>;

struct ThrusterState {
  double omega = 0.0;        // rad/s
  double pi_integral = 0.0;  // N·m, MechanicalPI only
  double torque = 0.0;       // last generated torque, load for the next rotor step
};

struct ThrustOutput {
  double thrust = 0.0;  // N
  double torque = 0.0;  // N·m
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void validate(const RotorDynamics& dyn) {
  std::visit(overloaded{
                 [](const ZeroOrder&) {},
                 [](const FirstOrder& m) { require(m.tau > 0, "FirstOrder: tau must be > 0"); },
                 [](const Yoerger& m) {
                   require(m.alpha > 0, "Yoerger: alpha must be > 0");
                   require(m.beta >= 0, "Yoerger: beta must be >= 0");
                 },
                 [](const Bessa& m) {
                   require(m.inertia > 0, "Bessa: inertia must be > 0");
                   require(m.k_linear >= 0 && m.k_quad >= 0, "Bessa: load constants must be >= 0");
                   require(m.k_torque > 0, "Bessa: k_torque must be > 0");
                   require(m.resistance > 0, "Bessa: resistance must be > 0");
                 },
                 [](const MechanicalPI& m) {
                   require(m.inertia > 0, "MechanicalPI: inertia must be > 0");
                   require(m.kp > 0, "MechanicalPI: kp must be > 0");
                   require(m.ki >= 0, "MechanicalPI: ki must be >= 0");
                   require(m.integral_limit > 0, "MechanicalPI: integral_limit must be > 0");
                 },
             },
             dyn);
}

inline void validate(const ThrustGeneration& gen) {
  std::visit(overloaded{
                 [](const Quadratic&) {},
                 [](const Deadband& m) {
                   require(m.deadband_lo <= 0.0 && 0.0 <= m.deadband_hi, "Deadband: require lo <= 0 <= hi");
                 },
                 [](const LinearInterp& m) {
                   require(m.table.size() >= 2, "LinearInterp: table needs at least 2 rows");
                   for (std::size_t i = 1; i < m.table.size(); ++i)
                     require(m.table[i].first > m.table[i - 1].first,
                             "LinearInterp: omega must be strictly increasing");
                 },
                 [](const FluidDynamics& m) {
                   require(m.rho >= 0 && m.diameter > 0, "FluidDynamics: rho >= 0 and diameter > 0 required");
                 },
             },
             gen);
}

/// One classical RK4 step of ẏ = f(y).
template <typename F>
double rk4(double y, double dt, F&& f) {
  const double k1 = f(y);
  const double k2 = f(y + 0.5 * dt * k1);
  const double k3 = f(y + 0.5 * dt * k2);
  const double k4 = f(y + dt * k3);
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline ThrusterState rotor_step(const RotorDynamics& dyn, ThrusterState state, double input, double load_torque,
                                double dt) {
  require(dt > 0.0, "rotor_step: dt must be > 0");
  std::visit(overloaded{
                 [&](const ZeroOrder&) { state.omega = input; },
                 [&](const FirstOrder& m) {
                   state.omega = rk4(state.omega, dt, [&](double w) { return (input - w) / m.tau; });
                 },
                 [&](const Yoerger& m) {
                   state.omega =
                       rk4(state.omega, dt, [&](double w) { return (input - m.beta * w * std::abs(w)) / m.alpha; });
                 },
                 [&](const Bessa& m) {
                   state.omega = rk4(state.omega, dt, [&](double w) {
                     const double motor = (m.k_torque / m.resistance) * (input - m.k_torque * w);
                     return (motor - m.k_linear * w - m.k_quad * w * std::abs(w)) / m.inertia;
                   });
                 },
                 [&](const MechanicalPI& m) {
                   const double error = input - state.omega;
                   state.pi_integral =
                       std::clamp(state.pi_integral + m.ki * error * dt, -m.integral_limit, m.integral_limit);
                   const double integral = state.pi_integral;
                   state.omega = rk4(state.omega, dt, [&](double w) {
                     return (m.kp * (input - w) + integral - load_torque) / m.inertia;
                   });
                 },
             },
             dyn);
  return state;
}

inline ThrustOutput thrust_and_torque(const ThrustGeneration& gen, double omega, double advance_velocity) {
  return std::visit(
      overloaded{
          [&](const Quadratic& m) { return ThrustOutput{m.ct * omega * std::abs(omega), 0.0}; },
          [&](const Deadband& m) {
            if (omega > m.deadband_hi) {
              const double d = omega - m.deadband_hi;
              return ThrustOutput{m.ct_fwd * d * std::abs(d), 0.0};
            }
            if (omega < m.deadband_lo) {
              const double d = omega - m.deadband_lo;
              return ThrustOutput{m.ct_rev * d * std::abs(d), 0.0};
            }
            return ThrustOutput{0.0, 0.0};
          },
          [&](const LinearInterp& m) {
            const auto& tab = m.table;
            if (omega <= tab.front().first) return ThrustOutput{tab.front().second, 0.0};
            if (omega >= tab.back().first) return ThrustOutput{tab.back().second, 0.0};
            const auto it = std::upper_bound(tab.begin(), tab.end(), omega,
                                             [](double w, const auto& row) { return w < row.first; });
            const auto& [w0, f0] = *(it - 1);
            const auto& [w1, f1] = *it;
            if (omega == w0) return ThrustOutput{f0, 0.0};
            return ThrustOutput{f0 + (f1 - f0) * (omega - w0) / (w1 - w0), 0.0};
          },
          [&](const FluidDynamics& m) {
            const double n = omega / (2.0 * kPi);
            const double advance_ratio = std::abs(n) > 1e-6 ? advance_velocity / (n * m.diameter) : 0.0;
            const double kt0 = n >= 0.0 ? m.kt0_fwd : m.kt0_rev;
            const double kt = kt0 - m.kt_j * advance_ratio;
            const double d4 = std::pow(m.diameter, 4);
            return ThrustOutput{m.rho * d4 * kt * n * std::abs(n), m.rho * d4 * m.diameter * m.kq * n * std::abs(n)};
          },
      },
      gen);
}

struct StepResult {
  ThrusterState state;
  double thrust = 0.0;
  double torque = 0.0;
};

/// Rotor step loaded by the previous torque, then thrust at the new speed.
inline StepResult thruster_step(const RotorDynamics& rotor, const ThrustGeneration& gen, const ThrusterState& state,
                                double input, double advance_velocity, double dt) {
  ThrusterState next = rotor_step(rotor, state, input, state.torque, dt);
  const ThrustOutput out = thrust_and_torque(gen, next.omega, advance_velocity);
  next.torque = out.torque;
  return StepResult{next, out.thrust, out.torque};
}

class Thruster {
 public:
  Thruster(RotorDynamics rotor, ThrustGeneration gen) : rotor_(std::move(rotor)), gen_(std::move(gen)) {
    validate(rotor_);
    validate(gen_);
  }

  StepResult step(double input, double advance_velocity, double dt) {
    auto r = thruster_step(rotor_, gen_, state_, input, advance_velocity, dt);
    state_ = r.state;
    thrust_ = r.thrust;
    return r;
  }

  const ThrusterState& state() const { return state_; }
  double thrust() const { return thrust_; }
  const RotorDynamics& rotor() const { return rotor_; }
  const ThrustGeneration& generation() const { return gen_; }

 private:
  RotorDynamics rotor_;
  ThrustGeneration gen_;
  ThrusterState state_;
  double thrust_ = 0.0;
};

/// Two-column CSV (omega, thrust). A non-numeric first line is treated as a header.
inline LinearInterp load_thrust_table(std::istream& in, const std::string& source = "<csv>") {
  LinearInterp out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double w, f;
    if (!(ls >> w >> f)) {
      if (line_no == 1) continue;
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected two numbers");
    }
    out.table.emplace_back(w, f);
  }
  try {
    validate(ThrustGeneration{out});
  } catch (const ContractViolation& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return out;
}

inline LinearInterp load_thrust_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open thrust table '" + path + "'");
  return load_thrust_table(in, path);
}

}  // namespace marsim::thruster
