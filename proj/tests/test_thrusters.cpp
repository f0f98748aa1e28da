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

#include "marsim/thrusters.hpp"

namespace marsim::thruster {
namespace {

double first_order_error(double dt, double horizon) {
  const double tau = 0.5, u = 10.0;
  ThrusterState s;
  double worst = 0;
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int k = 1; k <= n; ++k) {
    s = rotor_step(FirstOrder{tau}, s, u, 0.0, dt);
    worst = std::max(worst, std::abs(s.omega - u * (1 - std::exp(-k * dt / tau))));
  }
  return worst;
}

TEST(RotorStep, ZeroOrderPassThrough) {
  EXPECT_EQ(rotor_step(ZeroOrder{}, ThrusterState{}, 25.0, 0.0, 0.01).omega, 25.0);
}

TEST(RotorStep, FirstOrderClosedForm) {
  ThrusterState s;
  for (int k = 0; k < 500; ++k) s = rotor_step(FirstOrder{0.5}, s, 10.0, 0.0, 1e-3);
  EXPECT_NEAR(s.omega, 10.0 * (1 - std::exp(-1.0)), 1e-6);
  EXPECT_NEAR(s.omega, 6.3212, 1e-4);
}

TEST(RotorStep, Rk4FourthOrderConvergence) {
  for (double dt : {0.2, 0.1, 0.05}) {
    const double ratio = first_order_error(dt, 2.0) / first_order_error(dt / 2, 2.0);
    EXPECT_GE(ratio, 8.0) << "dt " << dt;
    EXPECT_LE(ratio, 32.0);  // approaches 16 as dt shrinks
  }
}

TEST(RotorStep, YoergerSteadyState) {
  ThrusterState s;
  for (int k = 0; k < 20000; ++k) s = rotor_step(Yoerger{0.1, 0.01}, s, 1.0, 0.0, 1e-3);
  EXPECT_NEAR(s.omega, std::sqrt(1.0 / 0.01), 1e-3);
}

TEST(RotorStep, ZeroInputSpinsDown) {
  for (RotorDynamics dyn : {RotorDynamics{Yoerger{0.1, 0.02}}, RotorDynamics{Bessa{0.01, 0.01, 0.001, 0.1, 1.0}}}) {
    ThrusterState s;
    s.omega = -40.0;
    double last = std::abs(s.omega);
    for (int k = 0; k < 5000; ++k) {
      s = rotor_step(dyn, s, 0.0, 0.0, 1e-3);
      ASSERT_LE(std::abs(s.omega), last);
      last = std::abs(s.omega);
    }
  }
}

TEST(RotorStep, BessaSteadyStateBalancesLoad) {
  const Bessa m{0.02, 0.001, 0.0001, 0.05, 0.5};
  ThrusterState s;
  for (int k = 0; k < 100000; ++k) s = rotor_step(m, s, 12.0, 0.0, 1e-3);
  const double w = s.omega;
  const double motor = m.k_torque / m.resistance * (12.0 - m.k_torque * w);
  EXPECT_NEAR(motor, m.k_linear * w + m.k_quad * w * std::abs(w), 1e-9);
}

TEST(RotorStep, PiAntiWindup) {
  const MechanicalPI pi{0.01, 0.05, 2.0, 0.3};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-500, 500);
  ThrusterState s;
  for (int k = 0; k < 20000; ++k) {
    s = rotor_step(pi, s, u(rng), u(rng) * 1e-3, 1e-3);
    ASSERT_LE(std::abs(s.pi_integral), pi.integral_limit);
  }
}

TEST(RotorStep, NonPositiveDtIsContractViolation) {
  EXPECT_THROW(rotor_step(ZeroOrder{}, ThrusterState{}, 1.0, 0.0, 0.0), ContractViolation);
}

TEST(ThrustGeneration, QuadraticOddSymmetry) {
  EXPECT_EQ(thrust_and_torque(Quadratic{0.05}, -10.0, 0).thrust, -5.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-300, 300);
  for (int k = 0; k < 1000; ++k) {
    const double w = u(rng);
    EXPECT_EQ(thrust_and_torque(Quadratic{0.037}, -w, 0).thrust, -thrust_and_torque(Quadratic{0.037}, w, 0).thrust);
  }
}

TEST(ThrustGeneration, DeadbandContinuity) {
  const Deadband db{0.05, 0.03, -2.0, 2.0};
  EXPECT_EQ(thrust_and_torque(db, 1.5, 0).thrust, 0.0);
  EXPECT_EQ(thrust_and_torque(db, 2.0, 0).thrust, 0.0);
  EXPECT_EQ(thrust_and_torque(db, -2.0, 0).thrust, 0.0);
  EXPECT_NEAR(thrust_and_torque(db, 2.0 + 1e-9, 0).thrust, 0.0, 1e-15);
  EXPECT_NEAR(thrust_and_torque(db, -2.0 - 1e-9, 0).thrust, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(thrust_and_torque(db, 12.0, 0).thrust, 0.05 * 100);
  EXPECT_DOUBLE_EQ(thrust_and_torque(db, -12.0, 0).thrust, -0.03 * 100);
}

TEST(ThrustGeneration, LinearInterpNodesAndClamp) {
  const LinearInterp tab{{{-50, -10}, {0, 0}, {100, 40}}};
  EXPECT_EQ(thrust_and_torque(tab, 50, 0).thrust, 20.0);
  for (const auto& [w, f] : tab.table) EXPECT_EQ(thrust_and_torque(tab, w, 0).thrust, f);
  EXPECT_EQ(thrust_and_torque(tab, 1000, 0).thrust, 40.0);
  EXPECT_EQ(thrust_and_torque(tab, -1000, 0).thrust, -10.0);
}

TEST(ThrustGeneration, FluidDynamicsStaticAndAdvance) {
  const FluidDynamics fd{1025.0, 0.1, 0.4, 0.3, 0.5, 0.05};
  const double w = 2 * kPi * 20;  // 20 rev/s
  const auto stat = thrust_and_torque(fd, w, 0.0);
  EXPECT_NEAR(stat.thrust, 1025.0 * 1e-4 * 0.4 * 400, 1e-9);
  EXPECT_NEAR(stat.torque, 1025.0 * 1e-5 * 0.05 * 400, 1e-12);
  // J = 1/(20·0.1) = 0.5 → KT = 0.4 − 0.25
  EXPECT_NEAR(thrust_and_torque(fd, w, 1.0).thrust, 1025.0 * 1e-4 * 0.15 * 400, 1e-9);
  // reverse uses kt0_rev
  EXPECT_NEAR(thrust_and_torque(fd, -w, 0.0).thrust, -1025.0 * 1e-4 * 0.3 * 400, 1e-9);
  // near-zero speed: J guarded to 0, thrust finite
  const auto tiny = thrust_and_torque(fd, 1e-9, 5.0);
  EXPECT_TRUE(std::isfinite(tiny.thrust));
  // non-FluidDynamics variants produce no torque
  EXPECT_EQ(thrust_and_torque(Quadratic{}, 30, 0).torque, 0.0);
}

TEST(ThrusterStep, ZeroOrderQuadraticImmediate) {
  Thruster t(ZeroOrder{}, Quadratic{0.05});
  EXPECT_EQ(t.step(10.0, 0.0, 0.01).thrust, 5.0);
}

TEST(ThrusterStep, FirstOrderApproachesFromBelow) {
  Thruster t(FirstOrder{0.2}, Quadratic{0.05});
  double last = 0;
  for (int k = 0; k < 3000; ++k) {
    const double f = t.step(10.0, 0.0, 1e-3).thrust;
    ASSERT_GE(f, last);
    ASSERT_LE(f, 0.05 * 100);
    last = f;
  }
  EXPECT_NEAR(last, 5.0, 1e-3);
}

TEST(ThrusterStep, MechanicalPiReachesSetpoint) {
  Thruster t(MechanicalPI{0.01, 0.05, 0.5, 5.0}, Quadratic{0.05});
  for (int k = 0; k < 60000; ++k) t.step(10.0, 0.0, 1e-3);
  EXPECT_NEAR(t.state().omega, 10.0, 1e-3);
}

TEST(ThrusterStep, MechanicalPiRejectsPropellerLoad) {
  Thruster t(MechanicalPI{0.01, 0.05, 0.5, 5.0}, FluidDynamics{1025.0, 0.05, 0.4, 0.4, 0.3, 0.05});
  for (int k = 0; k < 60000; ++k) t.step(10.0, 0.0, 1e-3);
  EXPECT_NEAR(t.state().omega, 10.0, 1e-3);
  EXPECT_GT(t.state().torque, 0.0);
}

TEST(ThrusterStep, EveryPairComposes) {
  const std::vector<RotorDynamics> rotors{ZeroOrder{}, FirstOrder{}, Yoerger{}, Bessa{}, MechanicalPI{}};
  const std::vector<ThrustGeneration> gens{Quadratic{}, Deadband{0.05, 0.05, -1, 1}, LinearInterp{{{0, 0}, {10, 1}}},
                                           FluidDynamics{}};
  for (const auto& r : rotors) {
    for (const auto& g : gens) {
      Thruster t(r, g);
      for (int k = 0; k < 100; ++k) t.step(5.0, 0.1, 1e-3);
      EXPECT_TRUE(std::isfinite(t.thrust()));
    }
  }
}

TEST(ThrustTable, LoadsCsvWithHeader) {
  std::istringstream csv("omega,thrust\n0,0\n100,40\n");
  const auto tab = load_thrust_table(csv);
  ASSERT_EQ(tab.table.size(), 2u);
  EXPECT_EQ(thrust_and_torque(tab, 50, 0).thrust, 20.0);
  std::istringstream bad("0,0\n5,1\n3,2\n");
  EXPECT_THROW(load_thrust_table(bad), ConfigError);
  std::istringstream junk("0,0\nabc\n");
  EXPECT_THROW(load_thrust_table(junk), ConfigError);
}

}  // namespace
}  // namespace marsim::thruster
