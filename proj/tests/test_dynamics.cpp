#include <gtest/gtest.h>

#include <cmath>

#include "cavsim/dynamics.hpp"
#include "cavsim/error.hpp"

using namespace cavsim;

namespace {

VehicleState run_steps(double command, ActuationBuffer& buf, VehicleState s, int n) {
  for (int i = 0; i < n; ++i) s = dynamics_step(command, buf, s);
  return s;
}

}  // namespace

TEST(Dynamics, UnityDcGain) {
  ActuationBuffer buf(DynamicsParams{}, 0.1);
  const VehicleState s = run_steps(1.5, buf, {0.0, 10.0, 0.0, 0}, 200);
  EXPECT_NEAR(s.accel, 1.5, 1e-9);
}

TEST(Dynamics, UniformMotionIsExact) {
  ActuationBuffer buf(DynamicsParams{}, 0.1);
  const VehicleState s = run_steps(0.0, buf, {100.0, 20.0, 0.0, 1}, 50);
  EXPECT_DOUBLE_EQ(s.speed, 20.0);
  EXPECT_NEAR(s.position, 200.0, 1e-9);
  EXPECT_EQ(s.lane, 1);
}

TEST(Dynamics, StepResponseAfterDelayPlusTimeConstant) {
  ActuationBuffer buf(DynamicsParams{0.5, 0.3}, 0.1);
  VehicleState s{0.0, 10.0, 0.0, 0};
  // t_d + tau = 0.8 s = 8 steps.
  s = run_steps(1.0, buf, s, 8);
  EXPECT_NEAR(s.accel, 1.0 - std::exp(-1.0), 0.02);
}

TEST(Dynamics, DelayIsExactStepCount) {
  ActuationBuffer buf(DynamicsParams{0.5, 0.3}, 0.1);
  ASSERT_EQ(buf.delay_steps(), 3u);
  VehicleState s{0.0, 10.0, 0.0, 0};
  for (int i = 0; i < 3; ++i) {
    s = dynamics_step(2.0, buf, s);
    EXPECT_EQ(s.accel, 0.0) << i;
  }
  s = dynamics_step(2.0, buf, s);
  EXPECT_GT(s.accel, 0.0);
  EXPECT_DOUBLE_EQ(s.accel, 2.0 * (1.0 - std::exp(-0.2)));
}

TEST(Dynamics, ZeroLagZeroDelayIsInstantaneous) {
  ActuationBuffer buf(DynamicsParams{0.0, 0.0}, 0.1);
  const VehicleState s = dynamics_step(-1.0, buf, {0.0, 10.0, -1.0, 0});
  EXPECT_DOUBLE_EQ(s.accel, -1.0);
  EXPECT_DOUBLE_EQ(s.speed, 9.9);
  EXPECT_DOUBLE_EQ(s.position, 0.5 * (10.0 + 9.9) * 0.1);
}

TEST(Dynamics, ClampsAtStandstill) {
  ActuationBuffer buf(DynamicsParams{0.0, 0.0}, 0.1);
  VehicleState s{0.0, 0.3, -8.0, 0};
  s = dynamics_step(-8.0, buf, s);
  EXPECT_EQ(s.speed, 0.0);
  EXPECT_GE(s.accel, 0.0);
  EXPECT_NEAR(s.position, 0.3 * 0.3 / 16.0, 1e-12);
  for (int i = 0; i < 10; ++i) {
    s = dynamics_step(-8.0, buf, s);
    EXPECT_EQ(s.speed, 0.0);
  }
}

TEST(Dynamics, ConvergesToContinuousSolutionAtFirstOrder) {
  // Continuous reference for a unit step with no delay:
  // a = 1 - e^{-t/tau}, v = t - tau (1 - e^{-t/tau}).
  const double tau = 0.5, t_end = 4.0;
  const auto speed_error = [&](double dt) {
    ActuationBuffer buf(DynamicsParams{tau, 0.0}, dt);
    VehicleState s{};
    const int n = static_cast<int>(std::lround(t_end / dt));
    s = run_steps(1.0, buf, s, n);
    return std::abs(s.speed - (t_end - tau * (1.0 - std::exp(-t_end / tau))));
  };
  const double coarse = speed_error(0.1), fine = speed_error(0.05);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(coarse, 0.1 * 1.0);
}

TEST(Dynamics, RejectsFractionalDelay) {
  EXPECT_THROW(ActuationBuffer(DynamicsParams{0.5, 0.25}, 0.1), ConfigError);
  EXPECT_THROW(ActuationBuffer(DynamicsParams{-0.1, 0.3}, 0.1), ConfigError);
  EXPECT_NO_THROW(ActuationBuffer(DynamicsParams{0.5, 0.3}, 0.05));
}
