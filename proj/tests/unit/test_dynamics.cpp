#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "ssam/analysis.hpp"
#include "ssam/dynamics.hpp"

using namespace ssam;

namespace {

const ModelSpec kScalar({3.14159}, 2, 0.5);

NetworkParams point(double a, double b) { return NetworkParams::from_rows({{a}, {b}}); }

}  // namespace

TEST(StepSchedule, ConstantAndHarmonic) {
  EXPECT_EQ(StepSchedule::constant(0.1).at(7), 0.1);
  EXPECT_DOUBLE_EQ(StepSchedule::harmonic(0.1).at(0), 0.1);
  EXPECT_DOUBLE_EQ(StepSchedule::harmonic(0.1).at(9), 0.01);
  EXPECT_TRUE(StepSchedule::harmonic(1).square_summable());
  EXPECT_FALSE(StepSchedule::constant(1).square_summable());
  EXPECT_THROW(StepSchedule::constant(0).validate(), ContractViolation);
}

TEST(RecordClock, DenseThenGeometricThenCheckpoints) {
  detail::RecordClock clock(RecordPolicy{3, 2.0, 50});
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k <= 120; ++k) {
    if (clock.should_record(k, 120)) kept.push_back(k);
  }
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 1, 2, 3, 4, 8, 16, 32, 50, 64, 100, 120}));
}

TEST(GradientFlow, DepthTwoGapDecaysExactly) {
  FlowOptions opt;
  opt.record = RecordPolicy::every_step();
  const Trajectory tr = gradient_flow(point(2.0, 0.3), kScalar, 5.0, 1e-4, opt);
  ASSERT_EQ(tr.size(), 50001u);
  for (std::size_t i = 0; i < tr.size(); i += 2500) {
    EXPECT_NEAR(tr.gaps[i][0], tr.gaps[0][0] * std::exp(-tr.times[i]), 1e-10);
  }
  EXPECT_DOUBLE_EQ(tr.times.back(), 5.0);
  const GapBoundReport audit = gap_bound_audit(tr, 1e-8);
  EXPECT_TRUE(audit.pass);
  EXPECT_LE(audit.max_increase, 1e-12);
}

TEST(GradientFlow, DeeperGapsStayBelowBound) {
  const ModelSpec m({2.0, -1.0}, 3, 0.7);
  const NetworkParams init = NetworkParams::from_rows({{1.2, 0.1}, {0.3, -0.8}, {0.9, 0.5}});
  const double dt = std::min(1e-3, flow_dt_guard(init, m));
  const Trajectory tr = gradient_flow(init, m, 3.0, dt);
  EXPECT_TRUE(gap_bound_audit(tr, 1e-8).pass);
}

TEST(GradientFlow, GuardsStepSize) {
  const double guard = flow_dt_guard(point(1.0, 1.0), kScalar);
  EXPECT_THROW(gradient_flow(point(1.0, 1.0), kScalar, 1.0, 2 * guard), ContractViolation);
  EXPECT_THROW(gradient_flow(point(1.0, 1.0), kScalar, -1.0, 1e-4), ContractViolation);
}

TEST(GradientFlow, ZeroInitIsStationary) {
  const Trajectory tr = gradient_flow(kScalar.zero_params(), kScalar, 1.0, 1e-4);
  for (const auto& s : tr.states) EXPECT_EQ(s.squared_norm(), 0.0);
}

TEST(GradientDescent, RejectsStepAboveCap) {
  const NetworkParams init = point(0.1, 0.1);
  const double cap = step_size_cap(init, kScalar, 0.5);
  EXPECT_THROW(gradient_descent(init, kScalar, StepSchedule::constant(cap), 10, 0.5), ContractViolation);
  EXPECT_NO_THROW(gradient_descent(init, kScalar, StepSchedule::constant(0.99 * cap), 10, 0.5));
}

TEST(GradientDescent, CompliantRunSatisfiesStrongDescent) {
  const NetworkParams init = point(0.1, 0.1);
  DescentOptions opt;
  opt.record = RecordPolicy::every_step();
  const DescentRun run =
      gradient_descent(init, kScalar, StepSchedule::constant(0.9 * step_size_cap(init, kScalar, 0.5)), 5000, 0.5, opt);
  EXPECT_EQ(run.summary.margin_violations, 0u);
  EXPECT_EQ(run.summary.coercivity_violations, 0u);
  const StrongDescentReport audit = strong_descent_audit(run.trajectory, 0.5);
  EXPECT_TRUE(audit.pass);
  EXPECT_EQ(audit.margins.size(), 5000u);
}

TEST(GradientDescent, OversizedStepViolatesStrongDescent) {
  const NetworkParams init = point(1.8, 1.8);
  DescentOptions opt;
  opt.record = RecordPolicy::every_step();
  opt.enforce_step_cap = false;
  const DescentRun run =
      gradient_descent(init, kScalar, StepSchedule::constant(10 * step_size_cap(init, kScalar, 0.5)), 500, 0.5, opt);
  EXPECT_GT(run.summary.margin_violations, 0u);
  EXPECT_FALSE(strong_descent_audit(run.trajectory, 0.5).pass);
}

TEST(GradientDescent, ZeroInitIsStationary) {
  const DescentRun run = gradient_descent(kScalar.zero_params(), kScalar, StepSchedule::constant(1e-3), 100, 0.5);
  EXPECT_EQ(run.trajectory.final_state().squared_norm(), 0.0);
  EXPECT_EQ(run.summary.min_margin, 0.0);
}

TEST(GradientDescent, BalancingCapsGolden) {
  const BalancingStepCaps caps = balancing_step_caps(kScalar.zero_params(), kScalar);
  EXPECT_DOUBLE_EQ(caps.inverse_rate, 4.0);
  EXPECT_NEAR(caps.loss_ratio, 0.00629273539571888147748629228099, 1e-17);
  EXPECT_NEAR(caps.stability, 0.00000717089066527588459901135156543, 1e-19);
  EXPECT_DOUBLE_EQ(caps.min(), caps.stability);
}

TEST(GradientDescent, CertifiedRunObeysProductBound) {
  const NetworkParams init = point(0.8, 0.2);
  const double alpha = 0.9 * balancing_step_caps(init, kScalar).min();
  DescentOptions opt;
  opt.certify_balancing = true;
  const DescentRun run = gradient_descent(init, kScalar, StepSchedule::constant(alpha), 20000, 0.5, opt);
  EXPECT_TRUE(gap_bound_audit(run.trajectory, 1e-10).pass);
  opt.record = RecordPolicy{};
  EXPECT_THROW(gradient_descent(init, kScalar, StepSchedule::constant(2 * alpha / 0.9), 10, 0.5, opt),
               ContractViolation);
}

TEST(GradientDescent, UnregularizedReachesHyperbola) {
  const ModelSpec u = ModelSpec::unregularized({3.14159}, 2);
  const DescentRun run = gradient_descent(point(3.0, 0.5), u, StepSchedule::constant(0.01), 20000, 0.5);
  const auto& w = run.trajectory.final_state();
  EXPECT_NEAR(w(0, 0) * w(1, 0), 3.14159, 1e-9);
  // the unregularized flow conserves w1^2 - w2^2, GD nearly so
  EXPECT_NEAR(run.trajectory.gaps.back()[0], 8.75, 0.2);
}

TEST(Ssam, DeterministicPerSeed) {
  const WhitenedDataset ds = generate_whitened(50, kScalar, 3);
  const auto a = ssam::ssam(point(1.0, 0.5), kScalar, ds, StepSchedule::constant(0.01), 2000, 77);
  const auto b = ssam::ssam(point(1.0, 0.5), kScalar, ds, StepSchedule::constant(0.01), 2000, 77);
  const auto c = ssam::ssam(point(1.0, 0.5), kScalar, ds, StepSchedule::constant(0.01), 2000, 78);
  EXPECT_EQ(a.trajectory.final_state(), b.trajectory.final_state());
  EXPECT_NE(a.trajectory.final_state(), c.trajectory.final_state());
}

TEST(Ssam, ZeroInitStationaryWithoutNoise) {
  const ModelSpec u = ModelSpec::unregularized({3.14159}, 2);
  const WhitenedDataset ds = generate_whitened(20, u, 1);
  const auto run = ssam::ssam(u.zero_params(), u, ds, StepSchedule::constant(0.01), 500, 5);
  EXPECT_EQ(run.trajectory.final_state().squared_norm(), 0.0);
}

TEST(Ssam, DivergenceIsReported) {
  const WhitenedDataset ds = generate_whitened(50, kScalar, 3);
  try {
    ssam::ssam(point(3.0, 3.0), kScalar, ds, StepSchedule::constant(5.0), 1000, 1);
    FAIL() << "expected divergence";
  } catch (const TrajectoryError& e) {
    EXPECT_GT(e.step(), 0);
    EXPECT_TRUE(e.last_finite_state().all_finite());
  }
}

TEST(ProjectedSsam, StaysInsideBall) {
  const WhitenedDataset ds = generate_whitened(100, kScalar, 4);
  const double radius = minimal_projection_radius(kScalar);
  EXPECT_NEAR(radius, 4.44287918541569167436489727909, 1e-14);
  StochasticOptions opt;
  opt.record = RecordPolicy::every_step();
  const auto run = projected_ssam(point(4.0, 2.0), kScalar, ds, StepSchedule::harmonic(0.5), 20000, radius, 9, opt);
  EXPECT_FALSE(run.radius_below_bound);
  for (const auto& s : run.trajectory.states) EXPECT_LE(s.norm(), radius * (1 + 1e-12));
  EXPECT_GT(run.trajectory.projection_count, 0u);
}

TEST(ProjectedSsam, RequiresHarmonicScheduleAndFlagsSmallRadius) {
  const WhitenedDataset ds = generate_whitened(100, kScalar, 4);
  EXPECT_THROW(projected_ssam(point(1, 1), kScalar, ds, StepSchedule::constant(0.01), 10, 5.0, 1), ContractViolation);
  const auto run = projected_ssam(point(1, 1), kScalar, ds, StepSchedule::harmonic(0.1), 10, 1.0, 1);
  EXPECT_TRUE(run.radius_below_bound);
}

TEST(TrajectoryCsv, HeaderAndWeightElision) {
  const Trajectory tr = gradient_flow(point(1.0, 0.5), kScalar, 0.01, 1e-4);
  std::ostringstream out;
  write_trajectory_csv(out, tr, kScalar);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,time,loss_L,reg_R,loss_LR,grad_norm,gap_1,projected,w_1_1,w_2_1");
  std::ostringstream elided;
  write_trajectory_csv(elided, tr, kScalar, 1);
  EXPECT_EQ(elided.str().substr(0, elided.str().find('\n')), "step,time,loss_L,reg_R,loss_LR,grad_norm,gap_1,projected");
}
