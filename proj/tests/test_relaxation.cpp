#include <gtest/gtest.h>

#include "nlsr/relaxation.hpp"
#include "nlsr/verify.hpp"

using namespace nlsr;

namespace {

SpectralState mode(const GridPtr& g, int k, cplx a) {
  SpectralState s(g);
  s.at_mode(k) = a;
  return s;
}

MethodSpec method(const char* name) { return *lookup_method(name); }

} // namespace

TEST(Gamma, WorkedExamples) {
  const auto g = make_grid(16);
  const SpectralState v = mode(g, 1, 1.0);
  const double m0 = l2_norm(v);
  // inc = -2v lands on the sphere already
  EXPECT_NEAR(compute_gamma(v, v * cplx{-2.0, 0.0}, m0), 1.0, 1e-15);
  // inc orthogonal to v: only gamma = 0 keeps the mass
  EXPECT_NEAR(compute_gamma(v, mode(g, 2, {0.0, 0.3}), m0), 0.0, 1e-14);
  // inc = -v: gamma = 2 (reflection through the origin)
  EXPECT_NEAR(compute_gamma(v, v * cplx{-1.0, 0.0}, m0), 2.0, 1e-15);
  // rotation-like increment i eps v: ||v + gamma i eps v||^2 = m0^2 (1 + gamma^2 eps^2) forces gamma = 0
  EXPECT_NEAR(compute_gamma(v, v * cplx{0.0, 0.1}, m0), 0.0, 1e-14);
}

TEST(Gamma, ZeroIncrementGivesOne) {
  const auto g = make_grid(16);
  const SpectralState v = mode(g, 1, 1.0);
  const auto r = compute_gamma_detailed(v, SpectralState(g), l2_norm(v));
  EXPECT_EQ(r.gamma, 1.0);
  EXPECT_EQ(r.denominator, 0.0);
  const auto tiny = compute_gamma_detailed(v, mode(g, 3, 1e-16), l2_norm(v));
  EXPECT_EQ(tiny.gamma, 1.0);
  EXPECT_THROW(compute_gamma(v, v, 0.0), ConfigError);
}

// With a drifted current norm, the anchored coefficient scales the drift by
// (1 - gamma): ||v + gamma inc||^2 - m0^2 = (1 - gamma)(||v||^2 - m0^2).
TEST(Gamma, AnchoringDampsDrift) {
  const auto g = make_grid(64);
  const auto v = detail::random_state(g, 2);
  const double n = l2_norm(v);
  const double m0 = (1.0 + 1e-9) * n;
  SpectralState inc = detail::random_state(g, 3) * cplx{0.05, 0.0};
  inc -= v * cplx{0.0, 0.02};
  const double gamma = compute_gamma(v, inc, m0);
  const double after = l2_norm(v + inc * cplx{gamma, 0.0});
  EXPECT_NEAR(after * after - m0 * m0, (1.0 - gamma) * (n * n - m0 * m0), 1e-12 * m0 * m0);
}

TEST(RelaxedStep, RejectsInadmissibleGamma) {
  const auto g = make_grid(16);
  const SpectralState v = mode(g, 1, 1.0);
  try {
    detail::relax(v, mode(g, 2, 0.3), 0.5, 0.1, l2_norm(v), false);
    FAIL() << "expected RelaxationFailure";
  } catch (const RelaxationFailure& e) {
    EXPECT_NEAR(e.gamma(), 0.0, 1e-14);
    EXPECT_EQ(e.time(), 0.5);
  }
  EXPECT_THROW(detail::relax(v, v * cplx{-1.0, 0.0}, 0.0, 0.1, l2_norm(v), false), RelaxationFailure);
}

TEST(RelaxedStep, AdvancesClockByGammaTau) {
  const auto g = make_grid(64);
  const auto u = rough_data(g, 2.0, 1);
  const StepKernel k{KernelId::LRI1, {}, {}};
  const auto s = relaxed_step_v(u, 0.0, 0.01, k, l2_norm(u));
  EXPECT_DOUBLE_EQ(s.t_next, s.gamma * 0.01);
  EXPECT_NEAR(l2_norm(s.state), l2_norm(u), 1e-14);
  const auto su = rlri_u_step(u, 0.0, 0.01, k, l2_norm(u));
  EXPECT_NEAR(l2_norm(su.state), l2_norm(u), 1e-14);
  EXPECT_THROW(rlri_u_step(u, 0.0, 0.01, StepKernel{KernelId::STRANG, {}, {}}, 1.0), ConfigError);
}

class MassConservation : public ::testing::TestWithParam<const char*> {};

TEST_P(MassConservation, EveryStepKeepsInitialMass) {
  const auto g = make_grid(256);
  const auto u0 = rough_data(g, 2.0, 42);
  const Trajectory traj = integrate(method(GetParam()), u0, 2.0, 0.02);
  EXPECT_LE(traj.max_mass_rel_err(), 1e-13);
  EXPECT_EQ(traj.final_time, 2.0);
  for (const auto& s : traj.steps) {
    EXPECT_GT(s.gamma, 0.0);
    EXPECT_LT(s.gamma, 2.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Relaxed, MassConservation, ::testing::Values("RLRI1-v", "RLRI2-v", "RLRI-u"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::erase(s, '-');
                           return s;
                         });

TEST(Integrate, UnrelaxedLri1DriftsInMass) {
  const auto g = make_grid(256);
  const Trajectory traj = integrate(method("LRI1"), rough_data(g, 2.0, 42), 1.0, 0.02);
  EXPECT_GT(traj.max_mass_rel_err(), 1e-10);
  EXPECT_EQ(traj.steps.size(), 50u);
}

TEST(Integrate, PinnedGammaReproducesUnrelaxedScheme) {
  const auto g = make_grid(128);
  const auto u0 = rough_data(g, 3.0, 5);
  IntegrateOptions o;
  o.force_unit_gamma = true;
  const Trajectory pinned = integrate(method("RLRI1-v"), u0, 0.5, 0.01, o);
  const Trajectory plain = integrate(method("LRI1"), u0, 0.5, 0.01);
  EXPECT_LT(l2_norm(pinned.final_state - plain.final_state), 1e-13);
  for (const auto& s : pinned.steps) EXPECT_EQ(s.gamma, 1.0);
}

TEST(Integrate, EndpointLandsExactlyOnT) {
  const auto g = make_grid(128);
  const auto u0 = rough_data(g, 2.0, 9);
  for (const char* name : {"RLRI1-v", "RLRI2-v", "RLRI-u", "LRI1", "Strang"})
    for (double tau : {0.03, 0.1, 0.07}) {
      const Trajectory traj = integrate(method(name), u0, 1.0, tau);
      EXPECT_EQ(traj.final_time, 1.0) << name;
      EXPECT_EQ(traj.steps.back().t_end, 1.0);
      for (std::size_t i = 1; i < traj.steps.size(); ++i) EXPECT_EQ(traj.steps[i].t_start, traj.steps[i - 1].t_end);
      EXPECT_TRUE(traj.steps.back().completion || std::abs(traj.steps.back().t_start + tau - 1.0) < 1e-12);
    }
}

TEST(Integrate, RelaxedCompletionKeepsMass) {
  const auto g = make_grid(128);
  const auto u0 = rough_data(g, 2.0, 9);
  const Trajectory traj = integrate(method("RLRI1-v"), u0, 1.0, 0.07);
  EXPECT_TRUE(traj.steps.back().completion);
  EXPECT_LE(traj.steps.back().mass_rel_err, 1e-13);

  IntegrateOptions o;
  o.endpoint = EndpointPolicy::Unrelaxed;
  const Trajectory un = integrate(method("RLRI1-v"), u0, 1.0, 0.07, o);
  EXPECT_EQ(un.final_time, 1.0);
  EXPECT_EQ(un.steps.back().gamma, 1.0);
  // the two completions differ only by the last step
  EXPECT_LT(l2_norm(un.final_state - traj.final_state), 1e-2);
}

TEST(Integrate, SnapshotsAtFirstStepPastRequest) {
  const auto g = make_grid(64);
  IntegrateOptions o;
  o.snapshot_times = {0.05, 0.5, 1.0};
  const Trajectory traj = integrate(method("RLRI1-v"), smooth_data(g), 1.0, 0.02, o);
  ASSERT_EQ(traj.snapshots.size(), 3u);
  for (const auto& s : traj.snapshots) {
    EXPECT_GE(s.time, s.requested_time);
    EXPECT_LT(s.time - s.requested_time, 0.03);
  }
  EXPECT_EQ(traj.snapshots.back().time, 1.0);
  EXPECT_LT(l2_norm(traj.snapshots.back().u - traj.final_state), 1e-15);
}

TEST(Integrate, DGammaShrinksWithTau) {
  const auto g = make_grid(128);
  const auto u0 = smooth_data(g);
  const double a = integrate(method("RLRI1-v"), u0, 1.0, 0.02).d_gamma();
  const double b = integrate(method("RLRI1-v"), u0, 1.0, 0.01).d_gamma();
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(a / b, 2.0, 0.3);
}

TEST(Integrate, ArgumentValidation) {
  const auto g = make_grid(16);
  const auto u0 = smooth_data(g);
  EXPECT_THROW(integrate(method("LRI1"), u0, 0.0, 0.1), ConfigError);
  EXPECT_THROW(integrate(method("LRI1"), u0, 1.0, 2.0), ConfigError);
  EXPECT_THROW(integrate(method("LRI1"), SpectralState(g), 1.0, 0.1), ConfigError);
}

TEST(Integrate, BlowUpGuardTrips) {
  const auto g = make_grid(64);
  IntegrateOptions o;
  o.blowup_limit = 1.5;
  const auto u0 = smooth_data(g) * cplx{1.4, 0.0}; // H1 norm already above the limit after one step
  EXPECT_THROW(integrate(method("LRI1"), u0, 1.0, 0.1, o), NumericError);
}

TEST(Integrate, CoarseStepOnLargeDataFailsLoudly) {
  const auto g = make_grid(256);
  const auto u0 = rough_data(g, 2.0, 1) * cplx{30.0, 0.0};
  EXPECT_THROW(integrate(method("RLRI1-v"), u0, 1.0, 0.5), NumericError);
}
