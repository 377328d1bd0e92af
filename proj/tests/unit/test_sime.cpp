#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "rtsc/scenario.hpp"
#include "rtsc/sime.hpp"
#include "test_util.hpp"

using namespace rtsc;
using rtsc::testing::case9;
using rtsc::testing::smib;

namespace {

OperatingPoint case_point(const NetworkCase& c) {
  OperatingPoint op;
  for (const auto& g : c.generators) op.pg_mw.push_back(g.pg);
  op.wind_mw = forecast(c);
  return op;
}

FaultEvent fault(int bus, int trip, double t_clear) {
  FaultEvent e;
  e.id = "F";
  e.fault_bus = bus;
  e.trip_line = trip;
  e.t_clear = t_clear;
  return e;
}

// Single machine against an infinite bus, integrated with RK4 from (d0, w0).
constexpr double kM = 6.0 / 377.0, kPm = 0.8, kPmax = 1.5;

OmibTrajectory synthetic_omib(double d0, double w0, double dt, double horizon) {
  OmibTrajectory o;
  o.m = kM;
  auto acc = [](double d) { return (kPm - kPmax * std::sin(d)) / kM; };
  double d = d0, w = w0;
  const auto n = static_cast<std::size_t>(std::llround(horizon / dt)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    o.t.push_back(dt * static_cast<double>(k));
    o.delta.push_back(d);
    o.omega.push_back(w);
    o.pm.push_back(kPm);
    o.pe.push_back(kPmax * std::sin(d));
    o.pa.push_back(kPm - o.pe.back());
    const double k1d = w, k1w = acc(d);
    const double k2d = w + 0.5 * dt * k1w, k2w = acc(d + 0.5 * dt * k1d);
    const double k3d = w + 0.5 * dt * k2w, k3w = acc(d + 0.5 * dt * k2d);
    const double k4d = w + dt * k3w, k4w = acc(d + dt * k3d);
    d += dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
    w += dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
  }
  o.post_pe = [](std::size_t, double x) { return kPmax * std::sin(x); };
  return o;
}

// Decelerating area from d0 to the unstable equilibrium.
double decel_area(double d0) {
  const double du = kPi - std::asin(kPm / kPmax);
  return kPmax * (std::cos(d0) - std::cos(du)) - kPm * (du - d0);
}

}  // namespace

TEST(Grouping, SplitsAtLargestGap) {
  const auto g = identify_critical_machines(Eigen::Vector4d(0.1, 0.15, 1.4, 1.5));
  EXPECT_EQ(g.critical, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(g.noncritical, (std::vector<std::size_t>{0, 1}));
  const auto h = identify_critical_machines(Eigen::Vector3d(2.0, -1.0, 0.0));
  EXPECT_EQ(h.critical, (std::vector<std::size_t>{0}));
  EXPECT_THROW(identify_critical_machines(Eigen::Vector3d(0.3, 0.3, 0.3)), SimeError);
  EXPECT_THROW(identify_critical_machines(Eigen::VectorXd::Zero(1)), SimeError);
}

TEST(Omib, TwoMachineHandFormulas) {
  const auto c = smib();
  SimConfig cfg;
  cfg.horizon = 1.0;
  const auto tr = run_tds(c, case_point(c), fault(1, 2, 0.1), cfg);
  const auto o = build_omib(tr, {{0}, {1}});
  const double ws = tr.omega_s();
  const double m1 = 2.0 * tr.h(0) / ws, m2 = 2.0 * tr.h(1) / ws;
  EXPECT_NEAR(o.m, m1 * m2 / (m1 + m2), 1e-15);
  for (std::size_t k = 0; k < tr.steps(); k += 97) {
    const auto kk = static_cast<Eigen::Index>(k);
    EXPECT_NEAR(o.delta[k], tr.delta(kk, 0) - tr.delta(kk, 1), 1e-12);
    EXPECT_NEAR(o.omega[k], ws * (tr.omega(kk, 0) - tr.omega(kk, 1)), 1e-9);
    EXPECT_NEAR(o.pe[k], o.m * (tr.pe(kk, 0) / m1 - tr.pe(kk, 1) / m2), 1e-12);
  }
  EXPECT_THROW(build_omib(tr, {{0, 1}, {}}), SimeError);
}

TEST(Omib, AcceleratingPowerAggregates) {
  const auto c = case9();
  SimConfig cfg;
  cfg.horizon = 1.0;
  const auto tr = run_tds(c, case_point(c), fault(8, 8, 0.1), cfg);
  const MachineGrouping grp{{1}, {0, 2}};
  const auto o = build_omib(tr, grp);
  const double ws = tr.omega_s();
  double mc = 0.0, mn = 0.0;
  for (auto i : grp.critical) mc += 2.0 * tr.h(i) / ws;
  for (auto i : grp.noncritical) mn += 2.0 * tr.h(i) / ws;
  for (std::size_t k = 0; k < tr.steps(); k += 50) {
    const auto kk = static_cast<Eigen::Index>(k);
    double pac = 0.0, pan = 0.0;
    for (auto i : grp.critical) pac += tr.pm(i) - tr.pe(kk, i);
    for (auto i : grp.noncritical) pan += tr.pm(i) - tr.pe(kk, i);
    EXPECT_NEAR(o.pa[k], o.m * (pac / mc - pan / mn), 1e-10);
  }
}

TEST(Omib, RigidRotationPowerMatchesRecordedPower) {
  // Rotating by zero reproduces the post-fault electrical power less damping.
  const auto c = case9();
  SimConfig cfg;
  cfg.horizon = 1.0;
  const auto tr = run_tds(c, case_point(c), fault(8, 8, 0.1), cfg);
  const auto o = build_omib(tr, {{1}, {0, 2}});
  ASSERT_TRUE(static_cast<bool>(o.post_pe));
  const double ws = tr.omega_s();
  const double m0 = 2.0 * tr.h(0) / ws, m1 = 2.0 * tr.h(1) / ws, m2 = 2.0 * tr.h(2) / ws;
  for (std::size_t k = tr.k_clear + 1; k < tr.steps(); k += 50) {
    const auto kk = static_cast<Eigen::Index>(k);
    auto damp = [&](std::size_t g) { return c.generators[g].d * tr.omega(kk, static_cast<Eigen::Index>(g)); };
    const double pd = o.m * (damp(1) / m1 - (damp(0) + damp(2)) / (m0 + m2));
    EXPECT_NEAR(o.post_pe(k, o.delta[k]), o.pe[k] - pd, 1e-8);
  }
}

TEST(Margin, StableSwingEqualsRemainingArea) {
  const double w0 = 2.0;
  const auto m = compute_margin(synthetic_omib(1.0, w0, 1e-4, 1.0));
  EXPECT_EQ(m.cls, MarginClass::Stable);
  EXPECT_NEAR(m.eta, decel_area(1.0) - 0.5 * kM * w0 * w0, 1e-6);
  EXPECT_NEAR(m.delta_u, kPi - std::asin(kPm / kPmax), 1e-9);
}

TEST(Margin, UnstableSwingEqualsExcessKineticEnergy) {
  const double w0 = 12.0;
  const auto m = compute_margin(synthetic_omib(1.0, w0, 1e-4, 1.0));
  EXPECT_EQ(m.cls, MarginClass::Unstable);
  EXPECT_NEAR(m.eta, -(0.5 * kM * w0 * w0 - decel_area(1.0)), 1e-6);
  EXPECT_NEAR(m.delta_event, kPi - std::asin(kPm / kPmax), 1e-4);
}

TEST(Margin, SignTracksInitialSpeed) {
  double prev = std::numeric_limits<double>::infinity();
  for (double w0 = 1.0; w0 <= 14.0; w0 += 1.0) {
    const double eta = compute_margin(synthetic_omib(1.0, w0, 1e-4, 1.0)).eta;
    EXPECT_LE(eta, prev);
    const bool stable = 0.5 * kM * w0 * w0 < decel_area(1.0);
    EXPECT_EQ(eta > 0.0, stable) << "w0 " << w0;
    prev = eta;
  }
}

TEST(Cct, SmibMatchesEqualAreaCriterion) {
  const auto c = smib();
  const auto op = case_point(c);
  SimConfig cfg;
  cfg.dt = 0.0005;
  cfg.horizon = 3.0;
  const auto eq = initialize_equilibrium(c, op);
  const double ev = std::abs(eq.e(0)) * std::abs(eq.e(1));
  const double pm = eq.pm(0);
  const double p_pre = ev / (0.4 + 0.2 + 1e-6), p_post = ev / (0.4 + 0.4 + 1e-6);
  const double d0 = std::asin(pm / p_pre), dmax = kPi - std::asin(pm / p_post);
  const double dc = std::acos((pm * (dmax - d0) + p_post * std::cos(dmax)) / p_post);
  const double m = 2.0 * c.generators[0].h / (2.0 * kPi * c.frequency);
  const double cct = std::sqrt(2.0 * m * (dc - d0) / pm);
  const auto r = estimate_cct(c, op, fault(1, 2, 0.0), cfg, 0.05, 0.4);
  EXPECT_NEAR(r.cct, cct, 0.02 * cct);
  EXPECT_NEAR(dc, 1.256, 2e-3);
}

TEST(Cct, BracketErrors) {
  auto always_stable = [](double) {
    MarginRun r;
    r.margin.eta = 1.0;
    return r;
  };
  EXPECT_THROW(estimate_cct(always_stable, 0.1, 0.4, 0.001), SimeError);
  EXPECT_THROW(estimate_cct(always_stable, 0.4, 0.1, 0.001), SimeError);
}

TEST(Cct, LinearMarginRecoveredExactly) {
  auto linear = [](double t) {
    MarginRun r;
    r.margin.eta = 0.9 - 4.0 * t;
    return r;
  };
  const auto r = estimate_cct(linear, 0.05, 0.5, 0.001);
  EXPECT_NEAR(r.cct, 0.225, 1e-12);
  EXPECT_FALSE(r.refined);
  EXPECT_EQ(r.table.size(), 4u);
}

TEST(Sensitivity, CompensatedDirectionsAreBalanced) {
  const std::vector<double> rho{0.5, 0.3, 0.2};
  for (std::size_t g = 0; g < rho.size(); ++g) {
    const auto u = compensated_direction(rho, g);
    EXPECT_NEAR(u.sum(), 0.0, 1e-15);
    EXPECT_EQ(u(static_cast<Eigen::Index>(g)), 1.0);
  }
}

TEST(Sensitivity, GradientRecoveredFromDirectionalDerivatives) {
  const std::vector<double> rho{0.5, 0.3, 0.2};
  Eigen::Vector3d phi(1.0, -2.0, 0.0);
  phi(2) = -(rho[0] * phi(0) + rho[1] * phi(1)) / rho[2];
  Eigen::Vector3d dir;
  for (Eigen::Index g = 0; g < 3; ++g) dir(g) = compensated_direction(rho, static_cast<std::size_t>(g)).dot(phi);
  EXPECT_LT((gradient_from_directional(dir, rho) - phi).norm(), 1e-12);
}

TEST(Sensitivity, ConstraintValueAtBaseIsMargin) {
  const auto c = case9();
  const auto op = case_point(c);
  SimConfig cfg;
  cfg.horizon = 3.0;
  const auto ev = fault(8, 8, 0.25);
  const auto sv = trajectory_sensitivity(c, op, ev, cfg);
  EXPECT_GE(sv.runs, 1 + 2 * c.generators.size());
  EXPECT_DOUBLE_EQ(sv.eta0, simulate_margin(c, op, ev, cfg).margin.eta);
  Eigen::VectorXd pg0(3);
  for (Eigen::Index g = 0; g < 3; ++g) pg0(g) = op.pg_mw[static_cast<std::size_t>(g)] / c.base_mva;
  const auto cut = build_constraint(sv.phi, sv.eta0, pg0, "C1");
  EXPECT_DOUBLE_EQ(cut.value(pg0), sv.eta0);
  EXPECT_THROW(build_constraint(sv.phi, sv.eta0, Eigen::VectorXd::Zero(2)), SimeError);
}
