#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rtsc/scenario.hpp"
#include "test_util.hpp"

using namespace rtsc;

namespace {

PredictionInterval box(std::vector<double> lo, std::vector<double> hi, Horizon h = Horizon::DayAhead) {
  PredictionInterval iv;
  iv.lower = std::move(lo);
  iv.upper = std::move(hi);
  iv.horizon = h;
  return iv;
}

ScenarioSet atoms(const std::vector<std::vector<double>>& pts, std::vector<double> prob = {}) {
  ScenarioSet s;
  s.interval = box(std::vector<double>(pts.front().size(), -1e9), std::vector<double>(pts.front().size(), 1e9));
  for (std::size_t i = 0; i < pts.size(); ++i)
    s.scenarios.push_back({pts[i], prob.empty() ? 1.0 / static_cast<double>(pts.size()) : prob[i], i});
  return s;
}

double bound(double eps, double delta, std::size_t n) {
  const double e = std::exp(1.0);
  return e / (eps * (e - 1.0)) * (-std::log(delta) + static_cast<double>(n) - 1.0);
}

}  // namespace

TEST(SampleComplexity, KnownValues) {
  EXPECT_EQ(sample_complexity(0.005, 0.001, 7), 4084u);
  EXPECT_EQ(sample_complexity(0.1, 0.01, 3), 105u);
  EXPECT_EQ(sample_complexity(0.01, 0.001, 3), 1410u);
}

TEST(SampleComplexity, SmallestSatisfyingInteger) {
  for (double eps : {0.001, 0.005, 0.01, 0.05, 0.2})
    for (double delta : {1e-6, 1e-3, 0.05, 0.5})
      for (std::size_t n : {1u, 2u, 7u, 39u}) {
        const auto N = sample_complexity(eps, delta, n);
        EXPECT_GE(static_cast<double>(N), bound(eps, delta, n) - 1e-9);
        EXPECT_LT(static_cast<double>(N - 1), bound(eps, delta, n));
        EXPECT_LE(sample_complexity(eps, delta, n), sample_complexity(eps, delta, n + 1));
      }
}

TEST(SampleComplexity, DomainErrors) {
  EXPECT_THROW(sample_complexity(0.0, 0.1, 1), std::domain_error);
  EXPECT_THROW(sample_complexity(1.0, 0.1, 1), std::domain_error);
  EXPECT_THROW(sample_complexity(0.1, 0.0, 1), std::domain_error);
  EXPECT_THROW(sample_complexity(0.1, 1.5, 1), std::domain_error);
  EXPECT_THROW(sample_complexity(0.1, 0.1, 0), std::domain_error);
}

TEST(Interval, FromCaseAndContainment) {
  const auto c = rtsc::testing::case9();
  const auto da = prediction_interval(c, Horizon::DayAhead);
  const auto st = prediction_interval(c, Horizon::ShortTerm);
  EXPECT_DOUBLE_EQ(da.lower[0], 40.0);
  EXPECT_DOUBLE_EQ(da.upper[1], 72.0);
  EXPECT_DOUBLE_EQ(st.lower[0], 47.5);
  EXPECT_TRUE(da.contains(st));
  EXPECT_FALSE(st.contains(da));
  EXPECT_THROW(box({2.0}, {1.0}).check(), ScenarioError);
  EXPECT_EQ(parse_horizon("short_term"), Horizon::ShortTerm);
  EXPECT_THROW(parse_horizon("weekly"), ScenarioError);
}

TEST(Sampling, DegenerateInterval) {
  const auto s = sample_uniform(box({5.0, 7.0}, {5.0, 7.0}), 20, 3);
  for (const auto& sc : s.scenarios) {
    EXPECT_EQ(sc.p_hat_w[0], 5.0);
    EXPECT_EQ(sc.p_hat_w[1], 7.0);
  }
}

TEST(Sampling, MeanWithinThreeSigma) {
  const auto iv = box({10.0, -2.0}, {30.0, 6.0});
  const std::size_t n = 100000;
  const auto s = sample_uniform(iv, n, 12345);
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (const auto& sc : s.scenarios) {
      mean += sc.p_hat_w[k];
      EXPECT_TRUE(sc.p_hat_w[k] >= iv.lower[k] && sc.p_hat_w[k] <= iv.upper[k]);
    }
    mean /= static_cast<double>(n);
    const double w = iv.upper[k] - iv.lower[k];
    const double sigma = w / std::sqrt(12.0 * static_cast<double>(n));
    EXPECT_LT(std::abs(mean - 0.5 * (iv.lower[k] + iv.upper[k])), 3.0 * sigma);
  }
  EXPECT_NEAR(s.total_mass(), 1.0, 1e-9);
}

TEST(Sampling, Deterministic) {
  const auto iv = box({0.0, 0.0}, {1.0, 2.0});
  const auto a = sample_uniform(iv, 50, 9), b = sample_uniform(iv, 50, 9), c = sample_uniform(iv, 50, 10);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.scenarios[i].p_hat_w, b.scenarios[i].p_hat_w);
  EXPECT_NE(a.scenarios[0].p_hat_w, c.scenarios[0].p_hat_w);
  EXPECT_THROW(sample_uniform(iv, 0, 1), ScenarioError);
}

TEST(Kantorovich, IdentityAndSingleAtom) {
  const auto a = atoms({{0.0, 0.0}, {1.0, 2.0}, {3.0, -1.0}});
  EXPECT_NEAR(kantorovich_distance(a, a), 0.0, 1e-12);
  EXPECT_NEAR(kantorovich_distance(atoms({{0.0, 0.0}}), atoms({{3.0, 4.0}})), 5.0, 1e-12);
  EXPECT_THROW(kantorovich_distance(ScenarioSet{}, a), ScenarioError);
}

TEST(Kantorovich, MatchesNearestKeptOracleOnSubsets) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    std::vector<double> prob;
    for (int i = 0; i < 10; ++i) {
      pts.push_back({u(rng), u(rng)});
      prob.push_back(0.5 + u(rng));
    }
    double total = 0.0;
    for (double p : prob) total += p;
    for (auto& p : prob) p /= total;
    const auto a = atoms(pts, prob);
    std::vector<std::size_t> kept{static_cast<std::size_t>(trial % 10), static_cast<std::size_t>((trial + 3) % 10),
                                  static_cast<std::size_t>((trial + 7) % 10)};
    const auto b = redistribute(a, kept);
    // Brute-force nearest-kept-atom sum.
    double oracle = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      double best = 1e300;
      for (auto k : kept) best = std::min(best, euclidean(pts[i], pts[k]));
      oracle += prob[i] * best;
    }
    EXPECT_NEAR(kantorovich_distance(a, b), oracle, 1e-10);
    EXPECT_NEAR(reduction_distance(a, kept), oracle, 1e-12);
  }
}

TEST(Reduction, IdenticalScenariosCollapse) {
  const auto r = fast_forward_reduce(atoms({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}), 1);
  ASSERT_EQ(r.reduced.size(), 1u);
  EXPECT_NEAR(r.reduced.scenarios[0].probability, 1.0, 1e-15);
  EXPECT_EQ(r.distance, 0.0);
}

TEST(Reduction, KeepAllIsIdentity) {
  const auto set = sample_uniform(box({0.0, 0.0}, {1.0, 1.0}), 30, 4);
  const auto r = fast_forward_reduce(set, set.size());
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_NEAR(kantorovich_distance(set, r.reduced), 0.0, 1e-12);
  for (const auto& sc : r.reduced.scenarios) EXPECT_NEAR(sc.probability, 1.0 / 30.0, 1e-15);
  EXPECT_THROW(fast_forward_reduce(set, 0), ScenarioError);
  EXPECT_THROW(fast_forward_reduce(set, 31), ScenarioError);
}

TEST(Reduction, GreedyMatchesStepwiseOracle) {
  for (int trial = 0; trial < 40; ++trial) {
    const auto set = sample_uniform(box({0.0, 0.0}, {10.0, 10.0}), 8, 1000 + static_cast<std::uint64_t>(trial));
    const auto r = fast_forward_reduce(set, 3);
    std::vector<std::size_t> kept;
    for (std::size_t step = 0; step < 3; ++step) {
      double best = 1e300;
      for (std::size_t u = 0; u < 8; ++u) {
        if (std::find(kept.begin(), kept.end(), u) != kept.end()) continue;
        auto cand = kept;
        cand.push_back(u);
        best = std::min(best, kantorovich_distance(set, redistribute(set, cand)));
      }
      auto chosen = kept;
      chosen.push_back(r.kept[step]);
      EXPECT_NEAR(kantorovich_distance(set, redistribute(set, chosen)), best, 1e-10);
      kept.push_back(r.kept[step]);
    }
    // Exhaustive optimum over all 3-subsets lower-bounds the greedy value.
    double opt = 1e300;
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = a + 1; b < 8; ++b)
        for (std::size_t c = b + 1; c < 8; ++c) opt = std::min(opt, reduction_distance(set, {a, b, c}));
    EXPECT_LE(opt, r.distance + 1e-12);
    EXPECT_NEAR(r.distance, kantorovich_distance(set, r.reduced), 1e-10);
  }
}

TEST(Reduction, DistanceNonincreasingAndMassPreserved) {
  const auto set = sample_uniform(box({0.0, 0.0}, {50.0, 60.0}), 400, 8);
  double prev = 1e300;
  for (std::size_t m : {1u, 2u, 5u, 10u, 25u, 50u, 100u}) {
    const auto r = fast_forward_reduce(set, m);
    EXPECT_LE(r.distance, prev + 1e-12);
    EXPECT_NEAR(r.reduced.total_mass(), 1.0, 1e-12);
    for (std::size_t k = 0; k < m; ++k) EXPECT_EQ(r.reduced.scenarios[k].p_hat_w, set.scenarios[r.kept[k]].p_hat_w);
    prev = r.distance;
  }
}

TEST(Selection, BoxFilterMatchesLinearScan) {
  const auto c = rtsc::testing::case9();
  const auto set = sample_uniform(prediction_interval(c, Horizon::DayAhead), 300, 2);
  const auto red = fast_forward_reduce(set, 60).reduced;
  const auto st = prediction_interval(c, Horizon::ShortTerm);
  const auto sel = select_online(red, st);
  std::size_t expect = 0;
  for (const auto& sc : red.scenarios) expect += st.contains(sc.p_hat_w) ? 1 : 0;
  EXPECT_EQ(sel.size(), expect);
  EXPECT_LT(sel.size(), red.size());
  EXPECT_NEAR(sel.total_mass(), 1.0, 1e-12);
  const auto all = select_online(red, red.interval);
  EXPECT_EQ(all.size(), red.size());
  EXPECT_THROW(select_online(red, box({40.0, 48.0}, {40.0001, 48.0001})), ScenarioError);
  EXPECT_THROW(select_online(red, box({0.0, 0.0}, {100.0, 100.0})), ScenarioError);
}

TEST(ScenarioIo, RoundTrip) {
  const auto set = fast_forward_reduce(sample_uniform(box({1.0, 2.0}, {3.0, 4.0}, Horizon::ShortTerm), 40, 6), 7)
                       .reduced;
  std::ostringstream out;
  write_scenarios(out, set);
  std::istringstream in(out.str());
  const auto back = read_scenarios(in);
  ASSERT_EQ(back.size(), set.size());
  EXPECT_EQ(back.provenance, Provenance::Reduced);
  EXPECT_EQ(back.interval.horizon, Horizon::ShortTerm);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back.scenarios[i].p_hat_w, set.scenarios[i].p_hat_w);
    EXPECT_EQ(back.scenarios[i].probability, set.scenarios[i].probability);
    EXPECT_EQ(back.scenarios[i].origin, set.scenarios[i].origin);
  }
  std::istringstream bad("1 2 3\n");
  EXPECT_THROW(read_scenarios(bad), ScenarioError);
}
