#include <gtest/gtest.h>

#include <random>

#include "rtsc/conic.hpp"

using namespace rtsc::conic;

namespace {

Matrix random_symmetric(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = nd(rng);
  return m;
}

double min_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// min c'x s.t. G x <= h with box rows only.
ConeProgram lp2(const Vector& c, const Matrix& g, const Vector& h) {
  ProgramBuilder b;
  b.add_variables(2);
  b.add_linear_cost(0, c(0));
  b.add_linear_cost(1, c(1));
  for (int r = 0; r < g.rows(); ++r) b.add_row({{0, g(r, 0)}, {1, g(r, 1)}}, -kInf, h(r));
  return b.build();
}

// Brute force: intersect every pair of constraint lines, keep feasible ones.
double vertex_enumeration(const Vector& c, const Matrix& g, const Vector& h) {
  double best = kInf;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = i + 1; j < g.rows(); ++j) {
      Eigen::Matrix2d m;
      m << g(i, 0), g(i, 1), g(j, 0), g(j, 1);
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = m.inverse() * Eigen::Vector2d(h(i), h(j));
      if (((g * v) - h).maxCoeff() > 1e-9) continue;
      best = std::min(best, c.dot(v));
    }
  return best;
}

// min trace(X) s.t. X psd, X_11 = 1, over svec(X) variables.
ConeProgram trace_sdp(std::size_t d) {
  ProgramBuilder b;
  const auto first = b.add_variables(svec_size(d));
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  for (std::size_t k = 0; k < svec_size(d); ++k) rows.push_back({{first + k, 1.0}});
  b.add_psd_block(d, rows);
  for (std::size_t i = 0; i < d; ++i) b.add_linear_cost(first + svec_index(d, i, i), 1.0);
  b.add_row({{first + svec_index(d, 0, 0), 1.0}}, 1.0, 1.0);
  return b.build();
}

}  // namespace

TEST(ProjectPsd, IdentityIsFixed) {
  const Matrix i = Matrix::Identity(4, 4);
  EXPECT_LT((project_psd(i) - i).norm(), 1e-14);
}

TEST(ProjectPsd, NegativeIdentityGoesToZero) {
  EXPECT_LT(project_psd(-Matrix::Identity(4, 4)).norm(), 1e-14);
}

TEST(ProjectPsd, MatchesMoreauCertificateOnRandomMatrices) {
  // X = proj(M) iff X psd, X - M psd and <X, X - M> = 0.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_symmetric(rng, 5);
    const Matrix x = project_psd(m);
    EXPECT_GE(min_eig(x), -1e-10);
    EXPECT_GE(min_eig(x - m), -1e-10);
    EXPECT_NEAR((x.cwiseProduct(x - m)).sum(), 0.0, 1e-10);
    // No random PSD candidate is closer.
    for (int k = 0; k < 20; ++k) {
      const Matrix r = random_symmetric(rng, 5);
      const Matrix cand = r * r.transpose() * 0.2;
      EXPECT_LE((m - x).norm(), (m - cand).norm() + 1e-12);
    }
    EXPECT_LT((project_psd(x) - x).norm(), 1e-10);
  }
}

TEST(Svec, RoundTripAndInnerProduct) {
  std::mt19937_64 rng(3);
  const Matrix a = random_symmetric(rng, 6), b = random_symmetric(rng, 6);
  EXPECT_LT((smat(svec(a), 6) - a).norm(), 1e-14);
  EXPECT_NEAR(svec(a).dot(svec(b)), (a.cwiseProduct(b)).sum(), 1e-12);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t i = j; i < 6; ++i) {
      Matrix e = Matrix::Zero(6, 6);
      e(i, j) = e(j, i) = 1.0;
      const Vector v = svec(e);
      EXPECT_GT(std::abs(v(static_cast<Eigen::Index>(svec_index(6, i, j)))), 0.5);
    }
}

TEST(Admm, LpMatchesVertexEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    // Random bounded polygon: box plus three random cuts through a ball.
    Matrix g(7, 2);
    Vector h(7);
    g << 1, 0, -1, 0, 0, 1, 0, -1, 0, 0, 0, 0, 0, 0;
    h << 2, 2, 2, 2, 0, 0, 0;
    for (int r = 4; r < 7; ++r) {
      g(r, 0) = ud(rng);
      g(r, 1) = ud(rng);
      h(r) = 0.5 + std::abs(ud(rng));
    }
    Vector c(2);
    c << ud(rng), ud(rng);
    const auto sol = solve_admm(lp2(c, g, h), 1e-8);
    ASSERT_EQ(sol.status.state, Status::Optimal);
    EXPECT_NEAR(sol.status.objective, vertex_enumeration(c, g, h), 1e-5);
  }
}

TEST(Admm, TraceSdpHasOptimumOne) {
  for (std::size_t d : {2u, 3u, 5u}) {
    const auto prog = trace_sdp(d);
    const auto sol = solve_admm(prog, 1e-8);
    ASSERT_EQ(sol.status.state, Status::Optimal);
    EXPECT_NEAR(sol.status.objective, 1.0, 1e-6);
    const auto r = residuals(prog, sol.point);
    EXPECT_LE(r.primal, 1e-6);
  }
}

TEST(Admm, FeasibilityOnlyProgramMeetsTolerance) {
  ProgramBuilder b;
  b.add_variables(3);
  b.add_row({{0, 1.0}, {1, 1.0}, {2, 1.0}}, 1.0, 1.0);
  b.add_row({{0, 1.0}}, 0.0, kInf);
  b.add_row({{1, 1.0}, {2, -1.0}}, -0.5, 0.5);
  const auto prog = b.build();
  const auto sol = solve_admm(prog, 1e-7);
  ASSERT_EQ(sol.status.state, Status::Optimal);
  const auto r = residuals(prog, sol.point);
  EXPECT_LE(r.primal, 1e-6);
}

TEST(Admm, DetectsPrimalInfeasibility) {
  ProgramBuilder b;
  b.add_variables(1);
  b.add_linear_cost(0, 1.0);
  b.add_row({{0, 1.0}}, 1.0, kInf);
  b.add_row({{0, 1.0}}, -kInf, 0.0);
  EXPECT_EQ(solve_admm(b.build()).status.state, Status::Infeasible);
}

TEST(Admm, DetectsUnboundedness) {
  ProgramBuilder b;
  b.add_variables(2);
  b.add_linear_cost(0, -1.0);
  b.add_row({{0, 1.0}}, 0.0, kInf);
  b.add_row({{1, 1.0}}, -1.0, 1.0);
  EXPECT_EQ(solve_admm(b.build()).status.state, Status::Unbounded);
}

TEST(Admm, OptimalSolutionsPassIndependentResidualCheck) {
  // Quadratic objective with a PSD block: min ||X - M||_F^2 / 2 s.t. X psd
  // has the projection as its solution.
  std::mt19937_64 rng(17);
  const std::size_t d = 4;
  const Matrix m = random_symmetric(rng, 4);
  ProgramBuilder b;
  const auto first = b.add_variables(svec_size(d));
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  const Vector sm = svec(m);
  for (std::size_t k = 0; k < svec_size(d); ++k) {
    rows.push_back({{first + k, 1.0}});
    b.add_quadratic_cost(first + k, first + k, 1.0);
    b.add_linear_cost(first + k, -sm(static_cast<Eigen::Index>(k)));
  }
  b.add_psd_block(d, rows);
  const auto prog = b.build();
  const auto sol = solve_admm(prog, 1e-9);
  ASSERT_EQ(sol.status.state, Status::Optimal);
  const auto r = residuals(prog, sol.point);
  EXPECT_LE(r.primal, sol.status.primal_residual + 1e-15);
  EXPECT_LE(r.dual, 1e-7);
  EXPECT_LT((smat(sol.point.x, d) - project_psd(m)).norm(), 1e-6);
  EXPECT_LT(std::abs(r.gap), 1e-6);
}

TEST(Residuals, ExactOptimumIsClean) {
  // min (x-1)^2/2 over [0,2]: x = 1, y = 0.
  ProgramBuilder b;
  b.add_variables(1);
  b.add_quadratic_cost(0, 0, 1.0);
  b.add_linear_cost(0, -1.0);
  b.add_constant(0.5);
  b.add_row({{0, 1.0}}, 0.0, 2.0);
  const auto prog = b.build();
  Point p{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0), Vector::Zero(1)};
  const auto r = residuals(prog, p);
  EXPECT_LT(r.primal, 1e-10);
  EXPECT_LT(r.dual, 1e-10);
  EXPECT_LT(std::abs(r.gap), 1e-10);
}

TEST(Residuals, GrowLinearlyUnderPerturbation) {
  ProgramBuilder b;
  b.add_variables(2);
  b.add_quadratic_cost(0, 0, 2.0);
  b.add_quadratic_cost(1, 1, 1.0);
  b.add_linear_cost(0, -2.0);
  b.add_row({{0, 1.0}, {1, 1.0}}, 1.0, 1.0);
  const auto prog = b.build();
  // KKT: 2x0 - 2 + y = 0, x1 + y = 0, x0 + x1 = 1 -> x0 = 1, x1 = 0, y = 0.
  const Vector dir = (Vector(2) << 0.3, -0.7).finished();
  std::vector<double> dual;
  for (double t : {1e-3, 2e-3, 4e-3}) {
    Point p{(Vector(2) << 1.0, 0.0).finished() + t * dir, Vector::Constant(1, 1.0), Vector::Zero(1)};
    dual.push_back(residuals(prog, p).dual);
  }
  EXPECT_NEAR(dual[1] / dual[0], 2.0, 1e-6);
  EXPECT_NEAR(dual[2] / dual[1], 2.0, 1e-6);
}

TEST(Residuals, InfeasiblePointReportsViolation) {
  ProgramBuilder b;
  b.add_variables(1);
  b.add_row({{0, 1.0}}, 0.0, 2.0);
  const auto prog = b.build();
  Point p{Vector::Constant(1, 3.5), Vector::Constant(1, 2.0), Vector::Zero(1)};
  EXPECT_GE(residuals(prog, p).primal, 1.5 - 1e-15);
}

TEST(Scaling, EquilibratedProgramIsNearlyUnscaled) {
  ProgramBuilder b;
  b.add_variables(3);
  for (std::size_t k = 0; k < 3; ++k) {
    b.add_quadratic_cost(k, k, 1.0);
    b.add_linear_cost(k, 1.0);
    b.add_row({{k, 1.0}}, -1.0, 1.0);
  }
  const auto [sp, s] = scale_problem(b.build());
  EXPECT_LT((s.d - Vector::Ones(3)).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT((s.e - Vector::Ones(3)).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_NEAR(s.c, 1.0, 1e-12);
}

TEST(Scaling, UnscaleInvertsScale) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  ProgramBuilder b;
  b.add_variables(4);
  for (std::size_t k = 0; k < 4; ++k) b.add_quadratic_cost(k, k, std::pow(10.0, k));
  b.add_row({{0, 1e3}, {1, 2.0}}, 0.0, 1.0);
  b.add_row({{2, 1e-3}, {3, 5.0}}, -1.0, 1.0);
  const auto [sp, s] = scale_problem(b.build());
  Point p{Vector(4), Vector(2), Vector(2)};
  for (int i = 0; i < 4; ++i) p.x(i) = nd(rng);
  for (int i = 0; i < 2; ++i) {
    p.z(i) = nd(rng);
    p.y(i) = nd(rng);
  }
  const Point back = unscale(rescale(p, s), s);
  EXPECT_LT((back.x - p.x).lpNorm<Eigen::Infinity>(), 1e-14 * (1.0 + p.x.lpNorm<Eigen::Infinity>()));
  EXPECT_LT((back.z - p.z).lpNorm<Eigen::Infinity>(), 1e-14 * (1.0 + p.z.lpNorm<Eigen::Infinity>()));
  EXPECT_LT((back.y - p.y).lpNorm<Eigen::Infinity>(), 1e-13 * (1.0 + p.y.lpNorm<Eigen::Infinity>()));
}

TEST(Scaling, PsdBlockScaledUniformly) {
  const auto prog = trace_sdp(3);
  const auto [sp, s] = scale_problem(prog);
  const auto& blk = prog.psd.front();
  for (std::size_t r = 1; r < svec_size(blk.dim); ++r)
    EXPECT_DOUBLE_EQ(s.e(static_cast<Eigen::Index>(blk.row + r)), s.e(static_cast<Eigen::Index>(blk.row)));
}

TEST(Scaling, BadlyScaledCorpusConvergesFaster) {
  // Regression corpus: dense QPs whose rows and columns span six decades.
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ud(0.5, 1.5), sg(-1.0, 1.0);
  long scaled_iters = 0, plain_iters = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8, m = 6;
    ProgramBuilder b;
    b.add_variables(n);
    Vector cs(n), rs(m);
    for (int k = 0; k < n; ++k) cs(k) = std::pow(10.0, -3.0 + 6.0 * k / (n - 1));
    for (int r = 0; r < m; ++r) rs(r) = std::pow(10.0, 3.0 - 6.0 * r / (m - 1));
    for (int k = 0; k < n; ++k) {
      b.add_quadratic_cost(k, k, ud(rng) / (cs(k) * cs(k)));
      b.add_linear_cost(k, sg(rng) / cs(k));
    }
    for (int r = 0; r < m; ++r) {
      std::vector<std::pair<std::size_t, double>> terms;
      for (int k = 0; k < n; ++k) terms.push_back({static_cast<std::size_t>(k), rs(r) * sg(rng) / cs(k)});
      if (r < 2) b.add_row(terms, 0.3 * rs(r), 0.3 * rs(r));
      else b.add_row(terms, -kInf, rs(r) * ud(rng));
    }
    const auto prog = b.build();
    Settings on, off;
    on.eps_abs = on.eps_rel = off.eps_abs = off.eps_rel = 1e-7;
    off.scaling = false;
    const auto a = AdmmSolver(on).solve(prog);
    const auto c = AdmmSolver(off).solve(prog);
    ASSERT_EQ(a.status.state, Status::Optimal);
    scaled_iters += a.status.iterations;
    plain_iters += c.status.iterations;
  }
  EXPECT_LT(scaled_iters, plain_iters);
}

TEST(Admm, IsDeterministic) {
  const auto prog = trace_sdp(4);
  const auto a = solve_admm(prog, 1e-8);
  const auto b = solve_admm(prog, 1e-8);
  EXPECT_EQ(a.status.iterations, b.status.iterations);
  EXPECT_EQ((a.point.x - b.point.x).norm(), 0.0);
}
