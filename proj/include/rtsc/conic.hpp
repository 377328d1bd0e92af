#pragma once

// Operator-splitting solver for quadratic-objective conic programs
//
//   minimize    1/2 x'Px + q'x + constant
//   subject to  A x in C,  C = Box(l, u) x S+(d_1) x ... x S+(d_k)
//
// where PSD blocks occupy contiguous rows of A in svec form (lower triangle,
// column major, off-diagonals scaled by sqrt(2)). The iteration is the OSQP
// splitting with the box projection extended by eigenvalue clipping on the
// PSD blocks; the quasi-definite KKT system is factored once per step-size
// change.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace rtsc::conic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::size_t svec_size(std::size_t d) { return d * (d + 1) / 2; }

/// Position of entry (i, j), i >= j, in svec order.
inline std::size_t svec_index(std::size_t d, std::size_t i, std::size_t j) {
  if (i < j) std::swap(i, j);
  return j * d - j * (j - 1) / 2 + (i - j);
}

inline Vector svec(const Matrix& m) {
  const auto d = static_cast<std::size_t>(m.rows());
  Vector v(static_cast<Eigen::Index>(svec_size(d)));
  std::size_t k = 0;
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = j; i < d; ++i)
      v(static_cast<Eigen::Index>(k++)) =
          i == j ? m(i, j) : std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
  return v;
}

inline Matrix smat(const Eigen::Ref<const Vector>& v, std::size_t d) {
  Matrix m(d, d);
  std::size_t k = 0;
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = j; i < d; ++i) {
      const double x = v(static_cast<Eigen::Index>(k++));
      if (i == j) {
        m(i, i) = x;
      } else {
        m(i, j) = m(j, i) = x / std::sqrt(2.0);
      }
    }
  return m;
}

/// Frobenius-nearest PSD matrix: symmetrise, then clip negative eigenvalues.
inline Matrix project_psd(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed in PSD projection");
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct PsdBlock {
  std::size_t row = 0;  // first row in A
  std::size_t dim = 0;  // matrix dimension d; block spans svec_size(d) rows
};

struct ConeProgram {
  SparseMatrix P;  // n x n symmetric (full storage)
  Vector q;
  SparseMatrix A;  // m x n
  Vector l, u;     // per-row bounds; ignored on PSD rows
  std::vector<PsdBlock> psd;
  double constant = 0.0;

  std::size_t num_vars() const { return static_cast<std::size_t>(q.size()); }
  std::size_t num_rows() const { return static_cast<std::size_t>(A.rows()); }

  /// Row -> PSD block index, or -1 for box rows.
  std::vector<int> row_kind() const {
    std::vector<int> kind(num_rows(), -1);
    for (std::size_t b = 0; b < psd.size(); ++b)
      for (std::size_t r = 0; r < svec_size(psd[b].dim); ++r) kind[psd[b].row + r] = static_cast<int>(b);
    return kind;
  }

  void check() const {
    const auto n = static_cast<Eigen::Index>(num_vars());
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("P has wrong shape");
    if (A.cols() != n) throw std::invalid_argument("A has wrong column count");
    if (l.size() != A.rows() || u.size() != A.rows()) throw std::invalid_argument("bound length mismatch");
    std::vector<char> used(num_rows(), 0);
    for (const auto& b : psd) {
      if (b.row + svec_size(b.dim) > num_rows()) throw std::invalid_argument("PSD block out of range");
      for (std::size_t r = 0; r < svec_size(b.dim); ++r) {
        if (used[b.row + r]) throw std::invalid_argument("overlapping PSD blocks");
        used[b.row + r] = 1;
      }
    }
  }

  double objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + constant; }
};

/// Euclidean projection onto C, row-wise for boxes and blockwise for PSD.
inline Vector project_cone(const ConeProgram& prog, const Vector& w) {
  Vector z = w;
  std::vector<int> kind = prog.row_kind();
  for (Eigen::Index r = 0; r < w.size(); ++r)
    if (kind[static_cast<std::size_t>(r)] < 0) z(r) = std::clamp(w(r), prog.l(r), prog.u(r));
  for (const auto& b : prog.psd) {
    const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
    const auto off = static_cast<Eigen::Index>(b.row);
    z.segment(off, len) = svec(project_psd(smat(w.segment(off, len), b.dim)));
  }
  return z;
}

/// Support function of C at y, assuming the PSD components of y lie in the
/// polar cone (where it is zero).
inline double support(const ConeProgram& prog, const Vector& y, const std::vector<int>& kind) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    if (kind[static_cast<std::size_t>(r)] >= 0) continue;
    const double v = y(r);
    if (v > 0.0) {
      if (prog.u(r) < kInf) s += prog.u(r) * v;
      else s += kInf;
    } else if (v < 0.0) {
      if (prog.l(r) > -kInf) s += prog.l(r) * v;
      else s += kInf;
    }
  }
  return s;
}

struct Point {
  Vector x, z, y;
};

struct Residuals {
  double primal = 0.0;  // ||Ax - proj_C(Ax)||_inf
  double dual = 0.0;    // ||Px + q + A'y||_inf
  double gap = 0.0;     // primal objective - dual objective
  double primal_rel = 0.0;
  double dual_rel = 0.0;
  double gap_rel = 0.0;
};

/// KKT residuals of a candidate point. Before the support function is
/// evaluated, y is projected onto its domain (PSD parts onto the polar cone,
/// wrong-signed multipliers of unbounded rows to zero).
inline Residuals residuals(const ConeProgram& prog, const Point& pt) {
  Residuals r;
  const Vector ax = prog.A * pt.x;
  const Vector pax = project_cone(prog, ax);
  r.primal = (ax - pax).lpNorm<Eigen::Infinity>();
  const Vector px = prog.P * pt.x;
  const Vector aty = prog.A.transpose() * pt.y;
  r.dual = (px + prog.q + aty).lpNorm<Eigen::Infinity>();

  const auto kind = prog.row_kind();
  double sup = 0.0;
  Vector y = pt.y;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (kind[static_cast<std::size_t>(i)] >= 0) continue;
    if (y(i) > 0.0 && prog.u(i) == kInf) y(i) = 0.0;
    if (y(i) < 0.0 && prog.l(i) == -kInf) y(i) = 0.0;
  }
  for (const auto& b : prog.psd) {
    const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
    const auto off = static_cast<Eigen::Index>(b.row);
    const Matrix m = smat(y.segment(off, len), b.dim);
    y.segment(off, len) = svec(m - project_psd(m));
  }
  sup = support(prog, y, kind);
  const double pobj = prog.objective(pt.x);
  const double dobj = -0.5 * pt.x.dot(px) - sup + prog.constant;
  r.gap = pobj - dobj;

  const double ax_n = ax.lpNorm<Eigen::Infinity>();
  r.primal_rel = r.primal / (1.0 + ax_n);
  r.dual_rel = r.dual / (1.0 + std::max({px.lpNorm<Eigen::Infinity>(), prog.q.lpNorm<Eigen::Infinity>(),
                                          aty.lpNorm<Eigen::Infinity>()}));
  r.gap_rel = std::abs(r.gap) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
  return r;
}

// ---------------------------------------------------------------------------
// Scaling

struct Scaling {
  Vector d;     // variable scaling, x = D x_scaled
  Vector e;     // row scaling, z_scaled = E z
  double c = 1; // cost scaling
};

/// Modified Ruiz equilibration of [P A'; A 0]. Row scalings are averaged over
/// each PSD block so the scaled block stays a PSD cone.
inline std::pair<ConeProgram, Scaling> scale_problem(const ConeProgram& prog, int iterations = 15) {
  const auto n = static_cast<Eigen::Index>(prog.num_vars());
  const auto m = static_cast<Eigen::Index>(prog.num_rows());
  Scaling s;
  s.d = Vector::Ones(n);
  s.e = Vector::Ones(m);
  ConeProgram sp = prog;
  auto clamp_scale = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };

  for (int it = 0; it < iterations; ++it) {
    Vector dcol = Vector::Zero(n);
    Vector erow = Vector::Zero(m);
    for (Eigen::Index k = 0; k < sp.P.outerSize(); ++k)
      for (SparseMatrix::InnerIterator itp(sp.P, k); itp; ++itp)
        dcol(itp.col()) = std::max(dcol(itp.col()), std::abs(itp.value()));
    for (Eigen::Index k = 0; k < sp.A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator ita(sp.A, k); ita; ++ita) {
        dcol(ita.col()) = std::max(dcol(ita.col()), std::abs(ita.value()));
        erow(ita.row()) = std::max(erow(ita.row()), std::abs(ita.value()));
      }
    Vector dk(n), ek(m);
    for (Eigen::Index j = 0; j < n; ++j) dk(j) = 1.0 / std::sqrt(clamp_scale(dcol(j)));
    for (Eigen::Index i = 0; i < m; ++i) ek(i) = 1.0 / std::sqrt(clamp_scale(erow(i)));
    for (const auto& b : sp.psd) {
      const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
      const auto off = static_cast<Eigen::Index>(b.row);
      ek.segment(off, len).setConstant(ek.segment(off, len).mean());
    }
    sp.P = dk.asDiagonal() * sp.P * dk.asDiagonal();
    sp.A = ek.asDiagonal() * sp.A * dk.asDiagonal();
    sp.q = dk.cwiseProduct(sp.q);
    s.d = s.d.cwiseProduct(dk);
    s.e = s.e.cwiseProduct(ek);

    double pmean = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double mx = 0.0;
      for (SparseMatrix::InnerIterator itp(sp.P, j); itp; ++itp) mx = std::max(mx, std::abs(itp.value()));
      pmean += mx;
    }
    pmean /= std::max<Eigen::Index>(n, 1);
    const double ck = 1.0 / clamp_scale(std::max(pmean, sp.q.lpNorm<Eigen::Infinity>()));
    sp.P *= ck;
    sp.q *= ck;
    s.c *= ck;
  }
  sp.constant = prog.constant * s.c;
  for (Eigen::Index i = 0; i < m; ++i) {
    sp.l(i) = prog.l(i) > -kInf ? prog.l(i) * s.e(i) : -kInf;
    sp.u(i) = prog.u(i) < kInf ? prog.u(i) * s.e(i) : kInf;
  }
  sp.P.makeCompressed();
  sp.A.makeCompressed();
  return {std::move(sp), std::move(s)};
}

inline Point unscale(const Point& scaled, const Scaling& s) {
  Point p;
  p.x = s.d.cwiseProduct(scaled.x);
  p.z = scaled.z.cwiseQuotient(s.e);
  p.y = s.e.cwiseProduct(scaled.y) / s.c;
  return p;
}

inline Point rescale(const Point& p, const Scaling& s) {
  Point out;
  out.x = p.x.cwiseQuotient(s.d);
  out.z = s.e.cwiseProduct(p.z);
  out.y = p.y.cwiseQuotient(s.e) * s.c;
  return out;
}

// ---------------------------------------------------------------------------
// ADMM

enum class Status { Optimal, Inaccurate, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Inaccurate: return "inaccurate";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "?";
}

struct Settings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double eps_infeasible = 1e-7;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool scaling = true;
  int scaling_iterations = 15;
  bool adaptive_rho = true;
  int adaptive_interval = 25;
  double adaptive_tolerance = 5.0;
  int check_interval = 5;
  bool record_trace = false;
};

struct TraceRow {
  int iteration;
  double primal, dual, gap, rho;
};

struct SolverStatus {
  Status state = Status::IterationLimit;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double gap = kInf;
  double objective = kInf;
  int iterations = 0;
  int factorizations = 0;
  double wall_time = 0.0;  // s
};

struct Solution {
  Point point;
  SolverStatus status;
  std::vector<TraceRow> trace;
};

namespace detail {

inline SparseMatrix kkt_matrix(const ConeProgram& sp, double sigma, const Vector& rho) {
  const auto n = static_cast<Eigen::Index>(sp.num_vars());
  const auto m = static_cast<Eigen::Index>(sp.num_rows());
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(sp.P.nonZeros() + sp.A.nonZeros() + n + m));
  for (Eigen::Index k = 0; k < sp.P.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sp.P, k); it; ++it)
      if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index j = 0; j < n; ++j) trip.emplace_back(j, j, sigma);
  for (Eigen::Index k = 0; k < sp.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sp.A, k); it; ++it) trip.emplace_back(n + it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -1.0 / rho(i));
  SparseMatrix k(n + m, n + m);
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();
  return k;
}

}  // namespace detail

class AdmmSolver {
 public:
  explicit AdmmSolver(Settings settings = {}) : settings_(settings) {}

  Solution solve(const ConeProgram& prog) const {
    const auto t_start = std::chrono::steady_clock::now();
    prog.check();
    const auto n = static_cast<Eigen::Index>(prog.num_vars());
    const auto m = static_cast<Eigen::Index>(prog.num_rows());

    ConeProgram sp;
    Scaling sc;
    if (settings_.scaling) {
      std::tie(sp, sc) = scale_problem(prog, settings_.scaling_iterations);
    } else {
      sp = prog;
      sc.d = Vector::Ones(n);
      sc.e = Vector::Ones(m);
    }
    const auto kind = sp.row_kind();
    const Vector dinv = sc.d.cwiseInverse();
    const Vector einv = sc.e.cwiseInverse();

    // Per-row step sizes: stiffer on equalities, minimal on free rows.
    double rho = settings_.rho;
    auto row_rho = [&](double base) {
      Vector r(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (kind[static_cast<std::size_t>(i)] >= 0) r(i) = base;
        else if (sp.l(i) == -kInf && sp.u(i) == kInf) r(i) = 1e-6;
        else if (sp.u(i) - sp.l(i) < 1e-4 * std::max(1.0, std::abs(sp.u(i)))) r(i) = 1e3 * base;
        else r(i) = base;
      }
      return r;
    };
    Vector rho_vec = row_rho(rho);

    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    int factorizations = 0;
    auto factor = [&]() {
      ldlt.compute(detail::kkt_matrix(sp, settings_.sigma, rho_vec));
      ++factorizations;
      if (ldlt.info() != Eigen::Success) throw std::runtime_error("KKT factorization failed");
    };
    factor();

    Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
    Vector x_prev = x, y_prev = y;
    Vector rhs(n + m), sol(n + m);
    Solution out;
    SolverStatus& st = out.status;

    auto project = [&](Vector& w) {
      for (Eigen::Index r = 0; r < m; ++r)
        if (kind[static_cast<std::size_t>(r)] < 0) w(r) = std::clamp(w(r), sp.l(r), sp.u(r));
      for (const auto& b : sp.psd) {
        const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
        const auto off = static_cast<Eigen::Index>(b.row);
        w.segment(off, len) = svec(project_psd(smat(w.segment(off, len), b.dim)));
      }
    };

    struct Norms {
      double rp, rd, ep, ed, gap, pobj;
      double ax, zz, px, aty, qq;
    };
    auto measure = [&]() {
      Norms nm{};
      const Vector ax = sp.A * x;
      const Vector px = sp.P * x;
      const Vector aty = sp.A.transpose() * y;
      nm.rp = einv.cwiseProduct(ax - z).lpNorm<Eigen::Infinity>();
      nm.rd = dinv.cwiseProduct(px + sp.q + aty).lpNorm<Eigen::Infinity>() / sc.c;
      nm.ax = einv.cwiseProduct(ax).lpNorm<Eigen::Infinity>();
      nm.zz = einv.cwiseProduct(z).lpNorm<Eigen::Infinity>();
      nm.px = dinv.cwiseProduct(px).lpNorm<Eigen::Infinity>() / sc.c;
      nm.aty = dinv.cwiseProduct(aty).lpNorm<Eigen::Infinity>() / sc.c;
      nm.qq = dinv.cwiseProduct(sp.q).lpNorm<Eigen::Infinity>() / sc.c;
      nm.ep = settings_.eps_abs + settings_.eps_rel * std::max(nm.ax, nm.zz);
      nm.ed = settings_.eps_abs + settings_.eps_rel * std::max({nm.px, nm.aty, nm.qq});
      const double pobj = 0.5 * x.dot(px) + sp.q.dot(x);
      const double sup = support(sp, y, kind);
      nm.gap = (x.dot(px) + sp.q.dot(x) + sup) / sc.c;
      nm.pobj = pobj / sc.c;
      return nm;
    };

    auto primal_infeasible = [&]() {
      const Vector dy = y - y_prev;
      const double dy_n = sc.e.cwiseProduct(dy).lpNorm<Eigen::Infinity>();
      if (dy_n < 1e-12) return false;
      const double eps = settings_.eps_infeasible * dy_n;
      if (dinv.cwiseProduct(sp.A.transpose() * dy).lpNorm<Eigen::Infinity>() > eps) return false;
      for (const auto& b : sp.psd) {
        const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
        const Matrix mm = smat(dy.segment(static_cast<Eigen::Index>(b.row), len), b.dim);
        Eigen::SelfAdjointEigenSolver<Matrix> es(mm, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().maxCoeff() > eps) return false;
      }
      const double sup = support(sp, dy, kind);
      return sup < -eps;
    };

    auto dual_infeasible = [&]() {
      const Vector dx = x - x_prev;
      const double dx_n = sc.d.cwiseProduct(dx).lpNorm<Eigen::Infinity>();
      if (dx_n < 1e-12) return false;
      const double eps = settings_.eps_infeasible * dx_n;
      if (dinv.cwiseProduct(sp.P * dx).lpNorm<Eigen::Infinity>() / sc.c > eps) return false;
      if (sp.q.dot(dx) / sc.c > -eps) return false;
      const Vector adx = sp.A * dx;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (kind[static_cast<std::size_t>(r)] >= 0) continue;
        const double v = adx(r) * einv(r);
        if (sp.u(r) < kInf && v > eps) return false;
        if (sp.l(r) > -kInf && v < -eps) return false;
      }
      for (const auto& b : sp.psd) {
        const auto len = static_cast<Eigen::Index>(svec_size(b.dim));
        const Matrix mm = smat(adx.segment(static_cast<Eigen::Index>(b.row), len), b.dim);
        Eigen::SelfAdjointEigenSolver<Matrix> es(mm, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -eps) return false;
      }
      return true;
    };

    const double alpha = settings_.alpha;
    const double sigma = settings_.sigma;
    Norms last{};
    bool have_norms = false;
    int iter = 0;
    for (iter = 1; iter <= settings_.max_iter; ++iter) {
      x_prev = x;
      y_prev = y;
      rhs.head(n) = sigma * x - sp.q;
      rhs.tail(m) = z - y.cwiseQuotient(rho_vec);
      sol = ldlt.solve(rhs);
      const Vector xt = sol.head(n);
      const Vector nu = sol.tail(m);
      const Vector zt = z + (nu - y).cwiseQuotient(rho_vec);
      x = alpha * xt + (1.0 - alpha) * x;
      const Vector zh = alpha * zt + (1.0 - alpha) * z;
      const Vector v = zh + y.cwiseQuotient(rho_vec);
      Vector w = v;
      project(w);
      y = rho_vec.cwiseProduct(v - w);
      z = w;

      const bool check = iter % settings_.check_interval == 0 || iter == settings_.max_iter;
      const bool adapt = settings_.adaptive_rho && iter % settings_.adaptive_interval == 0;
      if (!check && !adapt) continue;

      last = measure();
      have_norms = true;
      if (settings_.record_trace) out.trace.push_back({iter, last.rp, last.rd, last.gap, rho});
      if (check) {
        const double eg = settings_.eps_abs + settings_.eps_rel * std::max(1.0, std::abs(last.pobj));
        if (last.rp <= last.ep && last.rd <= last.ed && std::abs(last.gap) <= eg) {
          st.state = Status::Optimal;
          break;
        }
        if (primal_infeasible()) {
          st.state = Status::Infeasible;
          break;
        }
        if (dual_infeasible()) {
          st.state = Status::Unbounded;
          break;
        }
      }
      if (adapt) {
        const double pr = last.rp / std::max(std::max(last.ax, last.zz), 1e-12);
        const double dr = last.rd / std::max(std::max({last.px, last.aty, last.qq}), 1e-12);
        const double ratio = std::sqrt(pr / std::max(dr, 1e-30));
        const double new_rho = std::clamp(rho * ratio, 1e-6, 1e6);
        if (new_rho > settings_.adaptive_tolerance * rho || new_rho < rho / settings_.adaptive_tolerance) {
          rho = new_rho;
          rho_vec = row_rho(rho);
          factor();
        }
      }
    }
    if (!have_norms) last = measure();
    if (iter > settings_.max_iter) {
      iter = settings_.max_iter;
      const bool close = last.rp <= 10.0 * last.ep && last.rd <= 10.0 * last.ed;
      st.state = close ? Status::Inaccurate : Status::IterationLimit;
    }

    out.point = unscale({x, z, y}, sc);
    st.iterations = iter;
    st.factorizations = factorizations;
    st.primal_residual = last.rp;
    st.dual_residual = last.rd;
    st.gap = last.gap;
    st.objective = prog.objective(out.point.x);
    st.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
  }

  const Settings& settings() const { return settings_; }

 private:
  Settings settings_;
};

inline Solution solve_admm(const ConeProgram& prog, double tol = 1e-6, int max_iter = 50000) {
  Settings s;
  s.eps_abs = tol;
  s.eps_rel = tol;
  s.max_iter = max_iter;
  return AdmmSolver(s).solve(prog);
}

// ---------------------------------------------------------------------------
// Incremental builder used by the model assemblers.

class ProgramBuilder {
 public:
  std::size_t add_variable() { return n_++; }
  std::size_t add_variables(std::size_t k) {
    const auto first = n_;
    n_ += k;
    return first;
  }
  std::size_t num_vars() const { return n_; }
  std::size_t num_rows() const { return rows_; }

  /// Adds l <= sum coef_k x_{var_k} <= u and returns its row.
  std::size_t add_row(const std::vector<std::pair<std::size_t, double>>& terms, double lo, double hi) {
    const auto r = rows_++;
    for (const auto& [v, c] : terms)
      if (c != 0.0) a_.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v), c);
    l_.push_back(lo);
    u_.push_back(hi);
    return r;
  }

  /// Adds a PSD block whose svec entries are given as sparse linear forms.
  std::size_t add_psd_block(std::size_t dim, const std::vector<std::vector<std::pair<std::size_t, double>>>& svec_rows) {
    if (svec_rows.size() != svec_size(dim)) throw std::invalid_argument("PSD block row count");
    const auto first = rows_;
    for (const auto& terms : svec_rows) add_row(terms, 0.0, 0.0);
    psd_.push_back({first, dim});
    return first;
  }

  void add_linear_cost(std::size_t v, double c) { q_.emplace_back(v, c); }
  void add_quadratic_cost(std::size_t i, std::size_t j, double c) {
    p_.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), c);
    if (i != j) p_.emplace_back(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i), c);
  }
  void add_constant(double c) { constant_ += c; }

  ConeProgram build() const {
    ConeProgram prog;
    const auto n = static_cast<Eigen::Index>(n_);
    const auto m = static_cast<Eigen::Index>(rows_);
    prog.P.resize(n, n);
    prog.P.setFromTriplets(p_.begin(), p_.end());
    prog.A.resize(m, n);
    prog.A.setFromTriplets(a_.begin(), a_.end());
    prog.P.makeCompressed();
    prog.A.makeCompressed();
    prog.q = Vector::Zero(n);
    for (const auto& [v, c] : q_) prog.q(static_cast<Eigen::Index>(v)) += c;
    prog.l = Eigen::Map<const Vector>(l_.data(), m);
    prog.u = Eigen::Map<const Vector>(u_.data(), m);
    prog.psd = psd_;
    prog.constant = constant_;
    return prog;
  }

 private:
  std::size_t n_ = 0;
  std::size_t rows_ = 0;
  std::vector<Triplet> a_, p_;
  std::vector<std::pair<std::size_t, double>> q_;
  std::vector<double> l_, u_;
  std::vector<PsdBlock> psd_;
  double constant_ = 0.0;
};

}  // namespace rtsc::conic
