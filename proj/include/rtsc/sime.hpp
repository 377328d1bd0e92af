#pragma once

// SIME analysis on simulated trajectories: critical-machine grouping, the
// one-machine-infinite-bus (OMIB) equivalent, area-based stability margins,
// finite-difference margin sensitivities and critical clearing times.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtsc/dynamics.hpp"

namespace rtsc {

class SimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MachineGrouping {
  std::vector<std::size_t> critical;
  std::vector<std::size_t> noncritical;
};

/// Sorts machines by angle and splits at the largest gap; the advanced side
/// is critical.
inline MachineGrouping identify_critical_machines(const Eigen::VectorXd& angles) {
  const auto n = static_cast<std::size_t>(angles.size());
  if (n < 2) throw SimeError("grouping needs at least two machines");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return angles(a) < angles(b); });
  double best = -1.0;
  std::size_t cut = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double gap = angles(order[k + 1]) - angles(order[k]);
    if (gap > best) {
      best = gap;
      cut = k + 1;
    }
  }
  if (best <= 1e-12) throw SimeError("all rotor angles coincide; no critical group");
  MachineGrouping g;
  g.noncritical.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  g.critical.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  std::sort(g.critical.begin(), g.critical.end());
  std::sort(g.noncritical.begin(), g.noncritical.end());
  return g;
}

/// Grouping at the instability time, or at the largest post-fault angle
/// spread for runs that stay stable.
inline MachineGrouping identify_critical_machines(const Trajectory& tr, double threshold) {
  const auto cls = classify_stability(tr, threshold);
  std::size_t k = cls.k_u;
  if (cls.stable) {
    double best = -1.0;
    for (std::size_t j = std::min(tr.k_clear, tr.steps() - 1); j < tr.steps(); ++j) {
      const auto row = tr.delta.row(static_cast<Eigen::Index>(j));
      const double s = row.maxCoeff() - row.minCoeff();
      if (s > best) {
        best = s;
        k = j;
      }
    }
  }
  return identify_critical_machines(Eigen::VectorXd(tr.delta.row(static_cast<Eigen::Index>(k)).transpose()));
}

struct OmibTrajectory {
  std::vector<double> t;
  std::vector<double> delta;  // rad
  std::vector<double> omega;  // d(delta)/dt, rad/s
  std::vector<double> pm, pe, pa;
  double m = 0.0;             // equivalent inertia, p.u. s^2/rad
  std::size_t k_clear = 0;
  // Post-fault OMIB electrical power with the two groups rotated rigidly from
  // the state at step k to OMIB angle delta; empty when the network is unknown.
  std::function<double(std::size_t, double)> post_pe;
};

inline OmibTrajectory build_omib(const Trajectory& tr, const MachineGrouping& grp) {
  const double ws = tr.omega_s();
  double mc = 0.0, mn = 0.0;
  for (auto i : grp.critical) mc += 2.0 * tr.h(i) / ws;
  for (auto i : grp.noncritical) mn += 2.0 * tr.h(i) / ws;
  if (!(mc > 0.0) || !(mn > 0.0)) throw SimeError("empty or massless machine group");
  OmibTrajectory o;
  o.m = mc * mn / (mc + mn);
  o.t = tr.t;
  o.k_clear = tr.k_clear;
  double pmc = 0.0, pmn = 0.0;
  for (auto i : grp.critical) pmc += tr.pm(i);
  for (auto i : grp.noncritical) pmn += tr.pm(i);
  const double pm = o.m * (pmc / mc - pmn / mn);
  const std::size_t n = tr.steps();
  o.delta.resize(n);
  o.omega.resize(n);
  o.pm.assign(n, pm);
  o.pe.resize(n);
  o.pa.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    double dc = 0.0, dn = 0.0, wc = 0.0, wn = 0.0, pec = 0.0, pen = 0.0;
    for (auto i : grp.critical) {
      const double mi = 2.0 * tr.h(i) / ws;
      dc += mi * tr.delta(kk, i);
      wc += mi * tr.omega(kk, i);
      pec += tr.pe(kk, i);
    }
    for (auto i : grp.noncritical) {
      const double mi = 2.0 * tr.h(i) / ws;
      dn += mi * tr.delta(kk, i);
      wn += mi * tr.omega(kk, i);
      pen += tr.pe(kk, i);
    }
    o.delta[k] = dc / mc - dn / mn;
    o.omega[k] = ws * (wc / mc - wn / mn);
    o.pe[k] = o.m * (pec / mc - pen / mn);
    o.pa[k] = pm - o.pe[k];
  }
  if (tr.emf.rows() == static_cast<Eigen::Index>(n) && tr.y_post.rows() == static_cast<Eigen::Index>(tr.machines())) {
    const double share_c = mn / (mc + mn), share_n = mc / (mc + mn);
    std::vector<char> crit(tr.machines(), 0);
    for (auto i : grp.critical) crit[i] = 1;
    o.post_pe = [ang = Eigen::MatrixXd(tr.delta), emf = CMatrix(tr.emf), y = CMatrix(tr.y_post), crit, share_c,
                 share_n, mc, mn, m = o.m, d0 = o.delta](std::size_t k, double delta) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double s = delta - d0[k];
      const auto ng = static_cast<Eigen::Index>(crit.size());
      CVector e(ng);
      for (Eigen::Index i = 0; i < ng; ++i) {
        const double a = ang(kk, i) + (crit[static_cast<std::size_t>(i)] ? share_c * s : -share_n * s);
        e(i) = emf(kk, i) * std::polar(1.0, a);
      }
      const CVector cur = y * e;
      double pc = 0.0, pn = 0.0;
      for (Eigen::Index i = 0; i < ng; ++i) {
        const double p = (e(i) * std::conj(cur(i))).real();
        (crit[static_cast<std::size_t>(i)] ? pc : pn) += p;
      }
      return m * (pc / mc - pn / mn);
    };
  }
  return o;
}

enum class MarginClass { Stable, Unstable, Marginal };

inline const char* to_string(MarginClass c) {
  switch (c) {
    case MarginClass::Stable: return "stable";
    case MarginClass::Unstable: return "unstable";
    case MarginClass::Marginal: return "marginal";
  }
  return "?";
}

struct StabilityMargin {
  double eta = 0.0;          // p.u. power x rad
  MarginClass cls = MarginClass::Marginal;
  double t_event = 0.0;      // return time (stable) or Pa crossing time (unstable)
  double delta_event = 0.0;  // return angle or crossing angle
  double delta_u = 0.0;      // fitted unstable equilibrium angle (stable case)
};

namespace detail {

// Cubic Hermite on [0,1] with end values y0, y1 and end slopes m0, m1 (per unit tau).
inline double hermite(double y0, double y1, double m0, double m1, double tau) {
  const double t2 = tau * tau, t3 = t2 * tau;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + tau) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
}

inline double hermite_slope(double y0, double y1, double m0, double m1, double tau) {
  const double t2 = tau * tau;
  return (6 * t2 - 6 * tau) * y0 + (3 * t2 - 4 * tau + 1) * m0 + (-6 * t2 + 6 * tau) * y1 + (3 * t2 - 2 * tau) * m1;
}

/// Root of the Hermite cubic in [0,1] given a sign change, by bisection.
inline double hermite_root(double y0, double y1, double m0, double m1) {
  double lo = 0.0, hi = 1.0;
  const double s0 = y0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = hermite(y0, y1, m0, m1, mid);
    if ((v > 0) == (s0 > 0)) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Stationary point of the Hermite cubic in [0,1] (root of its slope).
inline double hermite_extremum(double y0, double y1, double m0, double m1) {
  const double a = hermite_slope(y0, y1, m0, m1, 0.0), b = hermite_slope(y0, y1, m0, m1, 1.0);
  if ((a > 0) == (b > 0)) return std::abs(a) < std::abs(b) ? 0.0 : 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = hermite_slope(y0, y1, m0, m1, mid);
    if ((v > 0) == (a > 0)) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Least-squares fit Pe(delta) = a + A sin(delta) + B cos(delta).
struct PeFit {
  double a = 0.0, A = 0.0, B = 0.0;
  double operator()(double d) const { return a + A * std::sin(d) + B * std::cos(d); }
};

inline PeFit fit_power_angle(const std::vector<double>& delta, const std::vector<double>& pe, std::size_t from,
                             std::size_t to) {
  const auto n = static_cast<Eigen::Index>(to - from);
  if (n < 3) throw SimeError("too few post-fault samples for the power-angle fit");
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double d = delta[from + static_cast<std::size_t>(k)];
    x(k, 0) = 1.0;
    x(k, 1) = std::sin(d);
    x(k, 2) = std::cos(d);
    y(k) = pe[from + static_cast<std::size_t>(k)];
  }
  const Eigen::Vector3d c = x.colPivHouseholderQr().solve(y);
  return {c(0), c(1), c(2)};
}

/// Area margin on the post-fault part of an OMIB trajectory.
///  unstable: -1/2 M w^2 at the point where Pa returns to zero with w > 0;
///  stable: remaining decelerating area from the return angle to the fitted
///  post-fault unstable equilibrium.
inline StabilityMargin compute_margin(const OmibTrajectory& o) {
  StabilityMargin out;
  const std::size_t n = o.t.size();
  if (o.k_clear + 1 >= n) return out;
  const double dt = o.t[1] - o.t[0];
  const std::size_t k0 = o.k_clear;

  if (o.omega[k0] <= 0.0) {
    // Already swinging back at clearing.
    out.cls = MarginClass::Stable;
    out.t_event = o.t[k0];
    out.delta_event = o.delta[k0];
  }
  if (o.omega[k0] > 0.0 && o.pa[k0] >= 0.0) {
    bool decel = false;
    for (std::size_t k = k0; k + 1 < n && o.omega[k] > 0.0; ++k)
      if (o.pa[k] < 0.0) {
        decel = true;
        break;
      }
    if (!decel) {
      out.cls = MarginClass::Unstable;
      out.t_event = o.t[k0];
      out.delta_event = o.delta[k0];
      out.eta = -0.5 * o.m * o.omega[k0] * o.omega[k0];
      return out;
    }
  }

  std::size_t k_return = n;
  if (out.cls != MarginClass::Stable) {
    bool seen_decel = false;
    for (std::size_t k = k0; k + 1 < n; ++k) {
      if (o.pa[k] < 0.0) seen_decel = true;
      const double w0 = o.omega[k], w1 = o.omega[k + 1];
      const double mw0 = o.pa[k] / o.m * dt, mw1 = o.pa[k + 1] / o.m * dt;
      if (w0 > 0.0 && w1 <= 0.0) {
        const double tau = detail::hermite_root(w0, w1, mw0, mw1);
        out.cls = MarginClass::Stable;
        out.t_event = o.t[k] + tau * dt;
        out.delta_event = detail::hermite(o.delta[k], o.delta[k + 1], w0 * dt, w1 * dt, tau);
        k_return = k + 1;
        break;
      }
      if (seen_decel && o.pa[k] < 0.0 && o.pa[k + 1] >= 0.0 && w1 > 0.0) {
        // Speed is stationary where Pa = 0; take the interpolated minimum.
        const double tau = detail::hermite_extremum(w0, w1, mw0, mw1);
        const double wu = detail::hermite(w0, w1, mw0, mw1, tau);
        out.cls = MarginClass::Unstable;
        out.t_event = o.t[k] + tau * dt;
        out.delta_event = detail::hermite(o.delta[k], o.delta[k + 1], w0 * dt, w1 * dt, tau);
        out.eta = -0.5 * o.m * wu * wu;
        return out;
      }
    }
    if (out.cls != MarginClass::Stable) return out;  // undecided within the horizon
  } else {
    k_return = k0 + 1;
  }

  // Later swings: the same unstable event on any subsequent forward swing.
  {
    bool decel = false;
    for (std::size_t k = k_return; k + 1 < n; ++k) {
      const double w0 = o.omega[k], w1 = o.omega[k + 1];
      if (w0 <= 0.0) {
        decel = false;
        continue;
      }
      if (o.pa[k] < 0.0) decel = true;
      if (decel && o.pa[k] < 0.0 && o.pa[k + 1] >= 0.0 && w1 > 0.0) {
        const double mw0 = o.pa[k] / o.m * dt, mw1 = o.pa[k + 1] / o.m * dt;
        const double tau = detail::hermite_extremum(w0, w1, mw0, mw1);
        const double wu = detail::hermite(w0, w1, mw0, mw1, tau);
        return {-0.5 * o.m * wu * wu, MarginClass::Unstable, o.t[k] + tau * dt,
                detail::hermite(o.delta[k], o.delta[k + 1], w0 * dt, w1 * dt, tau), 0.0};
      }
    }
  }

  PeFit fit;
  if (o.post_pe) {
    // Exact sinusoid under rigid group rotation; sample one half period.
    const std::size_t kr = std::min(k_return, n - 1);
    std::vector<double> ds, ps;
    for (int j = 0; j <= 32; ++j) {
      ds.push_back(out.delta_event + kPi * j / 32.0);
      ps.push_back(o.post_pe(kr, ds.back()));
    }
    fit = fit_power_angle(ds, ps, 0, ds.size());
  } else {
    const std::size_t fit_to = std::max(k_return + 1, k0 + 3);
    if (fit_to > n) return {0.0, MarginClass::Marginal, out.t_event, out.delta_event, 0.0};
    fit = fit_power_angle(o.delta, o.pe, k0, fit_to);
  }
  const double pm = o.pm[k0];
  const double r = std::hypot(fit.A, fit.B);
  const double phi = std::atan2(fit.B, fit.A);
  const double dr = out.delta_event;
  double du;
  if (r <= 0.0 || (pm - fit.a) / r >= 1.0) {
    du = kPi / 2 - phi;  // no post-fault equilibrium in the fit: integrate to the peak
  } else {
    du = kPi - std::asin(std::max(-1.0, (pm - fit.a) / r)) - phi;
  }
  while (du < dr) du += 2.0 * kPi;
  while (du - 2.0 * kPi >= dr) du -= 2.0 * kPi;
  const double area = (fit.a - pm) * (du - dr) - fit.A * (std::cos(du) - std::cos(dr)) +
                      fit.B * (std::sin(du) - std::sin(dr));
  out.delta_u = du;
  out.eta = std::max(area, 0.0);
  if (out.eta == 0.0) out.cls = MarginClass::Marginal;
  return out;
}

// ---------------------------------------------------------------------------
// Margins of complete runs

struct MarginRun {
  StabilityMargin margin;
  StabilityClass tds;
  MachineGrouping grouping;
};

inline MarginRun margin_of(const Trajectory& tr, const SimConfig& cfg, const MachineGrouping* fixed = nullptr) {
  MarginRun r;
  r.tds = classify_stability(tr, cfg.threshold);
  r.grouping = fixed ? *fixed : identify_critical_machines(tr, cfg.threshold);
  r.margin = compute_margin(build_omib(tr, r.grouping));
  return r;
}

inline MarginRun simulate_margin(const NetworkCase& c, const OperatingPoint& op, const FaultEvent& ev,
                                 const SimConfig& cfg, const MachineGrouping* fixed = nullptr) {
  return margin_of(run_tds(c, op, ev, cfg), cfg, fixed);
}

/// Perturbation used for generator `gen`: +1 on gen, compensated on the
/// others in proportion to rho.
inline Eigen::VectorXd compensated_direction(const std::vector<double>& rho, std::size_t gen) {
  const auto n = static_cast<Eigen::Index>(rho.size());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  double rest = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j)
    if (j != gen) rest += rho[j];
  u(static_cast<Eigen::Index>(gen)) = 1.0;
  if (rest > 0.0)
    for (std::size_t j = 0; j < rho.size(); ++j)
      if (j != gen) u(static_cast<Eigen::Index>(j)) = -rho[j] / rest;
  return u;
}

struct SensitivityVector {
  Eigen::VectorXd directional;  // d eta / d eps along each compensated direction, per p.u.
  Eigen::VectorXd phi;          // gradient over balanced moves, rho'phi = 0, per p.u.
  std::vector<char> reliable;
  double eta0 = 0.0;
  MarginClass cls0 = MarginClass::Marginal;
  MachineGrouping grouping;
  std::size_t runs = 0;
};

struct SensitivityOptions {
  double step_fraction = 0.01;  // of Pmax
  std::vector<double> rho;      // participation factors; empty = equal
};

/// Gradient phi with u_i . phi = directional_i and rho . phi = 0 (least squares).
inline Eigen::VectorXd gradient_from_directional(const Eigen::VectorXd& directional, const std::vector<double>& rho) {
  const auto n = directional.size();
  Eigen::MatrixXd a(n + 1, n);
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(i) = compensated_direction(rho, static_cast<std::size_t>(i)).transpose();
    b(i) = directional(i);
  }
  for (Eigen::Index j = 0; j < n; ++j) a(n, j) = rho[static_cast<std::size_t>(j)];
  b(n) = 0.0;
  return a.colPivHouseholderQr().solve(b);
}

/// Central-difference margin sensitivities at the operating point `op`
/// (already compensated for the scenario). Two extra runs per generator.
inline SensitivityVector trajectory_sensitivity(const NetworkCase& c, const OperatingPoint& op, const FaultEvent& ev,
                                                const SimConfig& cfg, const SensitivityOptions& opt = {}) {
  const std::size_t ng = c.generators.size();
  std::vector<double> rho = opt.rho.empty() ? std::vector<double>(ng, 1.0 / static_cast<double>(ng)) : opt.rho;
  SensitivityVector sv;
  const MarginRun base = simulate_margin(c, op, ev, cfg);
  sv.runs = 1;
  sv.eta0 = base.margin.eta;
  sv.cls0 = base.margin.cls;
  sv.grouping = base.grouping;
  sv.directional = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ng));
  sv.reliable.assign(ng, 1);
  if (ng < 2) {
    sv.phi = sv.directional;
    return sv;
  }
  const bool base_stable = base.margin.eta > 0.0;
  for (std::size_t g = 0; g < ng; ++g) {
    const Eigen::VectorXd u = compensated_direction(rho, g);
    double step = opt.step_fraction * c.generators[g].pmax;  // MW
    if (!(step > 0.0)) step = opt.step_fraction * c.base_mva;
    for (int attempt = 0; attempt < 2; ++attempt) {
      double eta[2];
      bool flip = false;
      for (int s = 0; s < 2; ++s) {
        OperatingPoint p = op;
        const double sign = s == 0 ? 1.0 : -1.0;
        for (std::size_t j = 0; j < ng; ++j) p.pg_mw[j] += sign * step * u(static_cast<Eigen::Index>(j));
        const MarginRun r = simulate_margin(c, p, ev, cfg, &sv.grouping);
        ++sv.runs;
        eta[s] = r.margin.eta;
        if ((r.margin.eta > 0.0) != base_stable) flip = true;
      }
      sv.directional(static_cast<Eigen::Index>(g)) = (eta[0] - eta[1]) / (2.0 * step / c.base_mva);
      if (!flip) break;
      if (attempt == 0) {
        step *= 0.5;
      } else {
        sv.reliable[g] = 0;
      }
    }
  }
  sv.phi = gradient_from_directional(sv.directional, rho);
  return sv;
}

/// Linear stability cut  phi . (P_G - P_G^0) + eta0 >= 0,  P_G in p.u.
struct TscConstraint {
  std::string contingency;
  std::size_t scenario = 0;
  Eigen::VectorXd phi;
  double eta0 = 0.0;
  Eigen::VectorXd pg0;  // p.u.

  double value(const Eigen::VectorXd& pg) const { return phi.dot(pg - pg0) + eta0; }
};

inline TscConstraint build_constraint(const Eigen::VectorXd& phi, double eta0, const Eigen::VectorXd& pg0,
                                      std::string contingency = {}, std::size_t scenario = 0) {
  if (phi.size() != pg0.size()) throw SimeError("sensitivity and base dispatch differ in length");
  return {std::move(contingency), scenario, phi, eta0, pg0};
}

// ---------------------------------------------------------------------------
// Critical clearing time

struct CctPoint {
  double t_clear;
  double eta;
  bool stable;  // by the angle-spread test
};

struct CctResult {
  double cct = 0.0;
  std::vector<CctPoint> table;
  double fit_residual = 0.0;
  bool refined = false;
};

/// Margin as a function of clearing time: four samples across the bracket, a
/// linear fit through them, and bisection on the sign when the fit is poor.
inline CctResult estimate_cct(const std::function<MarginRun(double)>& margin_at, double t_lo, double t_hi,
                              double dt, double fit_tolerance = 0.02) {
  if (!(t_hi > t_lo)) throw SimeError("empty clearing-time bracket");
  CctResult res;
  auto eval = [&](double t) {
    const MarginRun r = margin_at(t);
    res.table.push_back({t, r.margin.eta, r.tds.stable});
    return r.margin.eta;
  };
  std::vector<double> ts, es;
  for (int k = 0; k < 4; ++k) {
    const double t = t_lo + (t_hi - t_lo) * k / 3.0;
    ts.push_back(t);
    es.push_back(eval(t));
  }
  if ((es.front() > 0.0) == (es.back() > 0.0)) {
    std::ostringstream msg;
    msg << "no margin sign change in clearing-time bracket; margins:";
    for (std::size_t k = 0; k < ts.size(); ++k) msg << " " << ts[k] << ":" << es[k];
    throw SimeError(msg.str());
  }
  // Linear least squares eta = p + q t.
  Eigen::MatrixXd a(4, 2);
  Eigen::VectorXd b(4);
  for (int k = 0; k < 4; ++k) {
    a(k, 0) = 1.0;
    a(k, 1) = ts[static_cast<std::size_t>(k)];
    b(k) = es[static_cast<std::size_t>(k)];
  }
  const Eigen::Vector2d pq = a.colPivHouseholderQr().solve(b);
  const double scale = std::max(std::abs(b.maxCoeff()), std::abs(b.minCoeff()));
  res.fit_residual = (a * pq - b).lpNorm<Eigen::Infinity>() / std::max(scale, 1e-12);
  double root = pq(1) != 0.0 ? -pq(0) / pq(1) : 0.5 * (t_lo + t_hi);
  if (res.fit_residual <= fit_tolerance && root >= t_lo && root <= t_hi) {
    res.cct = root;
  } else {
    res.refined = true;
    std::size_t k = 0;
    while (k + 1 < ts.size() && (es[k] > 0.0) == (es[k + 1] > 0.0)) ++k;
    double lo = ts[k], hi = ts[k + 1], elo = es[k], ehi = es[k + 1];
    while (hi - lo > 2.0 * dt) {
      const double mid = dt * std::round(0.5 * (lo + hi) / dt);
      if (mid <= lo || mid >= hi) break;
      const double em = eval(mid);
      if ((em > 0.0) == (elo > 0.0)) {
        lo = mid;
        elo = em;
      } else {
        hi = mid;
        ehi = em;
      }
    }
    res.cct = elo != ehi ? lo + (hi - lo) * elo / (elo - ehi) : 0.5 * (lo + hi);
  }
  std::sort(res.table.begin(), res.table.end(), [](const CctPoint& x, const CctPoint& y) { return x.t_clear < y.t_clear; });
  return res;
}

inline CctResult estimate_cct(const NetworkCase& c, const OperatingPoint& op, const FaultEvent& templ,
                              const SimConfig& cfg, double t_lo, double t_hi) {
  const Equilibrium eq = initialize_equilibrium(c, op, cfg.model);
  auto at = [&](double t) {
    FaultEvent ev = templ;
    ev.t_clear = ev.t0 + t;
    return margin_of(run_tds(c, eq, ev, cfg, op.gamma), cfg);
  };
  CctResult r = estimate_cct(at, t_lo, t_hi, cfg.dt);
  return r;
}

}  // namespace rtsc
