#pragma once

// Scenario-based semidefinite relaxation of the dispatch problem with power
// flow routers. The decision matrix W = V V^* is taken over stacked branch
// terminal voltages (two per line); W_i = |V_i|^2 per bus ties terminals to
// their buses. The Hermitian W is parametrised by its real symmetric and
// imaginary skew parts and enters the conic program through its realification
// [Re W, -Im W; Im W, Re W] >= 0.
//
// The network balance holds at the forecast renewable output; each scenario
// adds compensated generation limits and its stability cuts, and generator
// limits are also enforced at the two extremes of the total renewable
// deviation over the prediction interval.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtsc/conic.hpp"
#include "rtsc/grid.hpp"
#include "rtsc/scenario.hpp"
#include "rtsc/sime.hpp"

namespace rtsc {

class OpfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecourseCost {
  Eigen::MatrixXd lambda;     // covariance of prediction errors, MW^2
  double total = 0.0;         // sum of all entries of lambda
  std::vector<double> c2p;    // c'_2i, $/h
};

/// Independent farms with errors uniform on the interval around the forecast:
/// variance (half-width)^2 / 3.
inline RecourseCost expected_cost_coeff(const NetworkCase& c, const PredictionInterval& iv) {
  if (iv.dim() != c.wind_farms.size()) throw OpfError("interval dimension differs from farm count");
  RecourseCost rc;
  const auto r = static_cast<Eigen::Index>(iv.dim());
  rc.lambda = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    const double half = 0.5 * (iv.upper[k] - iv.lower[k]);
    rc.lambda(k, k) = half * half / 3.0;
  }
  rc.total = rc.lambda.sum();
  for (const auto& g : c.generators) rc.c2p.push_back(rc.total * g.c2);
  return rc;
}

inline std::vector<double> equal_participation(std::size_t ng) {
  return std::vector<double>(ng, ng ? 1.0 / static_cast<double>(ng) : 0.0);
}

/// Expected cost, $/h: generation cost plus the recourse term.
inline double objective_value(const NetworkCase& c, const std::vector<double>& pg_mw, const std::vector<double>& rho,
                              const RecourseCost& rc) {
  double s = 0.0;
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    s += c.generators[g].cost(pg_mw[g]);
    if (g < rho.size() && g < rc.c2p.size()) s += rc.c2p[g] * rho[g] * rho[g];
  }
  return s;
}

/// Generator output after the participation-factor response to the total
/// renewable deviation.
struct CompensatedDispatch {
  std::vector<double> pg_mw;
  std::vector<std::size_t> violations;  // generators outside [Pmin, Pmax]
};

inline CompensatedDispatch evaluate_dispatch(const NetworkCase& c, const std::vector<double>& pg_mw,
                                             const std::vector<double>& scenario_mw, const std::vector<double>& rho,
                                             const std::vector<double>& forecast_mw, double tol = 1e-6) {
  double dev = 0.0;
  for (std::size_t k = 0; k < scenario_mw.size(); ++k) dev += scenario_mw[k] - forecast_mw[k];
  CompensatedDispatch out;
  out.pg_mw = pg_mw;
  for (std::size_t g = 0; g < pg_mw.size(); ++g) {
    // Generators pick up the shortfall: more wind means less conventional output.
    out.pg_mw[g] = pg_mw[g] - rho[g] * dev;
    if (out.pg_mw[g] < c.generators[g].pmin - tol || out.pg_mw[g] > c.generators[g].pmax + tol)
      out.violations.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct OpfOptions {
  bool use_pfr = true;              // false collapses every router to gamma = 1
  double loss_penalty = 0.1;        // $/MVAh on total active plus reactive generation
  std::vector<double> rho;          // empty = equal
  std::vector<double> wind_mw;      // forecast used for the balance; empty = case forecast
  bool robust_limits = true;        // enforce limits at the interval extremes
  PredictionInterval interval;      // for the extremes and the recourse term; dim 0 = none
  double margin_floor = 0.0;        // cuts demand eta >= floor
};

struct SdpModel {
  conic::ConeProgram prog;
  std::vector<std::string> row_kind;
  std::vector<std::string> row_where;
  std::map<std::string, std::size_t> counts;

  NetworkCase grid;
  TerminalMap terminals;
  std::size_t nt = 0;                  // terminals = 2E
  std::size_t re0 = 0, im0 = 0, wb0 = 0, pg0 = 0, qg0 = 0;
  std::vector<double> rho;
  std::vector<double> wind_mw;
  double recourse = 0.0;               // constant recourse cost, $/h
  std::size_t scenarios = 0;
  std::size_t cuts = 0;
  std::vector<PfrLimits> limits;       // effective limits per line

  std::size_t re(std::size_t p, std::size_t q) const {
    if (p < q) std::swap(p, q);
    return re0 + p * (p + 1) / 2 + q;
  }
  /// Index and sign of Im W(p,q); p == q has no variable.
  std::pair<std::size_t, double> im(std::size_t p, std::size_t q) const {
    if (p > q) return {im0 + p * (p - 1) / 2 + q, 1.0};
    return {im0 + q * (q - 1) / 2 + p, -1.0};
  }
  std::size_t count(const std::string& kind) const {
    auto it = counts.find(kind);
    return it == counts.end() ? 0 : it->second;
  }
};

namespace detail {

using Terms = std::vector<std::pair<std::size_t, double>>;

inline void add_re(Terms& t, const SdpModel& m, std::size_t p, std::size_t q, double c) { t.push_back({m.re(p, q), c}); }
inline void add_im(Terms& t, const SdpModel& m, std::size_t p, std::size_t q, double c) {
  if (p == q) return;
  auto [v, s] = m.im(p, q);
  t.push_back({v, s * c});
}

}  // namespace detail

/// Assembles the relaxation. Cuts refer to scenarios by index in `scenarios`.
inline SdpModel build_model(const NetworkCase& c, const ScenarioSet& scenarios, const std::vector<TscConstraint>& cuts,
                            const OpfOptions& opt = {}) {
  using detail::Terms;
  SdpModel m;
  m.grid = c;
  m.terminals = build_terminal_map(c);
  m.nt = m.terminals.size();
  const std::size_t n = c.buses.size();
  const std::size_t ng = c.generators.size();
  const double base = c.base_mva;
  if (ng == 0) throw OpfError("case has no generators");
  m.rho = opt.rho.empty() ? equal_participation(ng) : opt.rho;
  if (m.rho.size() != ng) throw OpfError("participation factors have wrong length");
  m.wind_mw = opt.wind_mw.empty() ? forecast(c) : opt.wind_mw;
  if (m.wind_mw.size() != c.wind_farms.size()) throw OpfError("forecast has wrong farm count");
  for (const auto& sc : scenarios.scenarios)
    if (sc.p_hat_w.size() != c.wind_farms.size()) throw OpfError("scenario has wrong farm count");
  for (const auto& cut : cuts) {
    if (cut.scenario >= scenarios.size())
      throw OpfError("cut references unknown scenario " + std::to_string(cut.scenario));
    if (static_cast<std::size_t>(cut.phi.size()) != ng || static_cast<std::size_t>(cut.pg0.size()) != ng)
      throw OpfError("cut has wrong generator count");
  }
  m.limits.resize(c.lines.size());
  for (std::size_t k = 0; k < c.lines.size(); ++k)
    if (opt.use_pfr && c.lines[k].has_pfr) m.limits[k] = c.lines[k].pfr;

  conic::ProgramBuilder b;
  m.re0 = b.add_variables(m.nt * (m.nt + 1) / 2);
  m.im0 = b.add_variables(m.nt * (m.nt - 1) / 2);
  m.wb0 = b.add_variables(n);
  m.pg0 = b.add_variables(ng);
  m.qg0 = b.add_variables(ng);

  auto row = [&](const Terms& t, double lo, double hi, const std::string& kind, const std::string& where) {
    b.add_row(t, lo, hi);
    m.row_kind.push_back(kind);
    m.row_where.push_back(where);
    ++m.counts[kind];
  };

  // Objective: generation cost, recourse constant and the exactness penalty.
  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = c.generators[g];
    b.add_quadratic_cost(m.pg0 + g, m.pg0 + g, 2.0 * gen.c2 * base * base);
    b.add_linear_cost(m.pg0 + g, gen.c1 * base + opt.loss_penalty * base);
    b.add_linear_cost(m.qg0 + g, opt.loss_penalty * base);
    b.add_constant(gen.c0);
  }
  if (opt.interval.dim() > 0) {
    const RecourseCost rc = expected_cost_coeff(c, opt.interval);
    for (std::size_t g = 0; g < ng; ++g) m.recourse += rc.c2p[g] * m.rho[g] * m.rho[g];
    b.add_constant(m.recourse);
  }

  // Power balance at the forecast.
  std::vector<double> pinj(n, 0.0), qinj(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pinj[i] = -c.buses[i].pd / base;
    qinj[i] = -c.buses[i].qd / base;
  }
  for (std::size_t w = 0; w < c.wind_farms.size(); ++w) pinj[c.bus_index(c.wind_farms[w].bus)] += m.wind_mw[w] / base;
  for (std::size_t i = 0; i < n; ++i) {
    Terms tp, tq;
    for (auto t : m.terminals.at_bus[i]) {
      const auto& line = c.lines[m.terminals.terminals[t].line];
      const Complex ys = line.series_admittance();
      const Complex y1 = ys + line.shunt_admittance();
      const auto p = m.terminals.partner(t);
      detail::add_re(tp, m, t, t, y1.real());
      detail::add_re(tq, m, t, t, -y1.imag());
      detail::add_re(tp, m, t, p, -ys.real());
      detail::add_im(tp, m, t, p, -ys.imag());
      detail::add_im(tq, m, t, p, -ys.real());
      detail::add_re(tq, m, t, p, ys.imag());
    }
    tp.push_back({m.wb0 + i, c.buses[i].gs / base});
    tq.push_back({m.wb0 + i, -c.buses[i].bs / base});
    for (std::size_t g = 0; g < ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) {
        tp.push_back({m.pg0 + g, -1.0});
        tq.push_back({m.qg0 + g, -1.0});
      }
    const std::string where = "bus " + std::to_string(c.buses[i].id);
    row(tp, pinj[i], pinj[i], "balance_p", where);
    row(tq, qinj[i], qinj[i], "balance_q", where);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& bus = c.buses[i];
    row({{m.wb0 + i, 1.0}}, bus.vmin * bus.vmin, bus.vmax * bus.vmax, "voltage", "bus " + std::to_string(bus.id));
  }

  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = c.generators[g];
    const std::string where = "gen " + std::to_string(gen.id);
    row({{m.qg0 + g, 1.0}}, gen.qmin / base, gen.qmax / base, "q_limit", where);
    row({{m.pg0 + g, 1.0}}, gen.pmin / base, gen.pmax / base, "p_limit_base", where);
  }
  const auto fc = m.wind_mw;
  auto deviation = [&](const std::vector<double>& p) {
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) d += (p[k] - fc[k]) / base;
    return d;
  };
  if (opt.robust_limits && opt.interval.dim() > 0) {
    const double dlo = deviation(opt.interval.lower), dhi = deviation(opt.interval.upper);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& gen = c.generators[g];
      // pg - rho*dev within limits for both extremes
      const double lo = gen.pmin / base + m.rho[g] * std::max(dlo, dhi);
      const double hi = gen.pmax / base + m.rho[g] * std::min(dlo, dhi);
      row({{m.pg0 + g, 1.0}}, lo, hi, "p_limit_robust", "gen " + std::to_string(gen.id));
    }
  }
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const double d = deviation(scenarios.scenarios[s].p_hat_w);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& gen = c.generators[g];
      row({{m.pg0 + g, 1.0}}, gen.pmin / base + m.rho[g] * d, gen.pmax / base + m.rho[g] * d, "p_limit",
          "scenario " + std::to_string(s) + " gen " + std::to_string(gen.id));
    }
  }
  m.scenarios = scenarios.size();

  // Router limits: terminal magnitudes against the bus, and angle spreads of
  // terminal pairs sharing a bus.
  for (std::size_t t = 0; t < m.nt; ++t) {
    const auto& term = m.terminals.terminals[t];
    const auto& lim = m.limits[term.line];
    const std::string where = "terminal " + std::to_string(t);
    Terms lo_t{{m.re(t, t), 1.0}, {m.wb0 + term.bus, -lim.gamma_min * lim.gamma_min}};
    if (lim.gamma_min == lim.gamma_max) {
      row(lo_t, 0.0, 0.0, "pfr_magnitude", where);
    } else {
      row(lo_t, 0.0, conic::kInf, "pfr_magnitude", where);
      row({{m.re(t, t), 1.0}, {m.wb0 + term.bus, -lim.gamma_max * lim.gamma_max}}, -conic::kInf, 0.0,
          "pfr_magnitude", where);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ts = m.terminals.at_bus[i];
    for (std::size_t a = 0; a < ts.size(); ++a)
      for (std::size_t bb = a + 1; bb < ts.size(); ++bb) {
        const auto j = ts[a], k = ts[bb];
        const auto& lj = m.limits[m.terminals.terminals[j].line];
        const auto& lk = m.limits[m.terminals.terminals[k].line];
        const double th_lo = lj.beta_min - lk.beta_max;
        const double th_hi = lj.beta_max - lk.beta_min;
        const std::string where = "terminals " + std::to_string(j) + "," + std::to_string(k);
        if (th_lo == 0.0 && th_hi == 0.0) {
          Terms t;
          detail::add_im(t, m, j, k, 1.0);
          row(t, 0.0, 0.0, "pfr_angle", where);
        } else {
          Terms tl, th;
          detail::add_im(tl, m, j, k, 1.0);
          detail::add_re(tl, m, j, k, -std::tan(th_lo));
          detail::add_im(th, m, j, k, 1.0);
          detail::add_re(th, m, j, k, -std::tan(th_hi));
          row(tl, 0.0, conic::kInf, "pfr_angle", where);
          row(th, -conic::kInf, 0.0, "pfr_angle", where);
        }
        const double cmin = lj.gamma_min * lk.gamma_min * std::cos(std::max(std::abs(th_lo), std::abs(th_hi)));
        Terms tc;
        detail::add_re(tc, m, j, k, 1.0);
        tc.push_back({m.wb0 + i, -cmin});
        const bool fixed = lj.degenerate() && lk.degenerate();
        row(tc, 0.0, fixed ? 0.0 : conic::kInf, "pfr_cos", where);
      }
  }

  for (const auto& cut : cuts) {
    Terms t;
    double rhs = opt.margin_floor - cut.eta0;
    for (std::size_t g = 0; g < ng; ++g) {
      t.push_back({m.pg0 + g, cut.phi(static_cast<Eigen::Index>(g))});
      rhs += cut.phi(static_cast<Eigen::Index>(g)) * cut.pg0(static_cast<Eigen::Index>(g));
    }
    row(t, rhs, conic::kInf, "stability", cut.contingency + " scenario " + std::to_string(cut.scenario));
  }
  m.cuts = cuts.size();

  // PSD block over the realified W.
  const std::size_t d = 2 * m.nt;
  std::vector<Terms> svec_rows;
  svec_rows.reserve(conic::svec_size(d));
  const double r2 = std::sqrt(2.0);
  for (std::size_t col = 0; col < d; ++col)
    for (std::size_t r = col; r < d; ++r) {
      Terms t;
      const double s = r == col ? 1.0 : r2;
      if (r < m.nt) {
        detail::add_re(t, m, r, col, s);
      } else if (col >= m.nt) {
        detail::add_re(t, m, r - m.nt, col - m.nt, s);
      } else {
        detail::add_im(t, m, r - m.nt, col, s);
      }
      svec_rows.push_back(std::move(t));
    }
  b.add_psd_block(d, svec_rows);
  for (std::size_t k = 0; k < svec_rows.size(); ++k) {
    m.row_kind.push_back("psd");
    m.row_where.push_back("W");
  }
  ++m.counts["psd"];
  m.prog = b.build();
  return m;
}

/// Constraint-tagged sparse triplets: one "row kind where lo hi" line per
/// row followed by its "a col value" entries, and the objective.
inline void write_model(std::ostream& out, const SdpModel& m) {
  out << std::setprecision(17);
  out << "# rtsc-model 1\nvars " << m.prog.num_vars() << "\nrows " << m.prog.num_rows() << "\n";
  const conic::SparseMatrix at = m.prog.A.transpose();
  for (Eigen::Index r = 0; r < at.outerSize(); ++r) {
    out << "row " << r << ' ' << m.row_kind[static_cast<std::size_t>(r)] << " [" << m.row_where[static_cast<std::size_t>(r)]
        << "] " << m.prog.l(r) << ' ' << m.prog.u(r) << "\n";
    for (conic::SparseMatrix::InnerIterator it(at, r); it; ++it) out << "a " << it.row() << ' ' << it.value() << "\n";
  }
  for (Eigen::Index k = 0; k < m.prog.P.outerSize(); ++k)
    for (conic::SparseMatrix::InnerIterator it(m.prog.P, k); it; ++it)
      if (it.row() >= it.col()) out << "P " << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
  for (Eigen::Index j = 0; j < m.prog.q.size(); ++j)
    if (m.prog.q(j) != 0.0) out << "q " << j << ' ' << m.prog.q(j) << "\n";
  for (const auto& b : m.prog.psd) out << "psd " << b.row << ' ' << b.dim << "\n";
  out << "constant " << m.prog.constant << "\n";
}

// ---------------------------------------------------------------------------

struct Rank1Recovery {
  CVector v_term;
  CVector v_bus;
  TerminalRatios gamma;
  double ratio = 0.0;     // lambda1 / |lambda2| of the solver's W
  double residual = 0.0;  // ||W - v v^*||_F
  bool exact = false;     // ratio at or above the threshold
};

inline constexpr double kExactnessThreshold = 1e5;
inline constexpr double kCompletionTolerance = 1e-6;

/// Voltages from the entries of W that the constraints actually bind: bus
/// magnitudes from W_i, terminal magnitudes from W_tt, and angles propagated
/// along the lines. Buses joined by plain lines share a reference; the groups
/// left after removing router lines are offset so that each router stays
/// inside its angle window. The reference bus ends up at zero angle.
inline Rank1Recovery recover_rank1(const CMatrix& w, const TerminalMap& tm, const NetworkCase& c,
                                   const std::vector<double>& w_bus, const std::vector<PfrLimits>& limits = {}) {
  Rank1Recovery out;
  const auto nt = w.rows();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(w, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw OpfError("eigensolver failed on W");
  const double l1 = nt > 0 ? es.eigenvalues()(nt - 1) : 0.0;
  const double l2 = nt > 1 ? es.eigenvalues()(nt - 2) : 0.0;
  out.ratio = std::abs(l2) > 0.0 ? l1 / std::abs(l2) : std::numeric_limits<double>::infinity();
  out.exact = out.ratio >= kExactnessThreshold;

  const std::size_t n = c.buses.size();
  const std::size_t ne = c.lines.size();
  auto lim = [&](std::size_t line) { return limits.empty() ? PfrLimits{} : limits[line]; };
  auto arg_w = [&](std::size_t p, std::size_t q) {
    return std::arg(w(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)));
  };

  // Bus angles inside groups joined by plain lines.
  std::vector<int> group(n, -1);
  std::vector<double> theta(n, 0.0);
  int groups = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (group[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    group[s] = groups;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (auto t : tm.at_bus[i]) {
        if (!lim(tm.terminals[t].line).degenerate()) continue;
        const auto j = tm.terminals[t].other;
        if (group[j] >= 0) continue;
        group[j] = groups;
        theta[j] = theta[i] - arg_w(t, tm.partner(t));
        stack.push_back(j);
      }
    }
    ++groups;
  }

  // Group offsets: router line k with terminal t at bus i and p at bus j
  // admits theta_i - theta_j in arg W_tp + [-(bmax-bmin), bmax-bmin].
  std::vector<double> offset(static_cast<std::size_t>(groups), 0.0);
  std::vector<char> placed(static_cast<std::size_t>(groups), 0);
  const int root = group[c.ref_bus_index()];
  placed[static_cast<std::size_t>(root)] = 1;
  for (bool grew = true; grew;) {
    grew = false;
    for (int gidx = 0; gidx < groups; ++gidx) {
      if (placed[static_cast<std::size_t>(gidx)]) continue;
      double lo = -1e300, hi = 1e300, first_mid = 0.0;
      bool any = false;
      for (std::size_t k = 0; k < ne; ++k) {
        const auto& l = lim(k);
        if (l.degenerate()) continue;
        for (std::size_t e = 0; e < 2; ++e) {
          const std::size_t t = 2 * k + e, p = tm.partner(t);
          const auto i = tm.terminals[t].bus, j = tm.terminals[p].bus;
          if (group[j] != gidx || group[i] == gidx || !placed[static_cast<std::size_t>(group[i])]) continue;
          const double width = l.beta_max - l.beta_min;
          const double ti = theta[i] + offset[static_cast<std::size_t>(group[i])];
          // theta_j = ti - a - s with s in [-width, width]
          double centre = ti - arg_w(t, p) - theta[j];
          if (any) centre = lo + std::remainder(centre - lo, 2.0 * kPi);
          if (!any) first_mid = centre;
          lo = std::max(lo, centre - width);
          hi = std::min(hi, centre + width);
          any = true;
        }
      }
      if (!any) continue;
      offset[static_cast<std::size_t>(gidx)] = lo <= hi ? 0.5 * (lo + hi) : first_mid;
      placed[static_cast<std::size_t>(gidx)] = 1;
      grew = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) theta[i] += offset[static_cast<std::size_t>(group[i])];
  const double ref_angle = theta[c.ref_bus_index()];
  for (auto& a : theta) a -= ref_angle;

  out.v_bus.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.v_bus(static_cast<Eigen::Index>(i)) = std::polar(std::sqrt(std::max(w_bus[i], 0.0)), theta[i]);
  out.v_term.resize(nt);
  for (std::size_t k = 0; k < ne; ++k) {
    const auto& l = lim(k);
    const std::size_t t = 2 * k, p = t + 1;
    const auto i = tm.terminals[t].bus, j = tm.terminals[p].bus;
    double bt = 0.0, bp = 0.0;
    if (!l.degenerate()) {
      // bt - bp = phi with both inside [bmin, bmax], as centred as possible
      const double phi = std::remainder(arg_w(t, p) - (theta[i] - theta[j]), 2.0 * kPi);
      const double mid = 0.5 * (l.beta_min + l.beta_max);
      const double lo = l.beta_min + std::max(phi, 0.0), hi = l.beta_max + std::min(phi, 0.0);
      bt = lo <= hi ? std::clamp(mid + 0.5 * phi, lo, hi) : mid + 0.5 * phi;
      bp = bt - phi;
    }
    const auto vt = std::sqrt(std::max(w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)).real(), 0.0));
    const auto vp = std::sqrt(std::max(w(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)).real(), 0.0));
    out.v_term(static_cast<Eigen::Index>(t)) = std::polar(vt, theta[i] + bt);
    out.v_term(static_cast<Eigen::Index>(p)) = std::polar(vp, theta[j] + bp);
  }
  out.residual = (w - out.v_term * out.v_term.adjoint()).norm();
  out.gamma.resize(tm.size());
  for (std::size_t t = 0; t < tm.size(); ++t) {
    const auto& term = tm.terminals[t];
    out.gamma[t] = lim(term.line).degenerate()
                       ? Complex(1.0)
                       : out.v_term(static_cast<Eigen::Index>(t)) / out.v_bus(static_cast<Eigen::Index>(term.bus));
  }
  return out;
}

/// Primal point of the model built from voltages and a dispatch (p.u.).
inline conic::Vector model_point(const SdpModel& m, const CVector& v_term, const CVector& v_bus,
                                 const std::vector<double>& pg, const std::vector<double>& qg) {
  conic::Vector x = conic::Vector::Zero(static_cast<Eigen::Index>(m.prog.num_vars()));
  for (std::size_t p = 0; p < m.nt; ++p)
    for (std::size_t q = 0; q <= p; ++q) {
      const Complex w = v_term(static_cast<Eigen::Index>(p)) * std::conj(v_term(static_cast<Eigen::Index>(q)));
      x(static_cast<Eigen::Index>(m.re(p, q))) = w.real();
      if (p > q) {
        auto [v, s] = m.im(p, q);
        x(static_cast<Eigen::Index>(v)) = s * w.imag();
      }
    }
  for (std::size_t i = 0; i < m.grid.buses.size(); ++i)
    x(static_cast<Eigen::Index>(m.wb0 + i)) = std::norm(v_bus(static_cast<Eigen::Index>(i)));
  for (std::size_t g = 0; g < pg.size(); ++g) {
    x(static_cast<Eigen::Index>(m.pg0 + g)) = pg[g];
    x(static_cast<Eigen::Index>(m.qg0 + g)) = qg[g];
  }
  return x;
}

/// Largest bound violation over the non-PSD rows.
inline double row_violation(const SdpModel& m, const conic::Vector& x) {
  const conic::Vector ax = m.prog.A * x;
  double v = 0.0;
  for (Eigen::Index r = 0; r < ax.size(); ++r) {
    if (m.row_kind[static_cast<std::size_t>(r)] == "psd") continue;
    v = std::max({v, m.prog.l(r) - ax(r), ax(r) - m.prog.u(r)});
  }
  return v;
}

/// Bus injections from terminal voltages, p.u.
inline CVector terminal_injections(const NetworkCase& c, const TerminalMap& tm, const CVector& v_term,
                                   const CVector& v_bus) {
  CVector s = CVector::Zero(static_cast<Eigen::Index>(c.buses.size()));
  for (std::size_t t = 0; t < tm.size(); ++t) {
    const auto& term = tm.terminals[t];
    const auto& line = c.lines[term.line];
    const Complex ys = line.series_admittance();
    const Complex vt = v_term(static_cast<Eigen::Index>(t));
    const Complex vp = v_term(static_cast<Eigen::Index>(tm.partner(t)));
    s(static_cast<Eigen::Index>(term.bus)) += vt * std::conj((ys + line.shunt_admittance()) * vt - ys * vp);
  }
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    s(static_cast<Eigen::Index>(i)) +=
        std::conj(Complex(c.buses[i].gs, c.buses[i].bs) / c.base_mva) * std::norm(v_bus(static_cast<Eigen::Index>(i)));
  return s;
}

struct DispatchSolution {
  std::vector<double> pg_mw, qg_mw;
  std::vector<double> rho;
  std::vector<double> wind_mw;         // forecast the balance was built on
  TerminalRatios gamma;
  CVector v_bus, v_term;
  std::vector<double> vg;              // voltage magnitude at each generator's bus
  double objective = 0.0;              // expected cost, $/h
  double solver_objective = 0.0;       // including the exactness penalty
  double exactness_ratio = 0.0;
  double rank1_residual = 0.0;
  double completion_violation = 0.0;   // rows violated by the rank-1 point from the recovered voltages
  bool exact = false;                  // the ratio test passes or the rank-1 point is feasible
  double balance_residual = 0.0;       // recovered voltages vs dispatched injections, p.u.
  conic::SolverStatus status;
  CMatrix w;
  std::vector<double> w_bus;
};

inline conic::Settings default_opf_settings() {
  conic::Settings s;
  s.eps_abs = 1e-8;
  s.eps_rel = 1e-8;
  s.max_iter = 50000;
  return s;
}

inline DispatchSolution solve(const SdpModel& m, const conic::Settings& settings = default_opf_settings()) {
  const auto sol = conic::AdmmSolver(settings).solve(m.prog);
  DispatchSolution d;
  d.status = sol.status;
  const auto& x = sol.point.x;
  const auto& c = m.grid;
  const std::size_t ng = c.generators.size();
  const double base = c.base_mva;
  d.rho = m.rho;
  d.wind_mw = m.wind_mw;
  for (std::size_t g = 0; g < ng; ++g) {
    d.pg_mw.push_back(x(static_cast<Eigen::Index>(m.pg0 + g)) * base);
    d.qg_mw.push_back(x(static_cast<Eigen::Index>(m.qg0 + g)) * base);
  }
  d.solver_objective = sol.status.objective;
  d.objective = m.recourse;
  for (std::size_t g = 0; g < ng; ++g) d.objective += c.generators[g].cost(d.pg_mw[g]);
  if (sol.status.state == conic::Status::Infeasible || sol.status.state == conic::Status::Unbounded) return d;

  const auto nt = static_cast<Eigen::Index>(m.nt);
  d.w.resize(nt, nt);
  for (Eigen::Index p = 0; p < nt; ++p)
    for (Eigen::Index q = 0; q < nt; ++q) {
      double im = 0.0;
      if (p != q) {
        auto [v, s] = m.im(static_cast<std::size_t>(p), static_cast<std::size_t>(q));
        im = s * x(static_cast<Eigen::Index>(v));
      }
      d.w(p, q) = Complex(x(static_cast<Eigen::Index>(m.re(static_cast<std::size_t>(p), static_cast<std::size_t>(q)))), im);
    }
  for (std::size_t i = 0; i < c.buses.size(); ++i) d.w_bus.push_back(x(static_cast<Eigen::Index>(m.wb0 + i)));
  const Rank1Recovery rec = recover_rank1(d.w, m.terminals, c, d.w_bus, m.limits);
  d.v_bus = rec.v_bus;
  d.v_term = rec.v_term;
  d.gamma = rec.gamma;
  d.exactness_ratio = rec.ratio;
  d.rank1_residual = rec.residual;
  const conic::Vector xr = model_point(m, d.v_term, d.v_bus, std::vector<double>(x.data() + m.pg0, x.data() + m.pg0 + ng),
                                       std::vector<double>(x.data() + m.qg0, x.data() + m.qg0 + ng));
  d.completion_violation = row_violation(m, xr);
  d.exact = rec.exact || d.completion_violation <= kCompletionTolerance;
  for (const auto& g : c.generators) d.vg.push_back(std::abs(d.v_bus(static_cast<Eigen::Index>(c.bus_index(g.bus)))));

  const CVector s = terminal_injections(c, m.terminals, d.v_term, d.v_bus);
  std::vector<Complex> target(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) target[i] = Complex(-c.buses[i].pd, -c.buses[i].qd) / base;
  for (std::size_t w = 0; w < c.wind_farms.size(); ++w) target[c.bus_index(c.wind_farms[w].bus)] += m.wind_mw[w] / base;
  for (std::size_t g = 0; g < ng; ++g)
    target[c.bus_index(c.generators[g].bus)] += Complex(d.pg_mw[g], d.qg_mw[g]) / base;
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    d.balance_residual = std::max(d.balance_residual, std::abs(s(static_cast<Eigen::Index>(i)) - target[i]));
  return d;
}

/// Operating point for simulation: compensated dispatch for a scenario,
/// generator voltages and router settings from the solution.
inline OperatingPoint operating_point(const NetworkCase& c, const DispatchSolution& d,
                                      const std::vector<double>& scenario_mw) {
  OperatingPoint op;
  op.pg_mw = evaluate_dispatch(c, d.pg_mw, scenario_mw, d.rho, d.wind_mw).pg_mw;
  op.vg = d.vg;
  op.wind_mw = scenario_mw;
  op.gamma = d.gamma;
  return op;
}

}  // namespace rtsc
