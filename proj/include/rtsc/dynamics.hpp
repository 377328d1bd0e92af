#pragma once

// Rotor-angle time-domain simulation. Machines are voltage sources behind
// transient reactance (classical model, or a two-axis model with x'q = x'd),
// loads are constant impedances at the initial voltage, and the network is
// Kron-reduced to the machine internal nodes for each topology of the event
// sequence. Integration is fixed-step RK4 with event times snapped to the
// step grid.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtsc/grid.hpp"
#include "rtsc/powerflow.hpp"

namespace rtsc {

class DynamicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of time-domain simulations started in this process.
inline std::atomic<std::uint64_t>& tds_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

enum class MachineModel { Classical, FourthOrder };

inline const char* to_string(MachineModel m) { return m == MachineModel::Classical ? "classical" : "fourth"; }

inline MachineModel parse_machine_model(const std::string& s) {
  if (s == "classical") return MachineModel::Classical;
  if (s == "fourth") return MachineModel::FourthOrder;
  throw DynamicsError("unknown machine model '" + s + "'");
}

struct SimConfig {
  double dt = 1e-3;        // s
  double horizon = 5.0;    // s
  MachineModel model = MachineModel::Classical;
  double guard = 2.0 * kPi;        // integration stops past this angle spread, rad
  double threshold = kPi;          // instability threshold on angle spread, rad
};

/// Bolted fault at `fault_bus` (bus id) from t0, cleared at t_clear by
/// tripping `trip_line` (line id, 0 for none).
struct FaultEvent {
  std::string id;
  int fault_bus = 0;
  int trip_line = 0;
  double t0 = 0.0;
  double t_clear = 0.1;
};

struct Equilibrium {
  SolvedFlow flow;
  CVector e;                    // internal EMF phasors
  Eigen::VectorXd delta;        // rotor angles, rad
  Eigen::VectorXd pm;           // mechanical power, p.u.
  Eigen::VectorXd eq_p, ed_p;   // transient EMFs (fourth order)
  Eigen::VectorXd efd;          // field voltage (fourth order)
  CVector load_y;               // constant-impedance load per bus
};

// ---------------------------------------------------------------------------

/// Schur complement of `y` onto the `retained` nodes.
inline CMatrix kron_reduce(const CMatrix& y, const std::vector<std::size_t>& retained) {
  const auto n = static_cast<std::size_t>(y.rows());
  std::vector<char> keep(n, 0);
  for (auto r : retained) {
    if (r >= n) throw DynamicsError("retained node out of range");
    keep[r] = 1;
  }
  if (retained.empty()) throw DynamicsError("nothing retained in Kron reduction");
  std::vector<std::size_t> elim;
  for (std::size_t i = 0; i < n; ++i)
    if (!keep[i]) elim.push_back(i);
  const auto nr = static_cast<Eigen::Index>(retained.size());
  const auto ne = static_cast<Eigen::Index>(elim.size());
  CMatrix yrr(nr, nr), yre(nr, ne), yer(ne, nr), yee(ne, ne);
  for (Eigen::Index a = 0; a < nr; ++a) {
    for (Eigen::Index b = 0; b < nr; ++b) yrr(a, b) = y(retained[a], retained[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yre(a, b) = y(retained[a], elim[b]);
  }
  for (Eigen::Index a = 0; a < ne; ++a) {
    for (Eigen::Index b = 0; b < nr; ++b) yer(a, b) = y(elim[a], retained[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = y(elim[a], elim[b]);
  }
  if (ne == 0) return yrr;
  Eigen::FullPivLU<CMatrix> lu(yee);
  if (lu.rank() < ne) throw DynamicsError("singular elimination block in Kron reduction");
  return yrr - yre * lu.solve(yer);
}

inline Equilibrium initialize_equilibrium(const NetworkCase& c, const OperatingPoint& op,
                                          MachineModel model = MachineModel::Classical) {
  Equilibrium eq;
  eq.flow = solve_operating_point(c, op);
  const std::size_t ng = c.generators.size();
  const auto ngi = static_cast<Eigen::Index>(ng);
  eq.e.resize(ngi);
  eq.delta.resize(ngi);
  eq.pm.resize(ngi);
  eq.eq_p = Eigen::VectorXd::Zero(ngi);
  eq.ed_p = Eigen::VectorXd::Zero(ngi);
  eq.efd = Eigen::VectorXd::Zero(ngi);
  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = c.generators[g];
    const Complex v = eq.flow.v(c.bus_index(gen.bus));
    const Complex i = std::conj(Complex(eq.flow.pg[g], eq.flow.qg[g]) / v);
    const Complex ep = v + Complex(0, gen.xd_p) * i;
    eq.e(g) = ep;
    eq.pm(g) = (ep * std::conj(i)).real();
    if (model == MachineModel::Classical) {
      eq.delta(g) = std::arg(ep);
    } else {
      if (!(gen.xd > 0 && gen.xq > 0 && gen.td0_p > 0 && gen.tq0_p > 0))
        throw DynamicsError("generator " + std::to_string(gen.id) + " lacks fourth-order constants");
      const Complex eqax = v + Complex(0, gen.xq) * i;
      eq.delta(g) = std::arg(eqax);
      const Complex rot = std::polar(1.0, -(eq.delta(g) - kPi / 2));
      const Complex edq = ep * rot;
      const Complex idq = i * rot;
      eq.ed_p(g) = edq.real();
      eq.eq_p(g) = edq.imag();
      eq.efd(g) = eq.eq_p(g) + (gen.xd - gen.xd_p) * idq.real();
    }
  }
  const std::size_t n = c.buses.size();
  eq.load_y = CVector::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> pnet(n, 0.0), qnet(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    pnet[b] = c.buses[b].pd / c.base_mva;
    qnet[b] = c.buses[b].qd / c.base_mva;
  }
  for (std::size_t w = 0; w < c.wind_farms.size(); ++w)
    pnet[c.bus_index(c.wind_farms[w].bus)] -= op.wind_mw[w] / c.base_mva;
  for (std::size_t b = 0; b < n; ++b) {
    const double vm2 = std::norm(eq.flow.v(b));
    eq.load_y(b) = Complex(pnet[b], -qnet[b]) / vm2;
  }
  return eq;
}

/// Augmented network (buses plus one internal node per machine), reduced to
/// the internal nodes. Grounded buses are removed, which holds them at zero.
inline CMatrix reduced_network(const NetworkCase& c, const Equilibrium& eq, const AdmittanceMatrix& y) {
  const std::size_t n = c.buses.size();
  const std::size_t ng = c.generators.size();
  CMatrix aug = CMatrix::Zero(static_cast<Eigen::Index>(n + ng), static_cast<Eigen::Index>(n + ng));
  aug.topLeftCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = y.y;
  for (std::size_t b = 0; b < n; ++b) aug(b, b) += eq.load_y(b);
  for (std::size_t g = 0; g < ng; ++g) {
    const auto b = c.bus_index(c.generators[g].bus);
    const Complex yg = 1.0 / Complex(0, c.generators[g].xd_p);
    aug(n + g, n + g) += yg;
    aug(b, b) += yg;
    aug(n + g, b) -= yg;
    aug(b, n + g) -= yg;
  }
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n + ng; ++i)
    if (i >= n || !y.is_grounded(i)) live.push_back(i);
  CMatrix sub(live.size(), live.size());
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = 0; b < live.size(); ++b) sub(a, b) = aug(live[a], live[b]);
  std::vector<std::size_t> retained;
  for (std::size_t a = 0; a < live.size(); ++a)
    if (live[a] >= n) retained.push_back(a);
  return kron_reduce(sub, retained);
}

// ---------------------------------------------------------------------------

struct Trajectory {
  std::vector<double> t;
  Eigen::MatrixXd delta;   // steps x machines, rad
  Eigen::MatrixXd omega;   // steps x machines, p.u. speed deviation
  Eigen::MatrixXd pe;      // steps x machines, p.u. (includes damping power)
  Eigen::VectorXd pm;      // per machine, constant
  Eigen::VectorXd h;       // inertia constants, s
  double frequency = 60.0;
  double dt = 1e-3;
  std::size_t k_fault = 0;  // first step of the fault-on network
  std::size_t k_clear = 0;  // first step of the post-fault network
  bool diverged = false;
  CMatrix y_pre, y_fault, y_post;
  CVector e0;               // initial EMFs
  CMatrix emf;              // steps x machines, internal EMF in the rotor frame (E e^{-j delta})

  std::size_t steps() const { return t.size(); }
  std::size_t machines() const { return static_cast<std::size_t>(pm.size()); }
  double omega_s() const { return 2.0 * kPi * frequency; }
};

namespace detail {

struct Rhs {
  const NetworkCase* c;
  const Equilibrium* eq;
  MachineModel model;
  double omega_s;

  // State layout: delta(ng), omega(ng) [, eq'(ng), ed'(ng)].
  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const CMatrix& yred, Eigen::VectorXd* pe_out) const {
    const auto ng = static_cast<Eigen::Index>(c->generators.size());
    CVector e(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
      if (model == MachineModel::Classical) {
        e(g) = std::polar(std::abs(eq->e(g)), x(g));
      } else {
        e(g) = Complex(x(2 * ng + ng + g), x(2 * ng + g)) * std::polar(1.0, x(g) - kPi / 2);
      }
    }
    const CVector i = yred * e;
    Eigen::VectorXd dx(x.size());
    for (Eigen::Index g = 0; g < ng; ++g) {
      const auto& gen = c->generators[static_cast<std::size_t>(g)];
      const double pe = (e(g) * std::conj(i(g))).real();
      const double damp = gen.d * x(ng + g);
      const double m = 2.0 * gen.h;
      dx(g) = omega_s * x(ng + g);
      dx(ng + g) = (eq->pm(g) - pe - damp) / m;
      if (pe_out) (*pe_out)(g) = pe + damp;
      if (model == MachineModel::FourthOrder) {
        const Complex idq = i(g) * std::polar(1.0, -(x(g) - kPi / 2));
        dx(2 * ng + g) = (eq->efd(g) - x(2 * ng + g) - (gen.xd - gen.xd_p) * idq.real()) / gen.td0_p;
        dx(3 * ng + g) = (-x(3 * ng + g) + (gen.xq - gen.xd_p) * idq.imag()) / gen.tq0_p;
      }
    }
    return dx;
  }
};

inline double spread(const Eigen::VectorXd& delta) { return delta.maxCoeff() - delta.minCoeff(); }

}  // namespace detail

inline Trajectory run_tds(const NetworkCase& c, const Equilibrium& eq, const FaultEvent& ev, const SimConfig& cfg,
                          const TerminalRatios& gamma = {}) {
  tds_counter().fetch_add(1, std::memory_order_relaxed);
  if (!(cfg.dt > 0.0)) throw DynamicsError("time step must be positive");
  if (ev.t_clear < ev.t0) throw DynamicsError("fault cleared before it starts");
  if (!(cfg.horizon > ev.t_clear)) throw DynamicsError("horizon ends before the fault is cleared");
  const std::size_t ng = c.generators.size();
  const auto ngi = static_cast<Eigen::Index>(ng);

  Trajectory tr;
  tr.frequency = c.frequency;
  tr.dt = cfg.dt;
  tr.pm = eq.pm;
  tr.h.resize(ngi);
  for (std::size_t g = 0; g < ng; ++g) tr.h(g) = c.generators[g].h;
  tr.e0 = eq.e;

  const AdmittanceMatrix y0 = build_admittance(c, gamma);
  tr.y_pre = reduced_network(c, eq, y0);
  const bool has_fault = std::llround(ev.t_clear / cfg.dt) > std::llround(ev.t0 / cfg.dt);
  if (has_fault) {
    tr.y_fault = reduced_network(c, eq, apply_fault(y0, c.bus_index(ev.fault_bus)));
  } else {
    tr.y_fault = tr.y_pre;
  }
  tr.y_post = ev.trip_line ? reduced_network(c, eq, apply_line_trip(y0, ev.trip_line)) : tr.y_pre;

  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt)) + 1;
  tr.k_fault = static_cast<std::size_t>(std::llround(ev.t0 / cfg.dt));
  tr.k_clear = static_cast<std::size_t>(std::llround(ev.t_clear / cfg.dt));
  const Eigen::Index nx = cfg.model == MachineModel::Classical ? 2 * ngi : 4 * ngi;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
  x.head(ngi) = eq.delta;
  if (cfg.model == MachineModel::FourthOrder) {
    x.segment(2 * ngi, ngi) = eq.eq_p;
    x.segment(3 * ngi, ngi) = eq.ed_p;
  }
  detail::Rhs f{&c, &eq, cfg.model, tr.omega_s()};

  tr.t.reserve(steps);
  tr.delta.resize(static_cast<Eigen::Index>(steps), ngi);
  tr.omega.resize(static_cast<Eigen::Index>(steps), ngi);
  tr.pe.resize(static_cast<Eigen::Index>(steps), ngi);
  tr.emf.resize(static_cast<Eigen::Index>(steps), ngi);
  Eigen::VectorXd pe(ngi);
  std::size_t k = 0;
  for (;; ++k) {
    const CMatrix& y = k < tr.k_fault ? tr.y_pre : (k < tr.k_clear ? tr.y_fault : tr.y_post);
    const Eigen::VectorXd k1 = f(x, y, &pe);
    tr.t.push_back(static_cast<double>(k) * cfg.dt);
    tr.delta.row(static_cast<Eigen::Index>(k)) = x.head(ngi).transpose();
    tr.omega.row(static_cast<Eigen::Index>(k)) = x.segment(ngi, ngi).transpose();
    tr.pe.row(static_cast<Eigen::Index>(k)) = pe.transpose();
    for (Eigen::Index g = 0; g < ngi; ++g)
      tr.emf(static_cast<Eigen::Index>(k), g) = cfg.model == MachineModel::Classical
                                                    ? Complex(std::abs(eq.e(g)))
                                                    : Complex(x(3 * ngi + g), x(2 * ngi + g)) * Complex(0, -1);
    if (!x.allFinite() || detail::spread(x.head(ngi)) > cfg.guard) {
      tr.diverged = true;
      break;
    }
    if (k + 1 == steps) break;
    const double h = cfg.dt;
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1, y, nullptr);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2, y, nullptr);
    const Eigen::VectorXd k4 = f(x + h * k3, y, nullptr);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const auto kept = static_cast<Eigen::Index>(tr.t.size());
  tr.delta.conservativeResize(kept, ngi);
  tr.omega.conservativeResize(kept, ngi);
  tr.pe.conservativeResize(kept, ngi);
  tr.emf.conservativeResize(kept, ngi);
  return tr;
}

inline Trajectory run_tds(const NetworkCase& c, const OperatingPoint& op, const FaultEvent& ev, const SimConfig& cfg) {
  const Equilibrium eq = initialize_equilibrium(c, op, cfg.model);
  return run_tds(c, eq, ev, cfg, op.gamma);
}

/// Right-hand side norm at the initial state on the pre-fault network.
inline double equilibrium_residual(const NetworkCase& c, const Equilibrium& eq, const TerminalRatios& gamma = {},
                                   MachineModel model = MachineModel::Classical) {
  const auto ngi = static_cast<Eigen::Index>(c.generators.size());
  const CMatrix y = reduced_network(c, eq, build_admittance(c, gamma));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model == MachineModel::Classical ? 2 * ngi : 4 * ngi);
  x.head(ngi) = eq.delta;
  if (model == MachineModel::FourthOrder) {
    x.segment(2 * ngi, ngi) = eq.eq_p;
    x.segment(3 * ngi, ngi) = eq.ed_p;
  }
  detail::Rhs f{&c, &eq, model, 2.0 * kPi * c.frequency};
  return f(x, y, nullptr).lpNorm<Eigen::Infinity>();
}

struct StabilityClass {
  bool stable = true;
  double t_u = 0.0;        // first time the spread exceeds the threshold
  std::size_t k_u = 0;
  double max_spread = 0.0;
};

inline StabilityClass classify_stability(const Trajectory& tr, double threshold) {
  if (tr.steps() == 0) throw DynamicsError("empty trajectory");
  StabilityClass out;
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    const double s = tr.delta.row(static_cast<Eigen::Index>(k)).maxCoeff() -
                     tr.delta.row(static_cast<Eigen::Index>(k)).minCoeff();
    out.max_spread = std::max(out.max_spread, s);
    if (s > threshold) {
      out.stable = false;
      out.t_u = tr.t[k];
      out.k_u = k;
      return out;
    }
  }
  if (tr.diverged) {
    out.stable = false;
    out.t_u = tr.t.back();
    out.k_u = tr.steps() - 1;
  }
  return out;
}

}  // namespace rtsc
