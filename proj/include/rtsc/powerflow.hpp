#pragma once

// Newton-Raphson AC power flow in polar coordinates on a (possibly
// PFR-modified) bus admittance matrix. Generator buses are PV, the reference
// bus is the slack; reactive limits are not enforced.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtsc/grid.hpp"

namespace rtsc {

class PowerFlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerFlowInput {
  std::vector<double> p_spec;  // net injection per bus, p.u.
  std::vector<double> q_spec;  // net injection per bus, p.u. (PQ buses only)
  std::vector<double> v_set;   // voltage magnitude at PV/slack buses, p.u.
  std::vector<BusType> kind;   // PQ, PV or Ref per bus
  std::vector<double> v0;      // optional flat-start override (magnitudes)
  std::vector<double> a0;      // optional angle start, rad
};

struct PowerFlowResult {
  CVector v;                // complex bus voltages
  CVector s;                // complex injection per bus, p.u.
  int iterations = 0;
  double mismatch = 0.0;    // final max-norm mismatch, p.u.
};

/// Complex bus injections V .* conj(Y V).
inline CVector bus_injections(const CMatrix& y, const CVector& v) {
  return v.cwiseProduct((y * v).conjugate());
}

inline PowerFlowResult solve_power_flow(const CMatrix& y, const PowerFlowInput& in, double tol = 1e-11,
                                        int max_iter = 30) {
  const auto n = static_cast<std::size_t>(y.rows());
  if (in.p_spec.size() != n || in.kind.size() != n || in.v_set.size() != n)
    throw PowerFlowError("power flow input has wrong length");
  std::vector<std::size_t> pv_pq, pq;
  std::size_t slack = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.kind[i] == BusType::Ref) {
      slack = i;
      continue;
    }
    pv_pq.push_back(i);
    if (in.kind[i] == BusType::PQ) pq.push_back(i);
  }
  if (slack == n) throw PowerFlowError("power flow needs a slack bus");

  Eigen::VectorXd vm(n), va(n);
  for (std::size_t i = 0; i < n; ++i) {
    vm(i) = in.kind[i] == BusType::PQ ? (in.v0.empty() ? 1.0 : in.v0[i]) : in.v_set[i];
    va(i) = in.a0.empty() ? 0.0 : in.a0[i];
  }
  va(slack) = in.a0.empty() ? 0.0 : in.a0[slack];

  const auto npv = static_cast<Eigen::Index>(pv_pq.size());
  const auto npq = static_cast<Eigen::Index>(pq.size());
  PowerFlowResult res;
  CVector v(n);
  for (int it = 0; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
    const CVector s = bus_injections(y, v);
    Eigen::VectorXd f(npv + npq);
    for (Eigen::Index k = 0; k < npv; ++k) f(k) = s(pv_pq[k]).real() - in.p_spec[pv_pq[k]];
    for (Eigen::Index k = 0; k < npq; ++k) f(npv + k) = s(pq[k]).imag() - in.q_spec[pq[k]];
    res.mismatch = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    res.iterations = it;
    if (!std::isfinite(res.mismatch)) throw PowerFlowError("power flow diverged");
    if (res.mismatch < tol) {
      res.v = v;
      res.s = s;
      return res;
    }
    if (it == max_iter) break;

    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    const CVector ibus = y * v;
    CMatrix ds_dva(n, n), ds_dvm(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const Complex vn = v(j) / std::abs(v(j));
        ds_dva(i, j) = Complex(0, 1) * v(i) * std::conj((i == j ? ibus(i) : Complex(0)) - y(i, j) * v(j));
        ds_dvm(i, j) = v(i) * std::conj(y(i, j) * vn) + (i == j ? std::conj(ibus(i)) * vn : Complex(0));
      }
    Eigen::MatrixXd jac(npv + npq, npv + npq);
    for (Eigen::Index r = 0; r < npv; ++r) {
      for (Eigen::Index c = 0; c < npv; ++c) jac(r, c) = ds_dva(pv_pq[r], pv_pq[c]).real();
      for (Eigen::Index c = 0; c < npq; ++c) jac(r, npv + c) = ds_dvm(pv_pq[r], pq[c]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
      for (Eigen::Index c = 0; c < npv; ++c) jac(npv + r, c) = ds_dva(pq[r], pv_pq[c]).imag();
      for (Eigen::Index c = 0; c < npq; ++c) jac(npv + r, npv + c) = ds_dvm(pq[r], pq[c]).imag();
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(-f);
    for (Eigen::Index k = 0; k < npv; ++k) va(pv_pq[k]) += dx(k);
    for (Eigen::Index k = 0; k < npq; ++k) vm(pq[k]) += dx(npv + k);
  }
  throw PowerFlowError("power flow did not converge (mismatch " + std::to_string(res.mismatch) + ")");
}

/// Operating point specification in engineering units.
struct OperatingPoint {
  std::vector<double> pg_mw;        // per generator
  std::vector<double> vg;           // per generator voltage setpoint; empty uses case values
  std::vector<double> wind_mw;      // per wind farm
  TerminalRatios gamma;             // PFR ratios per terminal; empty means none
};

struct SolvedFlow {
  CVector v;
  CVector s;                 // bus injections, p.u.
  std::vector<double> pg;    // per generator, p.u. (slack adjusted)
  std::vector<double> qg;    // per generator, p.u.
  AdmittanceMatrix y;
};

/// Runs the power flow for a dispatch. The slack generator absorbs the loss
/// mismatch; reactive output at a bus is split across its generators in
/// proportion to their reactive ranges.
inline SolvedFlow solve_operating_point(const NetworkCase& c, const OperatingPoint& op) {
  const std::size_t n = c.buses.size();
  if (op.pg_mw.size() != c.generators.size()) throw PowerFlowError("dispatch has wrong generator count");
  if (op.wind_mw.size() != c.wind_farms.size()) throw PowerFlowError("scenario has wrong farm count");
  SolvedFlow out;
  out.y = build_admittance(c, op.gamma);
  PowerFlowInput in;
  in.p_spec.assign(n, 0.0);
  in.q_spec.assign(n, 0.0);
  in.v_set.assign(n, 1.0);
  in.kind.assign(n, BusType::PQ);
  const double base = c.base_mva;
  for (std::size_t i = 0; i < n; ++i) {
    in.p_spec[i] = -c.buses[i].pd / base;
    in.q_spec[i] = -c.buses[i].qd / base;
    in.v_set[i] = c.buses[i].vm;
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto b = c.bus_index(c.generators[g].bus);
    in.p_spec[b] += op.pg_mw[g] / base;
    in.kind[b] = BusType::PV;
    in.v_set[b] = op.vg.empty() ? c.generators[g].vg : op.vg[g];
  }
  for (std::size_t w = 0; w < c.wind_farms.size(); ++w)
    in.p_spec[c.bus_index(c.wind_farms[w].bus)] += op.wind_mw[w] / base;
  const auto ref = c.ref_bus_index();
  in.kind[ref] = BusType::Ref;

  auto pf = solve_power_flow(out.y.y, in);
  out.v = pf.v;
  out.s = pf.s;
  out.pg.resize(c.generators.size());
  out.qg.resize(c.generators.size());
  // Per-bus generator totals from the solved injections.
  std::vector<double> q_range(n, 0.0);
  std::vector<int> count(n, 0);
  for (const auto& g : c.generators) {
    const auto b = c.bus_index(g.bus);
    q_range[b] += std::max(g.qmax - g.qmin, 0.0);
    ++count[b];
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    const auto b = c.bus_index(gen.bus);
    const double q_bus = pf.s(b).imag() + c.buses[b].qd / base;
    const double share = q_range[b] > 0.0 ? std::max(gen.qmax - gen.qmin, 0.0) / q_range[b] : 1.0 / count[b];
    out.qg[g] = q_bus * share;
    out.pg[g] = op.pg_mw[g] / base;
  }
  // Slack bus: whatever the injection is beyond its scheduled value goes to
  // its first generator.
  const std::size_t sg = c.slack_generator();
  double scheduled = -c.buses[ref].pd / base;
  for (std::size_t w = 0; w < c.wind_farms.size(); ++w)
    if (c.bus_index(c.wind_farms[w].bus) == ref) scheduled += op.wind_mw[w] / base;
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    if (g != sg && c.bus_index(c.generators[g].bus) == ref) scheduled += out.pg[g];
  out.pg[sg] = pf.s(ref).real() - scheduled;
  return out;
}

}  // namespace rtsc
