#pragma once

// Static network description, admittance assembly and network variants
// (bolted faults, line trips) used by the dispatch and stability code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rtsc {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusType { PQ = 1, PV = 2, Ref = 3 };

struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double pd = 0.0;  // MW
  double qd = 0.0;  // MVAr
  double gs = 0.0;  // MW at 1 p.u.
  double bs = 0.0;  // MVAr at 1 p.u.
  double vmin = 0.9;
  double vmax = 1.1;
  double vm = 1.0;
  double va = 0.0;  // degrees
};

/// Limits of the power flow routers at both ends of a line. A line without
/// PFRs carries the degenerate limits gamma in [1,1], beta in [0,0].
struct PfrLimits {
  double gamma_min = 1.0;
  double gamma_max = 1.0;
  double beta_min = 0.0;  // rad
  double beta_max = 0.0;  // rad

  bool degenerate() const {
    return gamma_min == 1.0 && gamma_max == 1.0 && beta_min == 0.0 && beta_max == 0.0;
  }
};

struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total line charging susceptance, split half per end
  double rate_a = 0.0;  // MVA, 0 = unlimited; not enforced by the dispatch
  bool has_pfr = false;
  PfrLimits pfr;

  Complex series_admittance() const { return 1.0 / Complex(r, x); }
  Complex shunt_admittance() const { return Complex(0.0, b / 2.0); }
};

struct Generator {
  int id = 0;
  int bus = 0;
  double pg = 0.0;  // MW setpoint
  double qg = 0.0;
  double vg = 1.0;
  double pmin = 0.0;
  double pmax = 0.0;
  double qmin = 0.0;
  double qmax = 0.0;
  double c2 = 0.0;  // $/MW^2h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h
  double h = 1.0;   // inertia constant, s (system base)
  double d = 0.0;   // damping, p.u. power per p.u. speed
  double xd_p = 0.2;
  // fourth-order constants; zero means "not supplied"
  double xq_p = 0.0;
  double xd = 0.0;
  double xq = 0.0;
  double td0_p = 0.0;
  double tq0_p = 0.0;

  double cost(double p_mw) const { return c2 * p_mw * p_mw + c1 * p_mw + c0; }
};

struct WindFarm {
  int id = 0;
  int bus = 0;
  double pw = 0.0;  // forecast, MW
  double day_ahead_alpha = 0.1;
  double short_term_alpha = 0.03;
};

struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  double frequency = 60.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<WindFarm> wind_farms;

  std::size_t bus_index(int id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == id) return k;
    throw GridError("unknown bus " + std::to_string(id));
  }
  std::optional<std::size_t> find_bus(int id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == id) return k;
    return std::nullopt;
  }
  std::size_t line_index(int id) const {
    for (std::size_t k = 0; k < lines.size(); ++k)
      if (lines[k].id == id) return k;
    throw GridError("unknown line " + std::to_string(id));
  }
  std::size_t ref_bus_index() const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].type == BusType::Ref) return k;
    throw GridError("case has no reference bus");
  }
  /// Index of the generator sitting on the reference bus.
  std::size_t slack_generator() const {
    const int ref = buses[ref_bus_index()].id;
    for (std::size_t g = 0; g < generators.size(); ++g)
      if (generators[g].bus == ref) return g;
    throw GridError("reference bus has no generator");
  }
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  std::string kind;
  std::string where;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  bool has(const std::string& kind) const {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const ValidationIssue& i) { return i.kind == kind; });
  }
};

namespace detail {

/// Connected components over bus indices using the lines with `active[k]`.
inline bool connected(std::size_t n_bus, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (n_bus <= 1) return true;
  std::vector<std::size_t> parent(n_bus);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::size_t components = n_bus;
  for (auto [a, b] : edges) {
    auto ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

}  // namespace detail

inline ValidationReport validate_case(const NetworkCase& c) {
  ValidationReport rep;
  auto add = [&](std::string kind, std::string where) {
    rep.issues.push_back({std::move(kind), std::move(where)});
  };

  if (c.buses.empty()) add("empty case", "bus table");
  std::set<int> ids;
  int refs = 0;
  for (const auto& b : c.buses) {
    if (!ids.insert(b.id).second) add("duplicate bus", "bus " + std::to_string(b.id));
    if (!(b.vmin > 0.0 && b.vmin <= b.vmax))
      add("invalid voltage limits", "bus " + std::to_string(b.id));
    if (b.type == BusType::Ref) ++refs;
  }
  if (refs != 1) add("reference bus count", std::to_string(refs) + " reference buses");

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::set<int> line_ids;
  for (const auto& l : c.lines) {
    const std::string where = "line " + std::to_string(l.id);
    if (!line_ids.insert(l.id).second) add("duplicate line", where);
    auto f = c.find_bus(l.from_bus);
    auto t = c.find_bus(l.to_bus);
    if (!f || !t) {
      add("unknown bus", where);
      continue;
    }
    if (l.from_bus == l.to_bus) add("self loop", where);
    if (l.r == 0.0 && l.x == 0.0) add("zero impedance", where);
    const auto& p = l.pfr;
    if (p.gamma_min > p.gamma_max || p.beta_min > p.beta_max) add("inverted PFR bound", where);
    if (!(p.gamma_min <= 1.0 && 1.0 <= p.gamma_max) || !(p.beta_min <= 0.0 && 0.0 <= p.beta_max))
      add("PFR bound excludes identity", where);
    if (!l.has_pfr && !p.degenerate()) add("PFR limits on plain line", where);
    if (p.beta_max - p.beta_min >= kPi / 2) add("PFR angle range too wide", where);
    edges.emplace_back(*f, *t);
  }
  if (!c.buses.empty() && !detail::connected(c.buses.size(), edges))
    add("disconnected network", "branch table");

  std::set<int> gen_buses;
  for (const auto& g : c.generators) {
    const std::string where = "gen " + std::to_string(g.id);
    if (!c.find_bus(g.bus)) add("unknown bus", where);
    if (g.c2 < 0.0) add("negative quadratic cost", where);
    if (g.pmin > g.pmax) add("inverted active limits", where);
    if (g.qmin > g.qmax) add("inverted reactive limits", where);
    if (!(g.h > 0.0)) add("nonpositive inertia", where);
    if (!(g.xd_p > 0.0)) add("nonpositive transient reactance", where);
    gen_buses.insert(g.bus);
  }
  for (const auto& w : c.wind_farms) {
    const std::string where = "wind " + std::to_string(w.id);
    if (!c.find_bus(w.bus)) add("unknown bus", where);
    if (gen_buses.count(w.bus)) add("wind on generator bus", where);
    if (w.pw < 0.0) add("negative forecast", where);
    if (!(0.0 <= w.short_term_alpha && w.short_term_alpha <= w.day_ahead_alpha &&
          w.day_ahead_alpha < 1.0))
      add("invalid prediction widths", where);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Branch terminals and admittance

/// Directed branch end (i_j): the terminal of line `line` sitting at `bus`.
struct Terminal {
  std::size_t line = 0;  // index into case.lines
  std::size_t bus = 0;   // bus index
  std::size_t other = 0; // bus index of the far end
  bool from_end = true;
};

/// Bijection between directed branch ends and 0..2E-1. Terminal 2k is the
/// from-end of line k, 2k+1 its to-end.
struct TerminalMap {
  std::vector<Terminal> terminals;
  std::vector<std::vector<std::size_t>> at_bus;  // bus index -> terminal ids

  std::size_t size() const { return terminals.size(); }
  std::size_t from_terminal(std::size_t line) const { return 2 * line; }
  std::size_t to_terminal(std::size_t line) const { return 2 * line + 1; }
  std::size_t partner(std::size_t t) const { return t ^ std::size_t{1}; }
};

inline TerminalMap build_terminal_map(const NetworkCase& c) {
  TerminalMap m;
  m.at_bus.resize(c.buses.size());
  for (std::size_t k = 0; k < c.lines.size(); ++k) {
    const auto f = c.bus_index(c.lines[k].from_bus);
    const auto t = c.bus_index(c.lines[k].to_bus);
    m.terminals.push_back({k, f, t, true});
    m.terminals.push_back({k, t, f, false});
    m.at_bus[f].push_back(2 * k);
    m.at_bus[t].push_back(2 * k + 1);
  }
  return m;
}

/// Bus admittance matrix together with the branch stamps that built it, so
/// that line trips and faults can be applied and undone.
struct AdmittanceMatrix {
  struct Stamp {
    std::size_t from = 0, to = 0;
    Complex y_ff, y_ft, y_tf, y_tt;
    bool in_service = true;
  };

  CMatrix y;
  TerminalMap terminals;
  std::vector<Stamp> stamps;           // one per case line
  std::vector<std::pair<int, int>> line_buses;  // (from id, to id), for messages
  std::vector<int> line_ids;
  std::set<std::size_t> grounded;      // buses held at zero voltage (bolted faults)

  std::size_t size() const { return static_cast<std::size_t>(y.rows()); }
  bool is_grounded(std::size_t bus) const { return grounded.count(bus) > 0; }
};

namespace detail {

inline void add_stamp(CMatrix& y, const AdmittanceMatrix::Stamp& s, double sign) {
  y(s.from, s.from) += sign * s.y_ff;
  y(s.from, s.to) += sign * s.y_ft;
  y(s.to, s.from) += sign * s.y_tf;
  y(s.to, s.to) += sign * s.y_tt;
}

}  // namespace detail

/// PFR complex ratio per terminal (gamma_{i_j} = V_{i_j} / V_i); empty means
/// all ones.
using TerminalRatios = std::vector<Complex>;

/// Builds the bus admittance matrix. With PFR ratios, the line sees terminal
/// voltages gamma_{i_j} V_i, and the lossless router passes power through, so
/// the bus current is conj(gamma) times the terminal current.
inline AdmittanceMatrix build_admittance(const NetworkCase& c, const TerminalRatios& gamma = {}) {
  const std::size_t n = c.buses.size();
  AdmittanceMatrix a;
  a.y = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.terminals = build_terminal_map(c);
  if (!gamma.empty() && gamma.size() != 2 * c.lines.size())
    throw GridError("terminal ratio vector has wrong length");

  for (std::size_t k = 0; k < c.lines.size(); ++k) {
    const auto& l = c.lines[k];
    if (l.r == 0.0 && l.x == 0.0)
      throw GridError("line " + std::to_string(l.id) + " has zero series impedance");
    const Complex ys = l.series_admittance();
    const Complex ysh = l.shunt_admittance();
    const Complex gf = gamma.empty() ? Complex(1.0) : gamma[2 * k];
    const Complex gt = gamma.empty() ? Complex(1.0) : gamma[2 * k + 1];
    AdmittanceMatrix::Stamp s;
    s.from = c.bus_index(l.from_bus);
    s.to = c.bus_index(l.to_bus);
    s.y_ff = std::norm(gf) * (ys + ysh);
    s.y_ft = -std::conj(gf) * gt * ys;
    s.y_tf = -std::conj(gt) * gf * ys;
    s.y_tt = std::norm(gt) * (ys + ysh);
    detail::add_stamp(a.y, s, 1.0);
    a.stamps.push_back(s);
    a.line_buses.emplace_back(l.from_bus, l.to_bus);
    a.line_ids.push_back(l.id);
  }
  for (std::size_t i = 0; i < n; ++i)
    a.y(i, i) += Complex(c.buses[i].gs, c.buses[i].bs) / c.base_mva;
  return a;
}

/// Bolted three-phase fault: the bus is held at zero voltage. Network
/// reduction drops grounded buses, which is equivalent to eliminating the bus
/// through an infinite shunt.
inline AdmittanceMatrix apply_fault(const AdmittanceMatrix& y, std::size_t bus) {
  if (bus >= y.size()) throw GridError("fault bus out of range");
  AdmittanceMatrix out = y;
  out.grounded.insert(bus);
  return out;
}

inline AdmittanceMatrix clear_fault(const AdmittanceMatrix& y, std::size_t bus) {
  AdmittanceMatrix out = y;
  out.grounded.erase(bus);
  return out;
}

inline std::size_t stamp_index(const AdmittanceMatrix& y, int line_id) {
  for (std::size_t k = 0; k < y.line_ids.size(); ++k)
    if (y.line_ids[k] == line_id) return k;
  throw GridError("unknown line " + std::to_string(line_id));
}

/// Removes a line's series and shunt stamps. Throws if the trip islands the
/// network.
inline AdmittanceMatrix apply_line_trip(const AdmittanceMatrix& y, int line_id) {
  const std::size_t k = stamp_index(y, line_id);
  if (!y.stamps[k].in_service)
    throw GridError("line " + std::to_string(line_id) + " already out of service");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t j = 0; j < y.stamps.size(); ++j)
    if (j != k && y.stamps[j].in_service) edges.emplace_back(y.stamps[j].from, y.stamps[j].to);
  if (!detail::connected(y.size(), edges))
    throw GridError("tripping line " + std::to_string(line_id) + " islands the network");
  AdmittanceMatrix out = y;
  detail::add_stamp(out.y, out.stamps[k], -1.0);
  out.stamps[k].in_service = false;
  return out;
}

inline AdmittanceMatrix restore_line(const AdmittanceMatrix& y, int line_id) {
  const std::size_t k = stamp_index(y, line_id);
  if (y.stamps[k].in_service) return y;
  AdmittanceMatrix out = y;
  out.stamps[k].in_service = true;
  detail::add_stamp(out.y, out.stamps[k], 1.0);
  return out;
}

}  // namespace rtsc
