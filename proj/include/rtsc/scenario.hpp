#pragma once

// Renewable scenarios: sample-complexity bound, uniform sampling over a
// prediction box, Kantorovich distances, fast forward reduction and online
// box selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtsc/grid.hpp"

namespace rtsc {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Horizon { DayAhead, ShortTerm };

inline const char* to_string(Horizon h) { return h == Horizon::DayAhead ? "day_ahead" : "short_term"; }

inline Horizon parse_horizon(const std::string& s) {
  if (s == "day_ahead") return Horizon::DayAhead;
  if (s == "short_term") return Horizon::ShortTerm;
  throw ScenarioError("unknown horizon '" + s + "'");
}

/// Per-farm [lower, upper] box in MW.
struct PredictionInterval {
  std::vector<double> lower;
  std::vector<double> upper;
  Horizon horizon = Horizon::DayAhead;

  std::size_t dim() const { return lower.size(); }

  bool contains(const std::vector<double>& p, double tol = 0.0) const {
    for (std::size_t k = 0; k < p.size(); ++k)
      if (p[k] < lower[k] - tol || p[k] > upper[k] + tol) return false;
    return true;
  }
  bool contains(const PredictionInterval& other, double tol = 1e-9) const {
    if (other.dim() != dim()) return false;
    for (std::size_t k = 0; k < dim(); ++k)
      if (other.lower[k] < lower[k] - tol || other.upper[k] > upper[k] + tol) return false;
    return true;
  }
  void check() const {
    if (lower.size() != upper.size()) throw ScenarioError("interval bound length mismatch");
    for (std::size_t k = 0; k < dim(); ++k)
      if (!(lower[k] <= upper[k])) throw ScenarioError("inverted prediction interval");
  }
};

/// [(1-alpha) P_w, (1+alpha) P_w] for each farm, alpha per horizon.
inline PredictionInterval prediction_interval(const NetworkCase& c, Horizon h) {
  PredictionInterval iv;
  iv.horizon = h;
  for (const auto& w : c.wind_farms) {
    const double a = h == Horizon::DayAhead ? w.day_ahead_alpha : w.short_term_alpha;
    iv.lower.push_back((1.0 - a) * w.pw);
    iv.upper.push_back((1.0 + a) * w.pw);
  }
  return iv;
}

inline std::vector<double> forecast(const NetworkCase& c) {
  std::vector<double> f;
  for (const auto& w : c.wind_farms) f.push_back(w.pw);
  return f;
}

struct Scenario {
  std::vector<double> p_hat_w;  // MW, one per farm
  double probability = 0.0;
  std::size_t origin = 0;  // index in the sampled set this scenario came from
};

enum class Provenance { Sampled, Reduced, Selected };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Sampled: return "sampled";
    case Provenance::Reduced: return "reduced";
    case Provenance::Selected: return "selected";
  }
  return "?";
}

inline Provenance parse_provenance(const std::string& s) {
  if (s == "sampled") return Provenance::Sampled;
  if (s == "reduced") return Provenance::Reduced;
  if (s == "selected") return Provenance::Selected;
  throw ScenarioError("unknown provenance '" + s + "'");
}

struct ScenarioSet {
  std::vector<Scenario> scenarios;
  Provenance provenance = Provenance::Sampled;
  std::uint64_t seed = 0;
  PredictionInterval interval;

  std::size_t size() const { return scenarios.size(); }
  bool empty() const { return scenarios.empty(); }
  double total_mass() const {
    double s = 0.0;
    for (const auto& sc : scenarios) s += sc.probability;
    return s;
  }
};

// ---------------------------------------------------------------------------

/// Smallest N with N >= e / (eps (e - 1)) * (ln(1/delta) + n - 1).
inline std::size_t sample_complexity(double epsilon, double delta, std::size_t n) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must lie in (0,1)");
  if (n < 1) throw std::domain_error("decision dimension must be >= 1");
  const long double e = std::exp(1.0L);
  const long double bound =
      e / (static_cast<long double>(epsilon) * (e - 1.0L)) *
      (-std::log(static_cast<long double>(delta)) + static_cast<long double>(n) - 1.0L);
  return static_cast<std::size_t>(std::ceil(bound));
}

/// mt19937_64 stream mapped to [0,1) through the top 53 bits, so sample values
/// do not depend on the standard library's distribution implementation.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

inline ScenarioSet sample_uniform(const PredictionInterval& iv, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ScenarioError("sample count must be >= 1");
  iv.check();
  ScenarioSet set;
  set.provenance = Provenance::Sampled;
  set.seed = seed;
  set.interval = iv;
  set.scenarios.resize(count);
  UniformStream rng(seed);
  const double mass = 1.0 / static_cast<double>(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto& sc = set.scenarios[s];
    sc.p_hat_w.resize(iv.dim());
    for (std::size_t k = 0; k < iv.dim(); ++k) sc.p_hat_w[k] = iv.lower[k] == iv.upper[k] ? iv.lower[k] : rng.next(iv.lower[k], iv.upper[k]);
    sc.probability = mass;
    sc.origin = s;
  }
  return set;
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Exact optimal-transport (Kantorovich) distance between two discrete
/// measures with Euclidean ground cost, by successive shortest augmenting
/// paths (Bellman-Ford on the residual transport network). Intended for
/// sets of up to a few hundred atoms.
inline double kantorovich_distance(const ScenarioSet& a, const ScenarioSet& b) {
  if (a.empty() || b.empty()) throw ScenarioError("Kantorovich distance of an empty measure");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  const double eps = 1e-15;

  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost[i * m + j] = euclidean(a.scenarios[i].p_hat_w, b.scenarios[j].p_hat_w);

  std::vector<double> supply(n), demand(m);
  const double ma = a.total_mass(), mb = b.total_mass();
  for (std::size_t i = 0; i < n; ++i) supply[i] = a.scenarios[i].probability / ma;
  for (std::size_t j = 0; j < m; ++j) demand[j] = b.scenarios[j].probability / mb;

  std::vector<double> flow(n * m, 0.0);
  std::vector<double> da(n), db(m);
  std::vector<std::ptrdiff_t> pred_a(n), pred_b(m);  // pred_a[i] = sink j, pred_b[j] = source i
  double shipped = 0.0;
  while (shipped < 1.0 - 1e-12) {
    for (std::size_t i = 0; i < n; ++i) {
      da[i] = supply[i] > eps ? 0.0 : inf;
      pred_a[i] = -1;
    }
    std::fill(db.begin(), db.end(), inf);
    std::fill(pred_b.begin(), pred_b.end(), -1);
    for (std::size_t round = 0; round < n + m; ++round) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (da[i] == inf) continue;
        for (std::size_t j = 0; j < m; ++j) {
          const double nd = da[i] + cost[i * m + j];
          if (nd < db[j] - 1e-15) {
            db[j] = nd;
            pred_b[j] = static_cast<std::ptrdiff_t>(i);
            changed = true;
          }
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        if (db[j] == inf) continue;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i * m + j] <= eps) continue;
          const double nd = db[j] - cost[i * m + j];
          if (nd < da[i] - 1e-15) {
            da[i] = nd;
            pred_a[i] = static_cast<std::ptrdiff_t>(j);
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    std::ptrdiff_t sink = -1;
    for (std::size_t j = 0; j < m; ++j)
      if (demand[j] > eps && db[j] < inf && (sink < 0 || db[j] < db[static_cast<std::size_t>(sink)]))
        sink = static_cast<std::ptrdiff_t>(j);
    if (sink < 0) break;

    // Walk back: sink j <- source i <- sink j' <- ... <- source with supply.
    double amount = demand[static_cast<std::size_t>(sink)];
    std::size_t j = static_cast<std::size_t>(sink);
    std::size_t i = static_cast<std::size_t>(pred_b[j]);
    while (pred_a[i] >= 0) {
      const auto jp = static_cast<std::size_t>(pred_a[i]);
      amount = std::min(amount, flow[i * m + jp]);
      i = static_cast<std::size_t>(pred_b[jp]);
    }
    amount = std::min(amount, supply[i]);
    if (amount <= eps) break;

    supply[i] -= amount;
    demand[static_cast<std::size_t>(sink)] -= amount;
    j = static_cast<std::size_t>(sink);
    i = static_cast<std::size_t>(pred_b[j]);
    flow[i * m + j] += amount;
    while (pred_a[i] >= 0) {
      const auto jp = static_cast<std::size_t>(pred_a[i]);
      flow[i * m + jp] -= amount;
      i = static_cast<std::size_t>(pred_b[jp]);
      flow[i * m + jp] += amount;
    }
    shipped += amount;
  }

  double total = 0.0;
  for (std::size_t k = 0; k < n * m; ++k) total += flow[k] * cost[k];
  return total;
}

/// Distance between a measure and the measure obtained by keeping `kept`
/// atoms and moving every deleted atom's mass to its nearest kept atom:
/// sum over deleted atoms of p_k times the distance to the nearest kept atom.
inline double reduction_distance(const ScenarioSet& set, const std::vector<std::size_t>& kept) {
  if (set.empty() || kept.empty()) throw ScenarioError("reduction distance of an empty measure");
  std::vector<char> is_kept(set.size(), 0);
  for (auto k : kept) is_kept.at(k) = 1;
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (is_kept[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (auto k : kept) best = std::min(best, euclidean(set.scenarios[i].p_hat_w, set.scenarios[k].p_hat_w));
    total += set.scenarios[i].probability * best;
  }
  return total;
}

/// Reduced measure on `kept` (in the given order) with deleted mass moved to
/// the nearest kept atom; ties go to the lowest kept position.
inline ScenarioSet redistribute(const ScenarioSet& set, const std::vector<std::size_t>& kept) {
  ScenarioSet out;
  out.provenance = Provenance::Reduced;
  out.seed = set.seed;
  out.interval = set.interval;
  for (auto k : kept) out.scenarios.push_back(set.scenarios.at(k));
  std::vector<char> is_kept(set.size(), 0);
  for (auto k : kept) is_kept[k] = 1;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (is_kept[i]) continue;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < kept.size(); ++q) {
      const double d = euclidean(set.scenarios[i].p_hat_w, set.scenarios[kept[q]].p_hat_w);
      if (d < best_d) {
        best_d = d;
        best = q;
      }
    }
    out.scenarios[best].probability += set.scenarios[i].probability;
  }
  const double mass = out.total_mass();
  for (auto& sc : out.scenarios) sc.probability /= mass;
  return out;
}

struct ReductionResult {
  ScenarioSet reduced;
  std::vector<std::size_t> kept;  // indices into the input, in selection order
  double distance = 0.0;          // Kantorovich distance to the input
};

/// Fast forward selection: repeatedly keep the scenario whose addition
/// minimises the Kantorovich distance to the original measure. Ties, up to a
/// relative 1e-12, go to the lowest scenario index.
inline ReductionResult fast_forward_reduce(const ScenarioSet& set, std::size_t keep) {
  const std::size_t n = set.size();
  if (keep < 1 || keep > n) throw ScenarioError("reduction target must lie in [1, |set|]");
  ReductionResult res;

  std::vector<double> p(n);
  const double mass = set.total_mass();
  for (std::size_t i = 0; i < n; ++i) p[i] = set.scenarios[i].probability / mass;

  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j)
      c[i * n + j] = c[j * n + i] = euclidean(set.scenarios[i].p_hat_w, set.scenarios[j].p_hat_w);
  }

  std::vector<char> kept(n, 0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t step = 0; step < keep; ++step) {
    std::size_t best = n;
    double best_z = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < n; ++u) {
      if (kept[u]) continue;
      const double* cu = &c[u * n];
      double z = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (kept[k] || k == u) continue;
        z += p[k] * std::min(nearest[k], cu[k]);
      }
      // Relative tolerance so analytic ties (mutually nearest pairs) go to the
      // lowest index regardless of summation order.
      if (best == n || z < best_z - 1e-12 * std::max(1.0, std::abs(best_z))) {
        best_z = z;
        best = u;
      }
    }
    kept[best] = 1;
    res.kept.push_back(best);
    const double* cb = &c[best * n];
    for (std::size_t k = 0; k < n; ++k) nearest[k] = std::min(nearest[k], cb[k]);
    res.distance = best_z;
  }
  res.reduced = redistribute(set, res.kept);
  if (keep == n) res.distance = 0.0;
  return res;
}

/// Scenarios of a reduced set lying inside the short-term box, renormalised.
inline ScenarioSet select_online(const ScenarioSet& reduced, const PredictionInterval& short_term) {
  short_term.check();
  if (!reduced.interval.lower.empty() && !reduced.interval.contains(short_term))
    throw ScenarioError("short-term interval is not contained in the day-ahead interval");
  ScenarioSet out;
  out.provenance = Provenance::Selected;
  out.seed = reduced.seed;
  out.interval = short_term;
  for (const auto& sc : reduced.scenarios)
    if (short_term.contains(sc.p_hat_w)) out.scenarios.push_back(sc);
  if (out.empty()) throw ScenarioError("no reduced scenario lies inside the short-term interval");
  const double mass = out.total_mass();
  for (auto& sc : out.scenarios) sc.probability = mass > 0.0 ? sc.probability / mass : 1.0 / out.size();
  return out;
}

// ---------------------------------------------------------------------------
// Columnar text format:
//
//   # rtsc-scenarios 1
//   # provenance <sampled|reduced|selected>
//   # seed <u64>
//   # horizon <day_ahead|short_term>
//   # lower <v1> ... <vk>
//   # upper <v1> ... <vk>
//   # columns p_w1 ... p_wk probability origin
//   <rows>

inline void write_scenarios(std::ostream& out, const ScenarioSet& set) {
  out << std::setprecision(17);
  out << "# rtsc-scenarios 1\n";
  out << "# provenance " << to_string(set.provenance) << "\n";
  out << "# seed " << set.seed << "\n";
  out << "# horizon " << to_string(set.interval.horizon) << "\n";
  out << "# lower";
  for (double v : set.interval.lower) out << ' ' << v;
  out << "\n# upper";
  for (double v : set.interval.upper) out << ' ' << v;
  out << "\n# columns";
  for (std::size_t k = 0; k < set.interval.dim(); ++k) out << " p_w" << k + 1;
  out << " probability origin\n";
  for (const auto& sc : set.scenarios) {
    for (double v : sc.p_hat_w) out << v << ' ';
    out << sc.probability << ' ' << sc.origin << "\n";
  }
}

inline ScenarioSet read_scenarios(std::istream& in) {
  ScenarioSet set;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "rtsc-scenarios") {
        int v = 0;
        ls >> v;
        if (v != 1) throw ScenarioError("unsupported scenario file version");
        header = true;
      } else if (key == "provenance") {
        std::string s;
        ls >> s;
        set.provenance = parse_provenance(s);
      } else if (key == "seed") {
        ls >> set.seed;
      } else if (key == "horizon") {
        std::string s;
        ls >> s;
        set.interval.horizon = parse_horizon(s);
      } else if (key == "lower" || key == "upper") {
        auto& dst = key == "lower" ? set.interval.lower : set.interval.upper;
        double v;
        while (ls >> v) dst.push_back(v);
      }
      continue;
    }
    if (!header) throw ScenarioError("missing scenario file header");
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    const std::size_t k = set.interval.dim();
    if (row.size() != k + 2) throw ScenarioError("scenario row has wrong column count");
    Scenario sc;
    sc.p_hat_w.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
    sc.probability = row[k];
    sc.origin = static_cast<std::size_t>(row[k + 1]);
    set.scenarios.push_back(std::move(sc));
  }
  if (!header) throw ScenarioError("empty scenario file");
  return set;
}

}  // namespace rtsc
