#pragma once

// Offline/online orchestration: configuration, the offline stability
// database, online dispatch from database records only, Monte-Carlo
// robustness, and the report and plot files written by the command line tool.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rtsc/case_io.hpp"
#include "rtsc/dynamics.hpp"
#include "rtsc/opf.hpp"
#include "rtsc/powerflow.hpp"
#include "rtsc/scenario.hpp"
#include "rtsc/sime.hpp"

namespace rtsc {

using json = nlohmann::json;

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  std::uint64_t seed = 1;
  double epsilon = 0.01;
  double delta = 0.001;
  std::size_t decision_dim = 0;  // 0 = number of generators
  std::size_t samples = 0;       // 0 = the sample complexity bound
  std::size_t reduced = 50;
  std::vector<FaultEvent> contingencies;
  SimConfig sim;
  double step_fraction = 0.01;
  bool use_pfr = true;
  double loss_penalty = 0.1;
  double margin_floor = 0.0;
  std::vector<double> rho;       // empty = equal
  double solver_eps = 1e-8;
  int solver_max_iter = 50000;
  std::size_t fallback_k = 10;
  PredictionInterval short_term; // dim 0 = from the case
  std::size_t robustness_samples = 1000;
  std::uint64_t robustness_seed = 0;  // 0 = derived from seed
  Horizon robustness_horizon = Horizon::ShortTerm;
  double cct_lo = 0.05;
  double cct_hi = 0.5;
  unsigned workers = 0;          // 0 = hardware concurrency
};

inline json interval_to_json(const PredictionInterval& iv) {
  return {{"horizon", to_string(iv.horizon)}, {"lower", iv.lower}, {"upper", iv.upper}};
}

inline PredictionInterval interval_from_json(const json& j) {
  PredictionInterval iv;
  iv.horizon = parse_horizon(j.value("horizon", std::string("short_term")));
  iv.lower = j.at("lower").get<std::vector<double>>();
  iv.upper = j.at("upper").get<std::vector<double>>();
  iv.check();
  return iv;
}

inline json contingency_to_json(const FaultEvent& e) {
  return {{"id", e.id}, {"fault_bus", e.fault_bus}, {"trip_line", e.trip_line}, {"t0", e.t0}, {"t_clear", e.t_clear}};
}

inline FaultEvent contingency_from_json(const json& j) {
  FaultEvent e;
  e.id = j.at("id").get<std::string>();
  e.fault_bus = j.at("fault_bus").get<int>();
  e.trip_line = j.value("trip_line", 0);
  e.t0 = j.value("t0", 0.0);
  e.t_clear = j.at("t_clear").get<double>();
  if (e.t_clear < e.t0) throw PipelineError("contingency " + e.id + " clears before it starts");
  return e;
}

inline PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      c.epsilon = s.value("epsilon", c.epsilon);
      c.delta = s.value("delta", c.delta);
      c.decision_dim = s.value("decision_dim", c.decision_dim);
      c.samples = s.value("samples", c.samples);
    }
    if (j.contains("reduction")) c.reduced = j.at("reduction").value("target", c.reduced);
    if (j.contains("contingencies"))
      for (const auto& e : j.at("contingencies")) c.contingencies.push_back(contingency_from_json(e));
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      c.sim.dt = s.value("dt", c.sim.dt);
      c.sim.horizon = s.value("horizon", c.sim.horizon);
      c.sim.model = parse_machine_model(s.value("model", std::string(to_string(c.sim.model))));
      c.sim.guard = s.value("guard", c.sim.guard);
      c.sim.threshold = s.value("threshold", c.sim.threshold);
    }
    if (j.contains("sensitivity")) c.step_fraction = j.at("sensitivity").value("step_fraction", c.step_fraction);
    if (j.contains("opf")) {
      const auto& o = j.at("opf");
      c.use_pfr = o.value("use_pfr", c.use_pfr);
      c.loss_penalty = o.value("loss_penalty", c.loss_penalty);
      c.margin_floor = o.value("margin_floor", c.margin_floor);
      c.rho = o.value("participation", c.rho);
      c.solver_eps = o.value("eps", c.solver_eps);
      c.solver_max_iter = o.value("max_iter", c.solver_max_iter);
    }
    if (j.contains("online")) {
      const auto& o = j.at("online");
      c.fallback_k = o.value("fallback_k", c.fallback_k);
      if (o.contains("short_term")) c.short_term = interval_from_json(o.at("short_term"));
    }
    if (j.contains("robustness")) {
      const auto& r = j.at("robustness");
      c.robustness_samples = r.value("samples", c.robustness_samples);
      c.robustness_seed = r.value("seed", c.robustness_seed);
      c.robustness_horizon = parse_horizon(r.value("horizon", std::string(to_string(c.robustness_horizon))));
    }
    if (j.contains("cct")) {
      c.cct_lo = j.at("cct").value("t_lo", c.cct_lo);
      c.cct_hi = j.at("cct").value("t_hi", c.cct_hi);
    }
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw PipelineError(std::string("bad config: ") + e.what());
  }
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0) || !(c.delta > 0.0 && c.delta < 1.0))
    throw PipelineError("bad config: epsilon and delta must lie in (0,1)");
  if (c.reduced < 1) throw PipelineError("bad config: reduction target must be positive");
  return c;
}

inline json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["sampling"] = {{"epsilon", c.epsilon}, {"delta", c.delta}, {"decision_dim", c.decision_dim}, {"samples", c.samples}};
  j["reduction"] = {{"target", c.reduced}};
  j["contingencies"] = json::array();
  for (const auto& e : c.contingencies) j["contingencies"].push_back(contingency_to_json(e));
  j["simulation"] = {{"dt", c.sim.dt},         {"horizon", c.sim.horizon},     {"model", to_string(c.sim.model)},
                     {"guard", c.sim.guard},   {"threshold", c.sim.threshold}};
  j["sensitivity"] = {{"step_fraction", c.step_fraction}};
  j["opf"] = {{"use_pfr", c.use_pfr}, {"loss_penalty", c.loss_penalty}, {"margin_floor", c.margin_floor},
              {"participation", c.rho}, {"eps", c.solver_eps}, {"max_iter", c.solver_max_iter}};
  j["online"] = {{"fallback_k", c.fallback_k}};
  if (c.short_term.dim() > 0) j["online"]["short_term"] = interval_to_json(c.short_term);
  j["robustness"] = {{"samples", c.robustness_samples},
                     {"seed", c.robustness_seed},
                     {"horizon", to_string(c.robustness_horizon)}};
  j["cct"] = {{"t_lo", c.cct_lo}, {"t_hi", c.cct_hi}};
  j["workers"] = c.workers;
  return j;
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw PipelineError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw PipelineError("cannot parse " + p.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PipelineError("cannot write " + p.string());
  out << text;
  if (!out) throw PipelineError("write failed for " + p.string());
}

inline void write_json_file(const std::filesystem::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

inline PipelineConfig load_config(const std::filesystem::path& p) { return config_from_json(read_json_file(p)); }

inline std::size_t required_samples(const PipelineConfig& cfg, const NetworkCase& c) {
  const std::size_t n = cfg.decision_dim ? cfg.decision_dim : c.generators.size();
  const std::size_t bound = sample_complexity(cfg.epsilon, cfg.delta, n);
  if (cfg.samples == 0) return bound;
  if (cfg.samples < bound)
    throw PipelineError("configured sample count " + std::to_string(cfg.samples) + " is below the bound " +
                        std::to_string(bound));
  return cfg.samples;
}

inline PredictionInterval short_term_interval(const PipelineConfig& cfg, const NetworkCase& c) {
  return cfg.short_term.dim() > 0 ? cfg.short_term : prediction_interval(c, Horizon::ShortTerm);
}

inline conic::Settings solver_settings(const PipelineConfig& cfg) {
  conic::Settings s = default_opf_settings();
  s.eps_abs = s.eps_rel = cfg.solver_eps;
  s.max_iter = cfg.solver_max_iter;
  return s;
}

// ---------------------------------------------------------------------------
// Worker pool with results indexed by task, so output order never depends on
// scheduling.

inline unsigned worker_count(unsigned requested) {
  if (requested) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Dispatch as stored in databases and reports

struct Dispatch {
  std::string source;
  std::vector<double> pg_mw, qg_mw, vg, rho, wind_mw;
  TerminalRatios gamma;
  double objective = 0.0;
};

inline Dispatch to_dispatch(const DispatchSolution& d, std::string source) {
  return {std::move(source), d.pg_mw, d.qg_mw, d.vg, d.rho, d.wind_mw, d.gamma, d.objective};
}

/// Generator setpoints as written in the case file.
inline Dispatch case_dispatch(const NetworkCase& c) {
  Dispatch d;
  d.source = "case";
  for (const auto& g : c.generators) {
    d.pg_mw.push_back(g.pg);
    d.qg_mw.push_back(g.qg);
    d.vg.push_back(g.vg);
  }
  d.rho = equal_participation(c.generators.size());
  d.wind_mw = forecast(c);
  d.objective = objective_value(c, d.pg_mw, d.rho, RecourseCost{});
  return d;
}

inline OperatingPoint operating_point(const NetworkCase& c, const Dispatch& d, const std::vector<double>& scenario_mw) {
  OperatingPoint op;
  op.pg_mw = evaluate_dispatch(c, d.pg_mw, scenario_mw, d.rho, d.wind_mw).pg_mw;
  op.vg = d.vg;
  op.wind_mw = scenario_mw;
  op.gamma = d.gamma;
  return op;
}

inline json dispatch_to_json(const Dispatch& d) {
  json g = json::array();
  for (const auto& z : d.gamma) g.push_back({z.real(), z.imag()});
  return {{"source", d.source}, {"pg_mw", d.pg_mw}, {"qg_mw", d.qg_mw}, {"vg", d.vg},  {"rho", d.rho},
          {"wind_mw", d.wind_mw}, {"gamma", g},     {"objective", d.objective}};
}

inline Dispatch dispatch_from_json(const json& j) {
  Dispatch d;
  d.source = j.at("source").get<std::string>();
  d.pg_mw = j.at("pg_mw").get<std::vector<double>>();
  d.qg_mw = j.at("qg_mw").get<std::vector<double>>();
  d.vg = j.at("vg").get<std::vector<double>>();
  d.rho = j.at("rho").get<std::vector<double>>();
  d.wind_mw = j.at("wind_mw").get<std::vector<double>>();
  for (const auto& z : j.at("gamma")) d.gamma.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
  d.objective = j.at("objective").get<double>();
  return d;
}

inline void check_dispatch(const NetworkCase& c, const Dispatch& d) {
  if (d.pg_mw.size() != c.generators.size() || d.vg.size() != c.generators.size() ||
      d.rho.size() != c.generators.size())
    throw PipelineError("dispatch does not match the case generators");
  if (d.wind_mw.size() != c.wind_farms.size()) throw PipelineError("dispatch does not match the case wind farms");
  if (!d.gamma.empty() && d.gamma.size() != 2 * c.lines.size())
    throw PipelineError("dispatch router settings do not match the case lines");
}

/// Base dispatch: forecast only, no routers, no stability cuts, no interval
/// extremes; the recourse term uses `iv`.
inline DispatchSolution solve_base_opf(const NetworkCase& c, const PipelineConfig& cfg, const PredictionInterval& iv) {
  OpfOptions o;
  o.use_pfr = false;
  o.robust_limits = false;
  o.loss_penalty = cfg.loss_penalty;
  o.rho = cfg.rho;
  o.interval = iv;
  return solve(build_model(c, ScenarioSet{}, {}, o), solver_settings(cfg));
}

inline bool usable(const conic::SolverStatus& s) {
  return s.state == conic::Status::Optimal || s.state == conic::Status::Inaccurate;
}

// ---------------------------------------------------------------------------
// Offline database

struct DbRecord {
  std::string contingency;
  std::size_t scenario = 0;
  bool ok = false;
  double eta0 = 0.0;
  MarginClass cls = MarginClass::Marginal;
  std::vector<std::size_t> critical;
  Eigen::VectorXd phi;
  Eigen::VectorXd directional;
  std::vector<char> reliable;
  std::size_t runs = 0;
  std::string error;
};

struct OfflineDatabase {
  NetworkCase grid;
  PipelineConfig config;
  PredictionInterval interval;
  std::size_t sampled = 0;
  double reduction_distance = 0.0;
  ScenarioSet reduced;
  Dispatch base;
  std::vector<DbRecord> records;  // contingency-major, then scenario

  std::size_t failures() const {
    std::size_t f = 0;
    for (const auto& r : records) f += r.ok ? 0 : 1;
    return f;
  }
};

struct StageTimes {
  std::vector<std::pair<std::string, double>> stages;  // name, seconds
  void add(std::string name, double s) { stages.emplace_back(std::move(name), s); }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : stages) j[k] = v;
    return j;
  }
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline bool degenerate(const PredictionInterval& iv) {
  for (std::size_t k = 0; k < iv.dim(); ++k)
    if (iv.lower[k] != iv.upper[k]) return false;
  return true;
}

inline OfflineDatabase offline_build(const NetworkCase& c, const PipelineConfig& cfg, StageTimes* times = nullptr) {
  Stopwatch sw;
  OfflineDatabase db;
  db.grid = c;
  db.config = cfg;
  db.interval = prediction_interval(c, Horizon::DayAhead);

  const DispatchSolution base = solve_base_opf(c, cfg, db.interval);
  if (!usable(base.status)) throw PipelineError(std::string("base OPF failed: ") + conic::to_string(base.status.state));
  db.base = to_dispatch(base, "base_opf");
  if (times) times->add("base_opf", sw.lap());

  db.sampled = required_samples(cfg, c);
  if (degenerate(db.interval)) {
    ScenarioSet one;
    one.provenance = Provenance::Reduced;
    one.seed = cfg.seed;
    one.interval = db.interval;
    one.scenarios.push_back({db.interval.lower, 1.0, 0});
    db.reduced = one;
  } else {
    const ScenarioSet sampled = sample_uniform(db.interval, db.sampled, cfg.seed);
    if (times) times->add("sampling", sw.lap());
    const auto red = fast_forward_reduce(sampled, std::min(cfg.reduced, sampled.size()));
    db.reduced = red.reduced;
    db.reduction_distance = red.distance;
  }
  if (times) times->add("reduction", sw.lap());

  const std::size_t ns = db.reduced.size();
  const std::size_t nc = cfg.contingencies.size();
  db.records.resize(ns * nc);
  SensitivityOptions so;
  so.step_fraction = cfg.step_fraction;
  so.rho = db.base.rho;
  Eigen::VectorXd pg0(static_cast<Eigen::Index>(c.generators.size()));
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    pg0(static_cast<Eigen::Index>(g)) = db.base.pg_mw[g] / c.base_mva;
  parallel_for(ns * nc, worker_count(cfg.workers), [&](std::size_t task) {
    const std::size_t ci = task / ns, si = task % ns;
    DbRecord& r = db.records[task];
    r.contingency = cfg.contingencies[ci].id;
    r.scenario = si;
    try {
      const OperatingPoint op = operating_point(c, db.base, db.reduced.scenarios[si].p_hat_w);
      const SensitivityVector sv = trajectory_sensitivity(c, op, cfg.contingencies[ci], cfg.sim, so);
      r.eta0 = sv.eta0;
      r.cls = sv.cls0;
      r.critical = sv.grouping.critical;
      r.phi = sv.phi;
      r.directional = sv.directional;
      r.reliable = sv.reliable;
      r.runs = sv.runs;
      r.ok = std::isfinite(r.eta0) && r.phi.allFinite();
      if (!r.ok) r.error = "non-finite margin or sensitivity";
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  });
  if (times) times->add("stability_records", sw.lap());
  return db;
}

namespace detail {

inline std::string fmt17(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = ",") {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t k = 0; k < v.size(); ++k) s << (k ? sep : "") << v[k];
  return v.empty() ? std::string("-") : s.str();
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  if (s == "-") return out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

inline MarginClass parse_margin_class(const std::string& s) {
  if (s == "stable") return MarginClass::Stable;
  if (s == "unstable") return MarginClass::Unstable;
  if (s == "marginal") return MarginClass::Marginal;
  throw PipelineError("unknown margin class " + s);
}

}  // namespace detail

inline constexpr int kDatabaseVersion = 1;

inline void write_records(std::ostream& out, const std::vector<DbRecord>& recs) {
  out << "# rtsc-records 1\n# contingency scenario ok eta0 class critical runs reliable phi directional error\n";
  for (const auto& r : recs) {
    std::vector<int> rel(r.reliable.begin(), r.reliable.end());
    std::vector<double> phi(r.phi.data(), r.phi.data() + r.phi.size());
    std::vector<double> dir(r.directional.data(), r.directional.data() + r.directional.size());
    out << r.contingency << '\t' << r.scenario << '\t' << (r.ok ? 1 : 0) << '\t' << detail::fmt17(r.eta0) << '\t'
        << to_string(r.cls) << '\t' << detail::join(r.critical) << '\t' << r.runs << '\t' << detail::join(rel) << '\t'
        << detail::join(phi) << '\t' << detail::join(dir) << '\t' << (r.error.empty() ? "-" : r.error) << "\n";
  }
}

inline std::vector<DbRecord> read_records(std::istream& in) {
  std::vector<DbRecord> recs;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# rtsc-records 1", 0) == 0) header = true;
      continue;
    }
    if (!header) throw PipelineError("records file lacks its header");
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, '\t')) f.push_back(tok);
    if (f.size() != 11) throw PipelineError("records row has wrong column count");
    DbRecord r;
    r.contingency = f[0];
    r.scenario = std::stoul(f[1]);
    r.ok = f[2] == "1";
    r.eta0 = std::stod(f[3]);
    r.cls = detail::parse_margin_class(f[4]);
    for (double v : detail::split_doubles(f[5])) r.critical.push_back(static_cast<std::size_t>(v));
    r.runs = std::stoul(f[6]);
    for (double v : detail::split_doubles(f[7])) r.reliable.push_back(static_cast<char>(v != 0.0));
    const auto phi = detail::split_doubles(f[8]);
    const auto dir = detail::split_doubles(f[9]);
    r.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
    r.directional = Eigen::Map<const Eigen::VectorXd>(dir.data(), static_cast<Eigen::Index>(dir.size()));
    r.error = f[10] == "-" ? std::string() : f[10];
    recs.push_back(std::move(r));
  }
  if (!header) throw PipelineError("empty records file");
  return recs;
}

/// Directory layout: manifest.json, case.case, scenarios.txt, records.tsv.
inline void save_database(const OfflineDatabase& db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m;
  m["format"] = "rtsc-database";
  m["version"] = kDatabaseVersion;
  m["case"] = db.grid.name;
  m["config"] = config_to_json(db.config);
  m["config"].erase("workers");  // execution setting, does not affect the records
  m["interval"] = interval_to_json(db.interval);
  m["sampled"] = db.sampled;
  m["reduced"] = db.reduced.size();
  m["reduction_distance"] = db.reduction_distance;
  m["base"] = dispatch_to_json(db.base);
  m["records"] = db.records.size();
  m["failures"] = json::array();
  for (const auto& r : db.records)
    if (!r.ok) m["failures"].push_back({{"contingency", r.contingency}, {"scenario", r.scenario}, {"error", r.error}});
  write_json_file(dir / "manifest.json", m);
  {
    std::ostringstream s;
    write_case(s, db.grid);
    write_text_file(dir / "case.case", s.str());
  }
  {
    std::ostringstream s;
    write_scenarios(s, db.reduced);
    write_text_file(dir / "scenarios.txt", s.str());
  }
  {
    std::ostringstream s;
    write_records(s, db.records);
    write_text_file(dir / "records.tsv", s.str());
  }
}

inline OfflineDatabase load_database(const std::filesystem::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  if (m.value("format", std::string()) != "rtsc-database") throw PipelineError("not an rtsc database: " + dir.string());
  if (m.value("version", 0) != kDatabaseVersion) throw PipelineError("unsupported database version");
  OfflineDatabase db;
  db.grid = load_case((dir / "case.case").string());
  db.config = config_from_json(m.at("config"));
  db.interval = interval_from_json(m.at("interval"));
  db.interval.horizon = Horizon::DayAhead;
  db.sampled = m.at("sampled").get<std::size_t>();
  db.reduction_distance = m.at("reduction_distance").get<double>();
  db.base = dispatch_from_json(m.at("base"));
  {
    std::ifstream in(dir / "scenarios.txt");
    if (!in) throw PipelineError("database lacks scenarios.txt");
    db.reduced = read_scenarios(in);
  }
  {
    std::ifstream in(dir / "records.tsv");
    if (!in) throw PipelineError("database lacks records.tsv");
    db.records = read_records(in);
  }
  if (db.records.size() != m.at("records").get<std::size_t>()) throw PipelineError("record count mismatch");
  return db;
}

// ---------------------------------------------------------------------------
// Online dispatch

struct RunReport {
  std::string case_name;
  Dispatch dispatch;
  std::string status;
  int iterations = 0;
  double cost = 0.0;
  double base_cost = 0.0;
  double cost_delta_percent = 0.0;
  std::vector<std::size_t> selected;  // indices into the database scenarios
  bool fallback = false;
  std::size_t cuts = 0;
  bool exact = false;
  double exactness_ratio = 0.0;
  double completion_violation = 0.0;
  double balance_residual = 0.0;
  std::uint64_t tds_calls = 0;
  PredictionInterval short_term;
  std::map<std::string, std::size_t> constraint_counts;
};

inline json report_to_json(const RunReport& r) {
  json j;
  j["format"] = "rtsc-report";
  j["version"] = 1;
  j["kind"] = "online_dispatch";
  j["case"] = r.case_name;
  j["status"] = r.status;
  j["iterations"] = r.iterations;
  j["dispatch"] = dispatch_to_json(r.dispatch);
  j["cost"] = r.cost;
  j["base_cost"] = r.base_cost;
  j["cost_delta_percent"] = r.cost_delta_percent;
  j["selected"] = r.selected;
  j["fallback"] = r.fallback;
  j["cuts"] = r.cuts;
  j["exact"] = r.exact;
  j["exactness_ratio"] = std::isfinite(r.exactness_ratio) ? json(r.exactness_ratio) : json("inf");
  j["completion_violation"] = r.completion_violation;
  j["balance_residual"] = r.balance_residual;
  j["tds_calls"] = r.tds_calls;
  j["short_term"] = interval_to_json(r.short_term);
  j["constraint_counts"] = r.constraint_counts;
  return j;
}

inline RunReport report_from_json(const json& j) {
  if (j.value("format", std::string()) != "rtsc-report") throw PipelineError("not an rtsc report");
  RunReport r;
  r.case_name = j.at("case").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.iterations = j.at("iterations").get<int>();
  r.dispatch = dispatch_from_json(j.at("dispatch"));
  r.cost = j.at("cost").get<double>();
  r.base_cost = j.at("base_cost").get<double>();
  r.cost_delta_percent = j.at("cost_delta_percent").get<double>();
  r.selected = j.at("selected").get<std::vector<std::size_t>>();
  r.fallback = j.at("fallback").get<bool>();
  r.cuts = j.at("cuts").get<std::size_t>();
  r.exact = j.at("exact").get<bool>();
  const auto& er = j.at("exactness_ratio");
  r.exactness_ratio = er.is_string() ? std::numeric_limits<double>::infinity() : er.get<double>();
  r.completion_violation = j.at("completion_violation").get<double>();
  r.balance_residual = j.at("balance_residual").get<double>();
  r.tds_calls = j.at("tds_calls").get<std::uint64_t>();
  r.short_term = interval_from_json(j.at("short_term"));
  r.constraint_counts = j.at("constraint_counts").get<std::map<std::string, std::size_t>>();
  return r;
}

/// Database scenarios inside the short-term box; when none is, the k nearest
/// to the box centre.
inline std::vector<std::size_t> select_scenarios(const ScenarioSet& reduced, const PredictionInterval& st,
                                                 std::size_t fallback_k, bool* fallback) {
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < reduced.size(); ++s)
    if (st.contains(reduced.scenarios[s].p_hat_w)) idx.push_back(s);
  *fallback = idx.empty();
  if (!idx.empty()) return idx;
  std::vector<double> centre(st.dim());
  for (std::size_t k = 0; k < st.dim(); ++k) centre[k] = 0.5 * (st.lower[k] + st.upper[k]);
  std::vector<std::size_t> order(reduced.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return euclidean(reduced.scenarios[a].p_hat_w, centre) < euclidean(reduced.scenarios[b].p_hat_w, centre);
  });
  order.resize(std::min(fallback_k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// Online stage: selection, cuts from database records, solve and recovery.
/// Performs no time-domain simulation.
inline RunReport online_dispatch(const OfflineDatabase& db, const PredictionInterval& short_term,
                                 const PipelineConfig& cfg, StageTimes* times = nullptr) {
  Stopwatch sw;
  const std::uint64_t tds_before = tds_counter().load();
  const NetworkCase& c = db.grid;
  short_term.check();
  if (short_term.dim() != c.wind_farms.size()) throw PipelineError("short-term interval has wrong farm count");
  if (!db.interval.contains(short_term)) throw PipelineError("short-term interval is not inside the day-ahead interval");

  RunReport rep;
  rep.case_name = c.name;
  rep.short_term = short_term;
  rep.selected = select_scenarios(db.reduced, short_term, cfg.fallback_k, &rep.fallback);
  ScenarioSet sel;
  sel.provenance = Provenance::Selected;
  sel.seed = db.reduced.seed;
  sel.interval = short_term;
  std::vector<std::size_t> position(db.reduced.size(), db.reduced.size());
  for (std::size_t k = 0; k < rep.selected.size(); ++k) {
    position[rep.selected[k]] = k;
    sel.scenarios.push_back(db.reduced.scenarios[rep.selected[k]]);
  }
  const double mass = sel.total_mass();
  for (auto& sc : sel.scenarios) sc.probability = mass > 0.0 ? sc.probability / mass : 1.0 / sel.size();

  Eigen::VectorXd pg0(static_cast<Eigen::Index>(c.generators.size()));
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    pg0(static_cast<Eigen::Index>(g)) = db.base.pg_mw[g] / c.base_mva;
  std::vector<TscConstraint> cuts;
  for (const auto& r : db.records) {
    if (!r.ok || r.scenario >= position.size() || position[r.scenario] == db.reduced.size()) continue;
    cuts.push_back(build_constraint(r.phi, r.eta0, pg0, r.contingency, position[r.scenario]));
  }
  rep.cuts = cuts.size();
  if (times) times->add("selection", sw.lap());

  OpfOptions o;
  o.use_pfr = cfg.use_pfr;
  o.loss_penalty = cfg.loss_penalty;
  o.rho = db.base.rho;
  o.interval = short_term;
  o.margin_floor = cfg.margin_floor;
  const SdpModel model = build_model(c, sel, cuts, o);
  rep.constraint_counts = model.counts;
  if (times) times->add("model_build", sw.lap());
  const DispatchSolution d = solve(model, solver_settings(cfg));
  if (times) times->add("solve", sw.lap());

  rep.status = conic::to_string(d.status.state);
  rep.iterations = d.status.iterations;
  rep.dispatch = to_dispatch(d, "online_dispatch");
  rep.cost = d.objective;
  rep.base_cost = objective_value(c, db.base.pg_mw, db.base.rho, expected_cost_coeff(c, short_term));
  rep.cost_delta_percent = rep.base_cost != 0.0 ? 100.0 * (rep.cost - rep.base_cost) / rep.base_cost : 0.0;
  rep.exact = d.exact;
  rep.exactness_ratio = d.exactness_ratio;
  rep.completion_violation = d.completion_violation;
  rep.balance_residual = d.balance_residual;
  rep.tds_calls = tds_counter().load() - tds_before;
  if (rep.tds_calls != 0) throw PipelineError("online dispatch ran a time-domain simulation");
  return rep;
}

// ---------------------------------------------------------------------------
// Robustness

struct ContingencyRobustness {
  std::string id;
  std::size_t stable = 0;
  std::size_t total = 0;
  double fraction = 1.0;
  bool has_cct = false;
  double cct = 0.0;
  std::string cct_error;
};

struct RobustnessReport {
  std::string dispatch_source;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  PredictionInterval interval;
  std::size_t robust = 0;        // scenarios stable under every contingency
  double robustness = 1.0;
  std::vector<ContingencyRobustness> per_contingency;
  ScenarioSet scenarios;
  std::vector<double> eta;       // scenario-major, then contingency
  std::vector<char> stable;
};

inline RobustnessReport evaluate_robustness(const NetworkCase& c, const Dispatch& d, const PredictionInterval& iv,
                                            const std::vector<FaultEvent>& contingencies, std::size_t count,
                                            std::uint64_t seed, const SimConfig& sim, unsigned workers,
                                            bool with_cct = false, double cct_lo = 0.05, double cct_hi = 0.5) {
  if (count < 1) throw PipelineError("robustness needs at least one scenario");
  check_dispatch(c, d);
  RobustnessReport rep;
  rep.dispatch_source = d.source;
  rep.samples = count;
  rep.seed = seed;
  rep.interval = iv;
  rep.scenarios = sample_uniform(iv, count, seed);
  const std::size_t nc = contingencies.size();
  rep.eta.assign(count * nc, 0.0);
  rep.stable.assign(count * nc, 0);
  parallel_for(count * nc, workers, [&](std::size_t task) {
    const std::size_t s = task / std::max<std::size_t>(nc, 1), k = task % std::max<std::size_t>(nc, 1);
    try {
      const auto run = simulate_margin(c, operating_point(c, d, rep.scenarios.scenarios[s].p_hat_w), contingencies[k], sim);
      rep.eta[task] = run.margin.eta;
      rep.stable[task] = run.tds.stable ? 1 : 0;
    } catch (const std::exception&) {
      rep.eta[task] = std::numeric_limits<double>::quiet_NaN();
      rep.stable[task] = 0;  // failed runs count as unstable
    }
  });
  for (std::size_t k = 0; k < nc; ++k) {
    ContingencyRobustness cr;
    cr.id = contingencies[k].id;
    cr.total = count;
    for (std::size_t s = 0; s < count; ++s) cr.stable += rep.stable[s * nc + k];
    cr.fraction = static_cast<double>(cr.stable) / static_cast<double>(count);
    if (with_cct) {
      try {
        const auto r = estimate_cct(c, operating_point(c, d, d.wind_mw), contingencies[k], sim, cct_lo, cct_hi);
        cr.cct = r.cct;
        cr.has_cct = true;
      } catch (const std::exception& e) {
        cr.cct_error = e.what();
      }
    }
    rep.per_contingency.push_back(cr);
  }
  for (std::size_t s = 0; s < count; ++s) {
    bool all = true;
    for (std::size_t k = 0; k < nc; ++k) all = all && rep.stable[s * nc + k];
    rep.robust += all ? 1 : 0;
  }
  rep.robustness = static_cast<double>(rep.robust) / static_cast<double>(count);
  return rep;
}

inline json robustness_to_json(const RobustnessReport& r) {
  json j;
  j["format"] = "rtsc-report";
  j["version"] = 1;
  j["kind"] = "robustness";
  j["dispatch_source"] = r.dispatch_source;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["interval"] = interval_to_json(r.interval);
  j["robust"] = r.robust;
  j["robustness"] = r.robustness;
  j["contingencies"] = json::array();
  for (const auto& c : r.per_contingency) {
    json cj = {{"id", c.id}, {"stable", c.stable}, {"total", c.total}, {"fraction", c.fraction}};
    cj["cct"] = c.has_cct ? json(c.cct) : json(nullptr);
    if (!c.cct_error.empty()) cj["cct_error"] = c.cct_error;
    j["contingencies"].push_back(cj);
  }
  return j;
}

/// Columnar margin file: one row per (scenario, contingency).
inline std::string robustness_table(const RobustnessReport& r) {
  std::ostringstream s;
  s << std::setprecision(17) << "scenario";
  for (std::size_t k = 0; k < r.interval.dim(); ++k) s << "\tp_w" << k + 1;
  s << "\tcontingency\teta\tstable\n";
  const std::size_t nc = r.per_contingency.size();
  for (std::size_t i = 0; i < r.scenarios.size(); ++i)
    for (std::size_t k = 0; k < nc; ++k) {
      s << i;
      for (double v : r.scenarios.scenarios[i].p_hat_w) s << '\t' << v;
      s << '\t' << r.per_contingency[k].id << '\t' << r.eta[i * nc + k] << '\t' << int(r.stable[i * nc + k]) << "\n";
    }
  return s.str();
}

// ---------------------------------------------------------------------------
// Plot files

inline std::string scenario_table(const ScenarioSet& set) {
  std::ostringstream s;
  s << std::setprecision(17) << "index";
  for (std::size_t k = 0; k < set.interval.dim(); ++k) s << "\tp_w" << k + 1;
  s << "\tprobability\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    s << i;
    for (double v : set.scenarios[i].p_hat_w) s << '\t' << v;
    s << '\t' << set.scenarios[i].probability << "\n";
  }
  return s.str();
}

inline std::string trajectory_table(const Trajectory& tr) {
  std::ostringstream s;
  s << std::setprecision(10) << "t";
  const std::size_t ng = tr.machines();
  for (std::size_t g = 0; g < ng; ++g) s << "\tdelta_" << g + 1;
  for (std::size_t g = 0; g < ng; ++g) s << "\tomega_" << g + 1;
  for (std::size_t g = 0; g < ng; ++g) s << "\tpe_" << g + 1;
  s << "\n";
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    s << tr.t[k];
    for (std::size_t g = 0; g < ng; ++g) s << '\t' << tr.delta(kk, static_cast<Eigen::Index>(g));
    for (std::size_t g = 0; g < ng; ++g) s << '\t' << tr.omega(kk, static_cast<Eigen::Index>(g));
    for (std::size_t g = 0; g < ng; ++g) s << '\t' << tr.pe(kk, static_cast<Eigen::Index>(g));
    s << "\n";
  }
  return s.str();
}

inline std::string omib_table(const OmibTrajectory& o) {
  std::ostringstream s;
  s << std::setprecision(10) << "t\tdelta\tomega\tpm\tpe\tpa\n";
  for (std::size_t k = 0; k < o.t.size(); ++k)
    s << o.t[k] << '\t' << o.delta[k] << '\t' << o.omega[k] << '\t' << o.pm[k] << '\t' << o.pe[k] << '\t' << o.pa[k]
      << "\n";
  return s.str();
}

inline std::string cct_table(const CctResult& r) {
  std::ostringstream s;
  s << std::setprecision(17) << "t_clear\teta\tstable\n";
  for (const auto& p : r.table) s << p.t_clear << '\t' << p.eta << '\t' << int(p.stable) << "\n";
  return s.str();
}

}  // namespace rtsc
