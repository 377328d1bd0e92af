// Command line front end: offline-build, online-dispatch, simulate, cct,
// evaluate-robustness and reduce-scenarios.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rtsc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rtsc;

namespace {

struct Common {
  std::string case_path;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string timings;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* sub, Common& c, bool case_required = true) {
  auto* opt = sub->add_option("--case", c.case_path, "network case file");
  if (case_required) opt->required();
  sub->add_option("--config", c.config_path, "pipeline configuration (JSON)");
  sub->add_option("--seed", c.seed, "random seed, overrides the configuration");
  sub->add_option("--out", c.out, "output directory")->required();
  sub->add_option("--timings", c.timings, "write stage wall times to this JSON file instead of stderr");
  sub->add_option("--workers", c.workers, "worker threads, overrides the configuration");
}

PipelineConfig resolve_config(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  return cfg;
}

void emit_timings(const Common& c, const StageTimes& t) {
  if (c.timings.empty())
    std::cerr << "timings " << t.to_json().dump() << "\n";
  else
    write_json_file(c.timings, t.to_json());
}

fs::path prepare_out(const std::string& out) {
  fs::path p(out);
  fs::create_directories(p);
  return p;
}

const FaultEvent& pick_contingency(const PipelineConfig& cfg, const std::string& id) {
  if (cfg.contingencies.empty()) throw PipelineError("configuration lists no contingencies");
  if (id.empty()) return cfg.contingencies.front();
  for (const auto& e : cfg.contingencies)
    if (e.id == id) return e;
  throw PipelineError("unknown contingency " + id);
}

// "case", "base", a database directory (its base dispatch), a run report or a
// dispatch JSON file.
Dispatch resolve_dispatch(const std::string& choice, const NetworkCase& c, const PipelineConfig& cfg) {
  if (choice.empty() || choice == "case") return case_dispatch(c);
  if (choice == "base") {
    const auto d = solve_base_opf(c, cfg, prediction_interval(c, Horizon::DayAhead));
    if (!usable(d.status)) throw PipelineError("base OPF failed");
    return to_dispatch(d, "base_opf");
  }
  const fs::path p(choice);
  if (fs::is_directory(p)) return load_database(p).base;
  const json j = read_json_file(p);
  Dispatch d = j.contains("dispatch") ? dispatch_from_json(j.at("dispatch")) : dispatch_from_json(j);
  check_dispatch(c, d);
  return d;
}

std::vector<double> resolve_scenario(const std::string& choice, const NetworkCase& c) {
  if (choice.empty() || choice == "forecast") return forecast(c);
  std::vector<double> v;
  std::stringstream ss(choice);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  if (v.size() != c.wind_farms.size()) throw PipelineError("scenario needs one value per wind farm");
  return v;
}

int run_offline(const Common& o) {
  const NetworkCase c = load_case(o.case_path);
  const PipelineConfig cfg = resolve_config(o);
  StageTimes t;
  const OfflineDatabase db = offline_build(c, cfg, &t);
  save_database(db, prepare_out(o.out));
  emit_timings(o, t);
  std::cout << "records " << db.records.size() << " failures " << db.failures() << " scenarios " << db.reduced.size()
            << " sampled " << db.sampled << "\n";
  return db.failures() ? 2 : 0;
}

int run_online(const Common& o, const std::string& db_dir, const std::string& interval_path) {
  const OfflineDatabase db = load_database(db_dir);
  if (!o.case_path.empty()) {
    const NetworkCase c = load_case(o.case_path);
    if (c.name != db.grid.name) throw PipelineError("case does not match the database case " + db.grid.name);
  }
  PipelineConfig cfg = o.config_path.empty() ? db.config : resolve_config(o);
  if (o.workers) cfg.workers = *o.workers;
  const PredictionInterval st =
      interval_path.empty() ? short_term_interval(cfg, db.grid) : interval_from_json(read_json_file(interval_path));
  StageTimes t;
  const RunReport rep = online_dispatch(db, st, cfg, &t);
  const fs::path out = prepare_out(o.out);
  write_json_file(out / "report.json", report_to_json(rep));
  ScenarioSet sel;
  sel.interval = st;
  for (auto i : rep.selected) sel.scenarios.push_back(db.reduced.scenarios[i]);
  write_text_file(out / "selected_scenarios.tsv", scenario_table(sel));
  emit_timings(o, t);
  std::cout << "status " << rep.status << " cost " << rep.cost << " base_cost " << rep.base_cost << " delta% "
            << rep.cost_delta_percent << " selected " << rep.selected.size() << " cuts " << rep.cuts << " exact "
            << rep.exact << " tds_calls " << rep.tds_calls << "\n";
  return rep.status == conic::to_string(conic::Status::Optimal) ||
                 rep.status == conic::to_string(conic::Status::Inaccurate)
             ? 0
             : 2;
}

int run_simulate(const Common& o, const std::string& dispatch, const std::string& scenario, const std::string& cont,
                 std::optional<double> t_clear) {
  const NetworkCase c = load_case(o.case_path);
  const PipelineConfig cfg = resolve_config(o);
  const Dispatch d = resolve_dispatch(dispatch, c, cfg);
  FaultEvent ev = pick_contingency(cfg, cont);
  if (t_clear) ev.t_clear = *t_clear;
  const auto op = operating_point(c, d, resolve_scenario(scenario, c));
  const Trajectory tr = run_tds(c, op, ev, cfg.sim);
  const MarginRun mr = margin_of(tr, cfg.sim);
  const OmibTrajectory omib = build_omib(tr, mr.grouping);
  const fs::path out = prepare_out(o.out);
  write_text_file(out / "trajectory.tsv", trajectory_table(tr));
  write_text_file(out / "omib.tsv", omib_table(omib));
  json s = {{"format", "rtsc-report"},
            {"version", 1},
            {"kind", "simulation"},
            {"contingency", contingency_to_json(ev)},
            {"dispatch_source", d.source},
            {"eta", mr.margin.eta},
            {"margin_class", to_string(mr.margin.cls)},
            {"stable", mr.tds.stable},
            {"critical", mr.grouping.critical}};
  write_json_file(out / "summary.json", s);
  std::cout << "eta " << mr.margin.eta << " class " << to_string(mr.margin.cls) << " stable " << mr.tds.stable << "\n";
  return 0;
}

int run_cct(const Common& o, const std::string& dispatch, const std::string& scenario, const std::string& cont,
            std::optional<double> lo, std::optional<double> hi) {
  const NetworkCase c = load_case(o.case_path);
  const PipelineConfig cfg = resolve_config(o);
  const Dispatch d = resolve_dispatch(dispatch, c, cfg);
  const FaultEvent& ev = pick_contingency(cfg, cont);
  const auto op = operating_point(c, d, resolve_scenario(scenario, c));
  const CctResult r = estimate_cct(c, op, ev, cfg.sim, lo.value_or(cfg.cct_lo), hi.value_or(cfg.cct_hi));
  const fs::path out = prepare_out(o.out);
  write_text_file(out / "cct_table.tsv", cct_table(r));
  write_json_file(out / "cct.json", {{"format", "rtsc-report"},
                                     {"version", 1},
                                     {"kind", "cct"},
                                     {"contingency", ev.id},
                                     {"dispatch_source", d.source},
                                     {"cct", r.cct},
                                     {"fit_residual", r.fit_residual},
                                     {"refined", r.refined}});
  std::cout << "cct " << r.cct << "\n";
  return 0;
}

int run_robustness(const Common& o, const std::string& dispatch, std::optional<std::size_t> samples,
                   const std::string& horizon) {
  const NetworkCase c = load_case(o.case_path);
  const PipelineConfig cfg = resolve_config(o);
  const Dispatch d = resolve_dispatch(dispatch, c, cfg);
  const Horizon h = horizon.empty() ? cfg.robustness_horizon : parse_horizon(horizon);
  const PredictionInterval iv = h == Horizon::ShortTerm ? short_term_interval(cfg, c) : prediction_interval(c, h);
  const std::uint64_t seed = cfg.robustness_seed ? cfg.robustness_seed : cfg.seed;
  StageTimes t;
  Stopwatch sw;
  const RobustnessReport rep = evaluate_robustness(c, d, iv, cfg.contingencies, samples.value_or(cfg.robustness_samples),
                                                   seed, cfg.sim, worker_count(cfg.workers), true, cfg.cct_lo,
                                                   cfg.cct_hi);
  t.add("robustness", sw.lap());
  const fs::path out = prepare_out(o.out);
  write_json_file(out / "robustness.json", robustness_to_json(rep));
  write_text_file(out / "margins.tsv", robustness_table(rep));
  emit_timings(o, t);
  std::cout << "robustness " << rep.robustness << " (" << rep.robust << "/" << rep.samples << ")\n";
  return 0;
}

int run_reduce(const Common& o, std::optional<std::size_t> target, std::optional<std::size_t> samples,
               const std::string& horizon) {
  const NetworkCase c = load_case(o.case_path);
  PipelineConfig cfg = resolve_config(o);
  if (samples) cfg.samples = *samples;
  const Horizon h = horizon.empty() ? Horizon::DayAhead : parse_horizon(horizon);
  const PredictionInterval iv = h == Horizon::ShortTerm ? short_term_interval(cfg, c) : prediction_interval(c, h);
  const std::size_t n = required_samples(cfg, c);
  StageTimes t;
  Stopwatch sw;
  const ScenarioSet sampled = sample_uniform(iv, n, cfg.seed);
  t.add("sampling", sw.lap());
  const auto red = fast_forward_reduce(sampled, std::min(target.value_or(cfg.reduced), sampled.size()));
  t.add("reduction", sw.lap());
  const fs::path out = prepare_out(o.out);
  write_text_file(out / "sampled.tsv", scenario_table(sampled));
  write_text_file(out / "reduced.tsv", scenario_table(red.reduced));
  write_json_file(out / "reduction.json", {{"format", "rtsc-report"},
                                           {"version", 1},
                                           {"kind", "reduction"},
                                           {"seed", cfg.seed},
                                           {"interval", interval_to_json(iv)},
                                           {"sampled", sampled.size()},
                                           {"reduced", red.reduced.size()},
                                           {"kantorovich_distance", red.distance}});
  emit_timings(o, t);
  std::cout << "sampled " << sampled.size() << " reduced " << red.reduced.size() << " distance " << red.distance
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time transient stability constrained dispatch"};
  app.require_subcommand(1);

  Common off, on, sim, cct, rob, red;
  std::string db_dir, interval_path;
  std::string sim_dispatch, sim_scenario, sim_cont, cct_dispatch, cct_scenario, cct_cont, rob_dispatch, rob_horizon,
      red_horizon;
  std::optional<double> sim_tclear, cct_lo, cct_hi;
  std::optional<std::size_t> rob_samples, red_target, red_samples;

  auto* s_off = app.add_subcommand("offline-build", "sample, reduce and build the stability database");
  add_common(s_off, off);

  auto* s_on = app.add_subcommand("online-dispatch", "dispatch from the database for a short-term interval");
  add_common(s_on, on, false);
  s_on->add_option("--db", db_dir, "database directory")->required();
  s_on->add_option("--interval", interval_path, "short-term interval JSON (default: configuration or case)");

  auto* s_sim = app.add_subcommand("simulate", "time-domain simulation and margin for one contingency");
  add_common(s_sim, sim);
  s_sim->add_option("--dispatch", sim_dispatch, "case | base | database dir | report or dispatch JSON");
  s_sim->add_option("--scenario", sim_scenario, "forecast or comma-separated MW per wind farm");
  s_sim->add_option("--contingency", sim_cont, "contingency id (default: first)");
  s_sim->add_option("--t-clear", sim_tclear, "clearing time override, s");

  auto* s_cct = app.add_subcommand("cct", "critical clearing time estimate");
  add_common(s_cct, cct);
  s_cct->add_option("--dispatch", cct_dispatch, "case | base | database dir | report or dispatch JSON");
  s_cct->add_option("--scenario", cct_scenario, "forecast or comma-separated MW per wind farm");
  s_cct->add_option("--contingency", cct_cont, "contingency id (default: first)");
  s_cct->add_option("--t-lo", cct_lo, "bracket lower end, s");
  s_cct->add_option("--t-hi", cct_hi, "bracket upper end, s");

  auto* s_rob = app.add_subcommand("evaluate-robustness", "Monte-Carlo robustness of a dispatch");
  add_common(s_rob, rob);
  s_rob->add_option("--dispatch", rob_dispatch, "case | base | database dir | report or dispatch JSON");
  s_rob->add_option("--samples", rob_samples, "Monte-Carlo scenario count");
  s_rob->add_option("--horizon", rob_horizon, "short_term or day_ahead");

  auto* s_red = app.add_subcommand("reduce-scenarios", "sample and reduce scenarios");
  add_common(s_red, red);
  s_red->add_option("--target", red_target, "reduced scenario count");
  s_red->add_option("--samples", red_samples, "sample count (at least the bound)");
  s_red->add_option("--horizon", red_horizon, "day_ahead or short_term");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*s_off) return run_offline(off);
    if (*s_on) return run_online(on, db_dir, interval_path);
    if (*s_sim) return run_simulate(sim, sim_dispatch, sim_scenario, sim_cont, sim_tclear);
    if (*s_cct) return run_cct(cct, cct_dispatch, cct_scenario, cct_cont, cct_lo, cct_hi);
    if (*s_rob) return run_robustness(rob, rob_dispatch, rob_samples, rob_horizon);
    if (*s_red) return run_reduce(red, red_target, red_samples, red_horizon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
