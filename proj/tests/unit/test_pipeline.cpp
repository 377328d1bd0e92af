#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtsc/pipeline.hpp"
#include "test_util.hpp"

using namespace rtsc;
using rtsc::testing::case9;
using rtsc::testing::data_path;

namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
  auto cfg = load_config(data_path("case9.json"));
  cfg.epsilon = 0.1;
  cfg.delta = 0.01;
  cfg.samples = 0;
  cfg.reduced = 5;
  cfg.sim.horizon = 2.0;
  cfg.workers = 2;
  return cfg;
}

const OfflineDatabase& small_db() {
  static const OfflineDatabase db = offline_build(case9(), small_config());
  return db;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("rtsc_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  const auto cfg = load_config(data_path("case9.json"));
  EXPECT_EQ(cfg.seed, 20240601u);
  ASSERT_EQ(cfg.contingencies.size(), 1u);
  EXPECT_EQ(cfg.contingencies[0].fault_bus, 8);
  EXPECT_DOUBLE_EQ(cfg.contingencies[0].t_clear, 0.25);
  const json a = config_to_json(cfg);
  EXPECT_EQ(config_to_json(config_from_json(a)), a);
}

TEST(Config, SampleCountBelowBoundRejected) {
  auto cfg = load_config(data_path("case9.json"));
  const auto c = case9();
  EXPECT_EQ(required_samples(cfg, c), cfg.samples);
  cfg.samples = 0;
  EXPECT_EQ(required_samples(cfg, c), sample_complexity(cfg.epsilon, cfg.delta, 3));
  cfg.samples = 100;
  EXPECT_THROW(required_samples(cfg, c), PipelineError);
}

TEST(Workers, ParallelForVisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) {
                 if (i == 17) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  EXPECT_EQ(worker_count(3), 3u);
  EXPECT_GE(worker_count(0), 1u);
}

TEST(Select, InsideBoxOrNearestToCentre) {
  ScenarioSet s;
  for (double x : {0.0, 4.0, 5.0, 6.0, 10.0}) s.scenarios.push_back({{x}, 0.2, 0});
  PredictionInterval box;
  box.lower = {3.5};
  box.upper = {5.5};
  bool fb = true;
  EXPECT_EQ(select_scenarios(s, box, 2, &fb), (std::vector<std::size_t>{1, 2}));
  EXPECT_FALSE(fb);
  box.lower = {6.5};
  box.upper = {7.5};
  EXPECT_EQ(select_scenarios(s, box, 2, &fb), (std::vector<std::size_t>{2, 3}));  // 6 and 5 nearest to 7
  EXPECT_TRUE(fb);
}

TEST(Offline, RecordsCoverEveryScenarioAndContingency) {
  const auto& db = small_db();
  EXPECT_EQ(db.sampled, sample_complexity(0.1, 0.01, 3));
  EXPECT_EQ(db.reduced.size(), 5u);
  EXPECT_NEAR(db.reduced.total_mass(), 1.0, 1e-12);
  ASSERT_EQ(db.records.size(), 5u);
  EXPECT_EQ(db.failures(), 0u);
  for (std::size_t s = 0; s < 5; ++s) {
    EXPECT_EQ(db.records[s].scenario, s);
    EXPECT_EQ(db.records[s].phi.size(), 3);
    EXPECT_GE(db.records[s].runs, 7u);
  }
}

TEST(Offline, WorkerCountDoesNotChangeRecords) {
  auto cfg = small_config();
  cfg.workers = 1;
  const auto serial = offline_build(case9(), cfg);
  const auto& par = small_db();
  ASSERT_EQ(serial.records.size(), par.records.size());
  for (std::size_t k = 0; k < par.records.size(); ++k) {
    EXPECT_EQ(serial.records[k].eta0, par.records[k].eta0);
    EXPECT_EQ(serial.records[k].phi, par.records[k].phi);
  }
}

TEST(Database, SaveLoadSaveIsByteIdentical) {
  const auto a = scratch("db_a"), b = scratch("db_b");
  save_database(small_db(), a);
  const auto back = load_database(a);
  save_database(back, b);
  for (const char* f : {"manifest.json", "case.case", "scenarios.txt", "records.tsv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(back.records.size(), small_db().records.size());
  EXPECT_EQ(back.base.pg_mw, small_db().base.pg_mw);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Database, RejectsForeignDirectory) {
  const auto d = scratch("db_bad");
  fs::create_directories(d);
  write_json_file(d / "manifest.json", json{{"format", "other"}});
  EXPECT_THROW(load_database(d), PipelineError);
  fs::remove_all(d);
}

TEST(Online, NoSimulationAndReportRoundTrip) {
  const auto& db = small_db();
  const auto cfg = small_config();
  const auto before = tds_counter().load();
  const auto rep = online_dispatch(db, short_term_interval(cfg, db.grid), cfg);
  EXPECT_EQ(tds_counter().load(), before);
  EXPECT_EQ(rep.tds_calls, 0u);
  EXPECT_EQ(rep.status, "optimal");
  EXPECT_EQ(rep.cuts, rep.selected.size() * cfg.contingencies.size());
  const json j = report_to_json(rep);
  EXPECT_EQ(report_to_json(report_from_json(j)), j);
}

TEST(Online, IntervalOutsideDayAheadRejected) {
  const auto& db = small_db();
  auto st = db.interval;
  st.upper[0] += 1.0;
  EXPECT_THROW(online_dispatch(db, st, small_config()), PipelineError);
}

TEST(Robustness, NoContingenciesIsFullyRobust) {
  const auto c = case9();
  const auto r = evaluate_robustness(c, case_dispatch(c), prediction_interval(c, Horizon::ShortTerm), {}, 10, 3,
                                     SimConfig{}, 1);
  EXPECT_EQ(r.robust, 10u);
  EXPECT_EQ(r.robustness, 1.0);
  EXPECT_THROW(evaluate_robustness(c, case_dispatch(c), prediction_interval(c, Horizon::ShortTerm), {}, 0, 3,
                                   SimConfig{}, 1),
               PipelineError);
}

TEST(Robustness, SameSeedSameOutcome) {
  const auto c = case9();
  const auto cfg = small_config();
  SimConfig sim = cfg.sim;
  const auto iv = prediction_interval(c, Horizon::ShortTerm);
  const auto a = evaluate_robustness(c, small_db().base, iv, cfg.contingencies, 12, 9, sim, 1);
  const auto b = evaluate_robustness(c, small_db().base, iv, cfg.contingencies, 12, 9, sim, 4);
  EXPECT_EQ(robustness_to_json(a).dump(), robustness_to_json(b).dump());
}
