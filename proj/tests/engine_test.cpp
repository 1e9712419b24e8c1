#include "skystack/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "doctest.h"
#include "skystack/catalog.hpp"
#include "skystack/errors.hpp"
#include "testutil.hpp"

using namespace skystack;
using testutil::TempDir;

namespace {

// Full database (raw tree + both container layouts + both catalogs) built
// from the 180-record test survey.
struct TestDb {
  TempDir tmp;
  std::vector<ImageRecord> records;
  Database db;

  explicit TestDb(uint64_t seed = 42, SurveyConfig cfg = testutil::small_survey()) {
    cfg.seed = seed;
    records = generate_survey(cfg);
    materialize_raw_layout(records, tmp / "raw");
    save_survey_config(cfg, tmp / "survey.config");
    pack_unstructured(records, 8, 7, tmp / "seq-unstructured");
    pack_structured(records, tmp / "seq-structured");
    for (bool structured : {false, true}) {
      SeqFileRegistry registry(tmp.path /
                               (structured ? "seq-structured"
                                           : "seq-unstructured"));
      Catalog::build(registry).save(
          tmp.path / (structured ? "catalog-structured.cat"
                                 : "catalog-unstructured.cat"));
    }
    db = Database::open(tmp.path);
  }
};

Query test_query(Band band = Band::g) {
  return Query{"q", band, SkyBounds::make(37.6, 38.6, -0.45, 0.55), 0.02};
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("strategy names round-trip") {
  for (InputStrategy s : kAllStrategies) {
    auto parsed = strategy_from_name(strategy_name(s));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == s);
  }
  CHECK(!strategy_from_name("sql").has_value());
}

TEST_CASE("plan_splits: per-strategy input record counts") {
  TestDb t;
  EngineConfig cfg;
  Query q = test_query();

  size_t total = t.records.size();
  size_t band_strip = 0, contributing = 0;
  std::vector<int> strips = strips_overlapping(q.bounds, t.db.layout());
  for (const ImageRecord& r : t.records) {
    if (r.meta.band != q.band) continue;
    if (std::find(strips.begin(), strips.end(), r.meta.strip) != strips.end())
      ++band_strip;
    if (bounds_intersect(r.meta.bounds, q.bounds)) ++contributing;
  }
  REQUIRE(contributing > 0);
  REQUIRE(band_strip > contributing);

  CHECK(plan_splits(InputStrategy::RawUnfiltered, q, t.db, cfg)
            .plan.n_input_records == total);
  CHECK(plan_splits(InputStrategy::SeqUnstructured, q, t.db, cfg)
            .plan.n_input_records == total);
  CHECK(plan_splits(InputStrategy::RawPrefiltered, q, t.db, cfg)
            .plan.n_input_records == band_strip);
  CHECK(plan_splits(InputStrategy::SeqStructuredPrefiltered, q, t.db, cfg)
            .plan.n_input_records == band_strip);
  CHECK(plan_splits(InputStrategy::CatalogUnstructured, q, t.db, cfg)
            .plan.n_input_records == contributing);
  CHECK(plan_splits(InputStrategy::CatalogStructured, q, t.db, cfg)
            .plan.n_input_records == contributing);
}

TEST_CASE("plan_splits: task grouping invariant") {
  TestDb t;
  EngineConfig cfg;
  cfg.block_size = 64 * 1024;  // force several blocks per container
  Query q = test_query();

  for (InputStrategy s :
       {InputStrategy::SeqUnstructured, InputStrategy::CatalogStructured}) {
    TaskPlan plan = plan_splits(s, q, t.db, cfg).plan;
    std::set<std::string> seen_keys;
    for (const MapTask& task : plan.tasks) {
      REQUIRE(!task.splits.empty());
      for (const FileSplit& split : task.splits) {
        CHECK(split.seqfile_id == task.splits.front().seqfile_id);
        CHECK(split.block_id == task.splits.front().block_id);
        CHECK(split.block_id == split.offset / cfg.block_size);
        CHECK(seen_keys.insert(split.key).second);  // each split in one task
      }
    }
    CHECK(plan.n_tasks == plan.tasks.size());
  }
}

TEST_CASE("plan_splits: planning cost is charged per located file") {
  TestDb t;
  EngineConfig cfg;
  cfg.split_rpc_latency = 0.01;
  Query q = test_query();

  PlanOutcome raw = plan_splits(InputStrategy::RawUnfiltered, q, t.db, cfg);
  double expected = 180 * 0.01;
  CHECK(raw.seconds > 0.8 * expected);
  CHECK(raw.seconds < 1.2 * expected);

  // container strategies charge per container, so they plan much faster
  PlanOutcome seq = plan_splits(InputStrategy::SeqUnstructured, q, t.db, cfg);
  CHECK(seq.seconds < 0.3 * expected);
}

TEST_CASE("plan_splits: missing artifacts give actionable errors") {
  TempDir tmp;
  SurveyConfig cfg = testutil::small_survey();
  save_survey_config(cfg, tmp / "survey.config");
  materialize_raw_layout(generate_survey(cfg), tmp / "raw");
  Database db = Database::open(tmp.path);

  EngineConfig ecfg;
  Query q = test_query();
  try {
    plan_splits(InputStrategy::CatalogStructured, q, db, ecfg);
    FAIL("expected missing catalog error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("catalog") != std::string::npos);
    CHECK(std::string(e.what()).find("skystack catalog") != std::string::npos);
  }
  CHECK_THROWS_AS(plan_splits(InputStrategy::SeqUnstructured, q, db, ecfg),
                  std::runtime_error);
}

TEST_CASE("execute: slots do not change the answer") {
  TestDb t;
  Query q = test_query();
  EngineConfig cfg;

  TaskPlan plan = plan_splits(InputStrategy::SeqUnstructured, q, t.db, cfg).plan;
  std::span<const Query> one(&q, 1);

  cfg.slots = 1;
  RunReport r1;
  auto res1 = execute(plan, one, cfg, t.db, r1);
  cfg.slots = 8;
  RunReport r8;
  auto res8 = execute(plan, one, cfg, t.db, r8);

  CoaddDiff diff = compare_coadds(res1.front(), res8.front());
  CHECK(diff.max_abs_diff == 0.0);
  CHECK(diff.depth_equal);
  CHECK(r1.input_records == r8.input_records);
  CHECK(r1.records_contributing == r8.records_contributing);
  CHECK(r1.records_discarded_band == r8.records_discarded_band);
  CHECK(r1.records_discarded_bounds == r8.records_discarded_bounds);
  CHECK(r8.peak_concurrent_mappers <= 8);
  CHECK(r1.peak_concurrent_mappers <= 1);
}

TEST_CASE("execute: engine equals the serial oracle bit-exactly") {
  TestDb t;
  Query q = test_query();
  CoaddResult oracle = serial_coadd(t.records, q);

  EngineConfig cfg;
  cfg.slots = 4;
  for (InputStrategy s : kAllStrategies) {
    RunOutcome outcome = run_query(s, q, t.db, cfg);
    CoaddDiff diff = compare_coadds(outcome.result, oracle);
    CHECK(diff.max_abs_diff == 0.0);
    CHECK(diff.depth_equal);
  }
}

TEST_CASE("execute: counter accounting identity") {
  TestDb t;
  Query q = test_query();
  EngineConfig cfg;
  for (InputStrategy s : kAllStrategies) {
    RunOutcome outcome = run_query(s, q, t.db, cfg);
    const RunReport& r = outcome.report;
    CHECK(r.input_records == r.records_discarded_band +
                                 r.records_discarded_bounds +
                                 r.records_contributing);
    CHECK(r.mapper_objects <= r.input_records);
    CHECK(r.populated);
    CHECK(r.total >= r.driver_setup + r.construct_file_splits + r.map_phase +
                         r.shuffle + r.reduce - 0.05);
  }
}

TEST_CASE("execute: mapper reuse never exceeds input counts") {
  TestDb t;
  Query q = test_query();
  EngineConfig cfg;
  cfg.block_size = 64 * 1024;

  RunOutcome unstructured =
      run_query(InputStrategy::CatalogUnstructured, q, t.db, cfg);
  RunOutcome structured =
      run_query(InputStrategy::CatalogStructured, q, t.db, cfg);
  CHECK(unstructured.report.records_contributing ==
        structured.report.records_contributing);
  CHECK(structured.report.mapper_objects <=
        unstructured.report.mapper_objects);
}

TEST_CASE("execute: two simultaneous queries match their single runs") {
  TestDb t;
  EngineConfig cfg;
  std::vector<Query> queries = {
      {"qa", Band::g, SkyBounds::make(37.6, 38.6, -0.45, 0.55), 0.02},
      {"qb", Band::r, SkyBounds::make(37.2, 37.9, -0.8, 0.1), 0.02},
  };

  TaskPlan plan =
      plan_splits(InputStrategy::SeqUnstructured, queries[0], t.db, cfg).plan;
  RunReport both_report;
  auto both = execute(plan, queries, cfg, t.db, both_report);
  REQUIRE(both.size() == 2);

  for (size_t i = 0; i < queries.size(); ++i) {
    CoaddResult single = serial_coadd(t.records, queries[i]);
    CoaddDiff diff = compare_coadds(both[i], single);
    CHECK(diff.max_abs_diff == 0.0);
    CHECK(diff.depth_equal);
  }
  // per (record, query) accounting still balances
  CHECK(both_report.input_records ==
        2 * t.records.size());
  CHECK(both_report.input_records ==
        both_report.records_discarded_band +
            both_report.records_discarded_bounds +
            both_report.records_contributing);
}

TEST_CASE("execute: a corrupt record aborts the run with its key") {
  TestDb t;
  Query q = test_query();
  EngineConfig cfg;
  TaskPlan plan =
      plan_splits(InputStrategy::CatalogStructured, q, t.db, cfg).plan;
  REQUIRE(!plan.tasks.empty());

  // corrupt the container payload behind the first planned split
  const FileSplit& victim = plan.tasks.front().splits.front();
  std::filesystem::path container =
      t.db.seq_dir(true) / (victim.seqfile_id + ".seq");
  {
    std::fstream f(container, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(static_cast<std::streamoff>(victim.offset));
    f.put('X');  // clobber the record magic
  }

  std::span<const Query> one(&q, 1);
  RunReport report;
  try {
    execute(plan, one, cfg, t.db, report);
    FAIL("expected abort");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(victim.key) != std::string::npos);
  }
}

TEST_CASE("report_emit: empty report writes only the header") {
  TempDir tmp;
  RunReport empty;
  report_emit(empty, tmp / "r.csv");
  std::ifstream in(tmp / "r.csv");
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "type,name,value");
  CHECK(!std::getline(in, line));
}

TEST_CASE("report_emit: populated report carries stages and counters") {
  TestDb t;
  TempDir out;
  RunOutcome outcome =
      run_query(InputStrategy::CatalogStructured, test_query(), t.db, {});
  report_emit(outcome.report, out / "r.csv", "skystack coadd --test");

  std::ifstream in(out / "r.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# skystack coadd --test");
  std::getline(in, line);
  CHECK(line == "type,name,value");
  size_t stages = 0, counters = 0;
  while (std::getline(in, line)) {
    if (line.rfind("stage,", 0) == 0) ++stages;
    if (line.rfind("counter,", 0) == 0) ++counters;
  }
  CHECK(stages == 6);
  CHECK(counters == 5);
}

}  // TEST_SUITE
