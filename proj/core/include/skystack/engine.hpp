#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "skystack/catalog.hpp"
#include "skystack/coadd.hpp"
#include "skystack/seqfile.hpp"
#include "skystack/survey.hpp"

namespace skystack {

// The six ways of feeding exposures to a run. They differ in planning and
// I/O cost only: whatever superset of the contributing records a strategy
// plans, the coadd comes out bit-identical.
enum class InputStrategy {
  RawUnfiltered,
  RawPrefiltered,
  SeqUnstructured,
  SeqStructuredPrefiltered,
  CatalogUnstructured,
  CatalogStructured,
};

inline constexpr std::array<InputStrategy, 6> kAllStrategies = {
    InputStrategy::RawUnfiltered,          InputStrategy::RawPrefiltered,
    InputStrategy::SeqUnstructured,        InputStrategy::SeqStructuredPrefiltered,
    InputStrategy::CatalogUnstructured,    InputStrategy::CatalogStructured,
};

std::string_view strategy_name(InputStrategy s);
std::optional<InputStrategy> strategy_from_name(std::string_view name);

struct EngineConfig {
  int slots = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));  // max concurrent mappers
  uint64_t block_size = 64ull << 20;                       // bytes, mapper grouping
  double split_rpc_latency = 0.0;   // seconds charged per located file/container
  double mapper_startup_cost = 0.0; // seconds charged per mapper object
};

// One mapper object's worth of input: either a single raw exposure file or
// a group of splits sharing (seqfile_id, block_id).
struct MapTask {
  std::filesystem::path raw_path;  // raw strategies only
  std::vector<FileSplit> splits;   // container strategies only

  bool is_raw() const { return splits.empty(); }
  size_t record_count() const { return is_raw() ? 1 : splits.size(); }
};

struct TaskPlan {
  InputStrategy strategy = InputStrategy::RawUnfiltered;
  std::vector<MapTask> tasks;
  size_t n_input_records = 0;
  size_t n_tasks = 0;
};

// Stage timings and exact counters of one run. Counters are accumulated
// per (record, query) evaluation, so for the usual single-query run
// input_records = discarded_band + discarded_bounds + contributing holds
// record by record.
struct RunReport {
  double driver_setup = 0.0;
  double construct_file_splits = 0.0;
  double map_phase = 0.0;
  double shuffle = 0.0;
  double reduce = 0.0;
  double total = 0.0;

  uint64_t input_records = 0;
  uint64_t mapper_objects = 0;
  uint64_t records_discarded_band = 0;
  uint64_t records_discarded_bounds = 0;
  uint64_t records_contributing = 0;

  uint64_t peak_concurrent_mappers = 0;  // diagnostic, not part of the CSV
  bool populated = false;
};

// Writes the report as CSV rows "stage,<name>,<seconds>" and
// "counter,<name>,<value>" under a "type,name,value" header, in fixed
// order. An unpopulated report produces a header-only file. A non-empty
// provenance string is emitted first as a '#' comment.
void report_emit(const RunReport& report, const std::filesystem::path& path,
                 std::string_view provenance = {});

// Handles to one materialized database directory:
//   <root>/survey.config      generator parameters (gives the layout)
//   <root>/raw/...            raw directory hierarchy
//   <root>/seq-unstructured/  randomly packed containers
//   <root>/seq-structured/    per-(band,strip) containers
//   <root>/catalog-unstructured.cat, catalog-structured.cat
struct Database {
  std::filesystem::path root;
  SurveyConfig survey;

  static Database open(const std::filesystem::path& root);

  CameraLayout layout() const { return survey.layout(); }
  std::filesystem::path raw_root() const { return root / "raw"; }
  std::filesystem::path seq_dir(bool structured) const {
    return root / (structured ? "seq-structured" : "seq-unstructured");
  }
  std::filesystem::path catalog_path(bool structured) const {
    return root / (structured ? "catalog-structured.cat"
                              : "catalog-unstructured.cat");
  }
};

struct PlanOutcome {
  TaskPlan plan;
  double seconds = 0.0;  // measured planning duration, charges included
};

// Enumerates the strategy's input units and groups them into map tasks.
// Location cost is simulated: split_rpc_latency is charged (slept) once
// per located raw file, or once per opened/referenced container --- which
// is exactly why strategies with fewer on-disk files plan faster. Throws
// with an actionable message when a prerequisite artifact is missing.
PlanOutcome plan_splits(InputStrategy strategy, const Query& query,
                        const Database& db, const EngineConfig& cfg);

// Runs the plan on a pool of cfg.slots workers, one mapper object per
// task, map outputs shuffled per query, then each query reduced in sorted
// order. Results are bit-identical regardless of slots or interleaving.
// A mapper failure aborts the whole run naming the offending record.
std::vector<CoaddResult> execute(const TaskPlan& plan,
                                 std::span<const Query> queries,
                                 const EngineConfig& cfg, const Database& db,
                                 RunReport& report);

struct RunOutcome {
  CoaddResult result;
  RunReport report;
};

// plan_splits + execute for one query, with the full stage breakdown.
RunOutcome run_query(InputStrategy strategy, const Query& query,
                     const Database& db, const EngineConfig& cfg);

}  // namespace skystack
