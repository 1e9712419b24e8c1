#include "skystack/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>

#include "skystack/errors.hpp"
#include "skystack/glob.hpp"

namespace skystack {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void charge(double seconds) {
  if (seconds > 0.0)
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

std::vector<std::filesystem::path> list_raw_files(
    const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::exists(root)) return files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".fit")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<MapTask> group_splits(std::vector<FileSplit> splits) {
  std::sort(splits.begin(), splits.end(),
            [](const FileSplit& a, const FileSplit& b) {
              if (a.seqfile_id != b.seqfile_id) return a.seqfile_id < b.seqfile_id;
              if (a.block_id != b.block_id) return a.block_id < b.block_id;
              return a.key < b.key;
            });
  std::vector<MapTask> tasks;
  for (FileSplit& s : splits) {
    if (tasks.empty() || tasks.back().splits.back().seqfile_id != s.seqfile_id ||
        tasks.back().splits.back().block_id != s.block_id)
      tasks.emplace_back();
    tasks.back().splits.push_back(std::move(s));
  }
  return tasks;
}

// Runs fn(0..n_items) on up to n_workers threads, pulling indices from a
// shared counter. The first exception stops the pull loop and is rethrown
// on the caller thread after join.
void parallel_run(int n_workers, size_t n_items,
                  const std::function<void(size_t)>& fn) {
  if (n_items == 0) return;
  int workers = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(std::max(1, n_workers)), n_items));
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto body = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_items) return;
      try {
        fn(i);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        stop.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int i = 0; i < workers; ++i) threads.emplace_back(body);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

bool uses_structured_containers(InputStrategy s) {
  return s == InputStrategy::SeqStructuredPrefiltered ||
         s == InputStrategy::CatalogStructured;
}

void require_exists(const std::filesystem::path& path, const char* what,
                    const char* hint) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error(std::string(what) + " not found at " +
                             path.string() + " (" + hint + ")");
}

}  // namespace

std::string_view strategy_name(InputStrategy s) {
  switch (s) {
    case InputStrategy::RawUnfiltered: return "raw-unfiltered";
    case InputStrategy::RawPrefiltered: return "raw-prefiltered";
    case InputStrategy::SeqUnstructured: return "seq-unstructured";
    case InputStrategy::SeqStructuredPrefiltered: return "seq-structured";
    case InputStrategy::CatalogUnstructured: return "catalog-unstructured";
    case InputStrategy::CatalogStructured: return "catalog-structured";
  }
  return "unknown";
}

std::optional<InputStrategy> strategy_from_name(std::string_view name) {
  for (InputStrategy s : kAllStrategies)
    if (strategy_name(s) == name) return s;
  return std::nullopt;
}

Database Database::open(const std::filesystem::path& root) {
  std::filesystem::path config = root / "survey.config";
  if (!std::filesystem::exists(config))
    throw std::runtime_error("no database at " + root.string() +
                             ": missing survey.config (run `skystack "
                             "generate` first)");
  return Database{root, load_survey_config(config)};
}

PlanOutcome plan_splits(InputStrategy strategy, const Query& query,
                        const Database& db, const EngineConfig& cfg) {
  Clock::time_point t0 = Clock::now();
  TaskPlan plan;
  plan.strategy = strategy;

  std::vector<int> strips = strips_overlapping(query.bounds, db.layout());

  switch (strategy) {
    case InputStrategy::RawUnfiltered: {
      require_exists(db.raw_root(), "raw image tree", "run `skystack generate`");
      for (std::filesystem::path& f : list_raw_files(db.raw_root())) {
        charge(cfg.split_rpc_latency);
        MapTask task;
        task.raw_path = std::move(f);
        plan.tasks.push_back(std::move(task));
      }
      break;
    }
    case InputStrategy::RawPrefiltered: {
      require_exists(db.raw_root(), "raw image tree", "run `skystack generate`");
      if (!strips.empty()) {
        GlobPattern pattern = build_glob(db.raw_root(), query.band, strips);
        for (std::filesystem::path& f :
             prefilter_paths(db.raw_root(), pattern)) {
          charge(cfg.split_rpc_latency);
          MapTask task;
          task.raw_path = std::move(f);
          plan.tasks.push_back(std::move(task));
        }
      }
      break;
    }
    case InputStrategy::SeqUnstructured:
    case InputStrategy::SeqStructuredPrefiltered: {
      bool structured = uses_structured_containers(strategy);
      std::filesystem::path dir = db.seq_dir(structured);
      require_exists(dir, "sequence file directory", "run `skystack pack`");
      SeqFileRegistry registry(dir);
      std::optional<BandStripFilter> filter;
      if (structured) filter = BandStripFilter{query.band, strips};

      std::vector<FileSplit> splits;
      for (const std::string& id : registry.list_ids()) {
        if (filter && !filter->matches_container(id)) continue;
        charge(cfg.split_rpc_latency);
        SequenceFileReader& r = registry.reader(id);
        for (const SeqEntry& e : r.index())
          splits.push_back(
              {id, e.offset, e.length, e.key, e.offset / cfg.block_size});
      }
      plan.tasks = group_splits(std::move(splits));
      break;
    }
    case InputStrategy::CatalogUnstructured:
    case InputStrategy::CatalogStructured: {
      bool structured = uses_structured_containers(strategy);
      std::filesystem::path cat_path = db.catalog_path(structured);
      require_exists(cat_path, "catalog", "run `skystack catalog`");
      Catalog catalog = Catalog::load(cat_path);
      std::vector<FileSplit> splits =
          catalog.query(query.band, query.bounds, cfg.block_size);
      std::vector<std::string> referenced;
      for (const FileSplit& s : splits) referenced.push_back(s.seqfile_id);
      std::sort(referenced.begin(), referenced.end());
      referenced.erase(std::unique(referenced.begin(), referenced.end()),
                       referenced.end());
      for (size_t i = 0; i < referenced.size(); ++i)
        charge(cfg.split_rpc_latency);
      plan.tasks = group_splits(std::move(splits));
      break;
    }
  }

  plan.n_tasks = plan.tasks.size();
  plan.n_input_records = 0;
  for (const MapTask& t : plan.tasks) plan.n_input_records += t.record_count();
  return {std::move(plan), seconds_since(t0)};
}

std::vector<CoaddResult> execute(const TaskPlan& plan,
                                 std::span<const Query> queries,
                                 const EngineConfig& cfg, const Database& db,
                                 RunReport& report) {
  if (queries.empty())
    throw std::invalid_argument("execute: need at least one query");
  if (cfg.slots < 1)
    throw std::invalid_argument("execute: slots must be >= 1");

  SeqFileRegistry registry(
      db.seq_dir(uses_structured_containers(plan.strategy)));

  size_t nq = queries.size();
  std::vector<std::vector<ProjectedTile>> buffers(nq);
  std::vector<std::mutex> buffer_mutex(nq);

  std::atomic<uint64_t> discarded_band{0}, discarded_bounds{0},
      contributing{0};
  std::atomic<uint64_t> active{0}, peak{0};

  auto run_task = [&](size_t task_idx) {
    const MapTask& task = plan.tasks[task_idx];
    uint64_t now_active = active.fetch_add(1, std::memory_order_relaxed) + 1;
    uint64_t prev_peak = peak.load(std::memory_order_relaxed);
    while (now_active > prev_peak &&
           !peak.compare_exchange_weak(prev_peak, now_active,
                                       std::memory_order_relaxed)) {
    }
    charge(cfg.mapper_startup_cost);

    auto process = [&](const ImageRecord& record) {
      std::vector<ProjectedTile> tiles = map_fn(record, queries);
      size_t next_tile = 0;
      for (size_t qi = 0; qi < nq; ++qi) {
        if (record.meta.band != queries[qi].band) {
          discarded_band.fetch_add(1, std::memory_order_relaxed);
        } else if (next_tile < tiles.size() &&
                   tiles[next_tile].query_id == queries[qi].id) {
          contributing.fetch_add(1, std::memory_order_relaxed);
          std::lock_guard<std::mutex> lock(buffer_mutex[qi]);
          buffers[qi].push_back(std::move(tiles[next_tile]));
          ++next_tile;
        } else {
          discarded_bounds.fetch_add(1, std::memory_order_relaxed);
        }
      }
    };

    std::string current = task.is_raw() ? task.raw_path.string() : "";
    try {
      if (task.is_raw()) {
        process(read_record_file(task.raw_path));
      } else {
        for (const FileSplit& split : task.splits) {
          current = split.key;
          process(registry.read_record(split));
        }
      }
    } catch (const std::exception& e) {
      active.fetch_sub(1, std::memory_order_relaxed);
      throw std::runtime_error("map task failed on record '" + current +
                               "': " + e.what());
    }
    active.fetch_sub(1, std::memory_order_relaxed);
  };

  Clock::time_point map_t0 = Clock::now();
  parallel_run(cfg.slots, plan.tasks.size(), run_task);
  report.map_phase = seconds_since(map_t0);

  // Shuffle barrier: map outputs are already bucketed per query; hand the
  // buffers to the reducers.
  Clock::time_point shuffle_t0 = Clock::now();
  std::vector<std::vector<ProjectedTile>> shuffled(nq);
  for (size_t qi = 0; qi < nq; ++qi) shuffled[qi] = std::move(buffers[qi]);
  report.shuffle = seconds_since(shuffle_t0);

  Clock::time_point reduce_t0 = Clock::now();
  std::vector<CoaddResult> results(nq);
  parallel_run(std::min<int>(cfg.slots, static_cast<int>(nq)), nq,
               [&](size_t qi) {
                 results[qi] =
                     reduce_fn(queries[qi], std::move(shuffled[qi]));
               });
  report.reduce = seconds_since(reduce_t0);

  report.input_records = discarded_band.load() + discarded_bounds.load() +
                         contributing.load();
  report.mapper_objects = plan.tasks.size();
  report.records_discarded_band = discarded_band.load();
  report.records_discarded_bounds = discarded_bounds.load();
  report.records_contributing = contributing.load();
  report.peak_concurrent_mappers = peak.load();
  report.populated = true;
  return results;
}

RunOutcome run_query(InputStrategy strategy, const Query& query,
                     const Database& db, const EngineConfig& cfg) {
  Clock::time_point t0 = Clock::now();
  RunReport report;

  Clock::time_point setup_t0 = Clock::now();
  // Driver setup: verify the database root and copy the layout; the real
  // work happens in planning and execution.
  if (!std::filesystem::exists(db.root))
    throw std::runtime_error("database directory does not exist: " +
                             db.root.string());
  report.driver_setup = seconds_since(setup_t0);

  PlanOutcome planned = plan_splits(strategy, query, db, cfg);
  report.construct_file_splits = planned.seconds;

  std::span<const Query> one(&query, 1);
  std::vector<CoaddResult> results =
      execute(planned.plan, one, cfg, db, report);

  report.total = seconds_since(t0);
  return {std::move(results.front()), std::move(report)};
}

void report_emit(const RunReport& report, const std::filesystem::path& path,
                 std::string_view provenance) {
  std::ostringstream out;
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "type,name,value\n";
  if (report.populated) {
    out.precision(6);
    out << std::fixed;
    out << "stage,driver_setup," << report.driver_setup << "\n"
        << "stage,construct_file_splits," << report.construct_file_splits << "\n"
        << "stage,map," << report.map_phase << "\n"
        << "stage,shuffle," << report.shuffle << "\n"
        << "stage,reduce," << report.reduce << "\n"
        << "stage,total," << report.total << "\n";
    out << "counter,input_records," << report.input_records << "\n"
        << "counter,mapper_objects," << report.mapper_objects << "\n"
        << "counter,records_discarded_band," << report.records_discarded_band
        << "\n"
        << "counter,records_discarded_bounds," << report.records_discarded_bounds
        << "\n"
        << "counter,records_contributing," << report.records_contributing
        << "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  f << out.str();
  if (!f)
    throw FormatError(FormatErrc::IoFailure,
                      "failed writing report " + path.string());
}

}  // namespace skystack
