// skystack command-line driver: dataset generation, container packing,
// catalog construction, coadd runs per input strategy, and the strategy
// benchmark matrix.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skystack/catalog.hpp"
#include "skystack/coadd.hpp"
#include "skystack/engine.hpp"
#include "skystack/errors.hpp"
#include "skystack/seqfile.hpp"
#include "skystack/survey.hpp"

namespace fs = std::filesystem;
using namespace skystack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

std::string g_invocation;

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

SkyBounds parse_bounds(const std::string& text) {
  double v[4];
  std::istringstream in(text);
  std::string part;
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(in, part, ':'))
      throw std::invalid_argument(
          "bounds must be ra_min:ra_max:dec_min:dec_max");
    v[i] = std::stod(part);
  }
  if (std::getline(in, part, ':'))
    throw std::invalid_argument("bounds has extra fields");
  return SkyBounds::make(v[0], v[1], v[2], v[3]);
}

Band parse_band(const std::string& text) {
  if (text.size() == 1) {
    if (auto b = band_from_char(text[0])) return *b;
  }
  throw std::invalid_argument("band must be one of u, g, r, i, z");
}

InputStrategy parse_strategy(const std::string& text) {
  if (auto s = strategy_from_name(text)) return *s;
  std::string names;
  for (InputStrategy s : kAllStrategies) {
    if (!names.empty()) names += ", ";
    names += strategy_name(s);
  }
  throw std::invalid_argument("unknown strategy '" + text + "' (expected " +
                              names + ")");
}

void write_manifest(const std::vector<ImageRecord>& records,
                    const fs::path& db_root) {
  std::vector<const ImageRecord*> ordered;
  ordered.reserve(records.size());
  for (const ImageRecord& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const ImageRecord* a, const ImageRecord* b) {
              return a->meta.key() < b->meta.key();
            });

  std::ostringstream out;
  out << "# " << g_invocation << "\n";
  out << "key,run,rerun,band,strip,field,ra_min,ra_max,dec_min,dec_max,path\n";
  out.precision(17);
  for (const ImageRecord* r : ordered) {
    const ImageMeta& m = r->meta;
    out << m.key() << ',' << m.run << ',' << m.rerun << ','
        << band_char(m.band) << ',' << m.strip << ',' << m.field << ','
        << m.bounds.ra_min << ',' << m.bounds.ra_max << ',' << m.bounds.dec_min
        << ',' << m.bounds.dec_max << ','
        << raw_record_path("raw", m).generic_string() << "\n";
  }
  std::ofstream f(db_root / "manifest.csv", std::ios::trunc);
  f << out.str();
  if (!f)
    throw FormatError(FormatErrc::IoFailure, "failed writing manifest.csv");
}

struct EngineFlags {
  int slots = EngineConfig{}.slots;
  uint64_t block_size = EngineConfig{}.block_size;
  double rpc_latency = 0.0;
  double startup_cost = 0.0;

  EngineConfig config() const {
    EngineConfig cfg;
    cfg.slots = slots;
    cfg.block_size = block_size;
    cfg.split_rpc_latency = rpc_latency;
    cfg.mapper_startup_cost = startup_cost;
    return cfg;
  }
};

void add_engine_flags(CLI::App* cmd, EngineFlags& flags, double default_rpc,
                      double default_startup) {
  flags.rpc_latency = default_rpc;
  flags.startup_cost = default_startup;
  cmd->add_option("--slots", flags.slots,
                  "max concurrent mappers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--block-size", flags.block_size,
                  "storage block size in bytes for mapper grouping")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--rpc-latency", flags.rpc_latency,
                  "simulated per-file location cost, seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--startup-cost", flags.startup_cost,
                  "simulated mapper startup cost, seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

int cmd_generate(const fs::path& config_path, const fs::path& out_dir) {
  SurveyConfig cfg = load_survey_config(config_path);
  std::vector<ImageRecord> records = generate_survey(cfg);
  fs::create_directories(out_dir);
  materialize_raw_layout(records, out_dir / "raw");
  save_survey_config(cfg, out_dir / "survey.config");
  write_manifest(records, out_dir);
  std::cout << "generated " << records.size() << " records under "
            << (out_dir / "raw").string() << "\n"
            << "manifest: " << (out_dir / "manifest.csv").string() << "\n";
  return 0;
}

int cmd_pack(const fs::path& db_root, const std::string& policy, int n_files,
             uint64_t seed) {
  std::vector<ImageRecord> records = load_raw_records(db_root / "raw");
  if (records.empty())
    throw std::runtime_error("no records under " +
                             (db_root / "raw").string() +
                             " (run `skystack generate` first)");
  bool structured = policy == "structured";
  fs::path out_dir = db_root / (structured ? "seq-structured"
                                           : "seq-unstructured");
  PackResult result = structured
                          ? pack_structured(records, out_dir)
                          : pack_unstructured(records, n_files, seed, out_dir);
  std::cout << "packed " << result.total_entries << " records into "
            << result.ids.size() << " containers under " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_catalog(const fs::path& db_root, const std::string& policy) {
  bool structured = policy == "structured";
  fs::path dir = db_root / (structured ? "seq-structured" : "seq-unstructured");
  if (!fs::exists(dir))
    throw std::runtime_error("sequence file directory not found: " +
                             dir.string() + " (run `skystack pack --policy " +
                             policy + "` first)");
  SeqFileRegistry registry(dir);
  Catalog catalog = Catalog::build(registry);
  fs::path out = db_root / (structured ? "catalog-structured.cat"
                                       : "catalog-unstructured.cat");
  catalog.save(out);
  std::cout << "catalogued " << catalog.size() << " records into "
            << out.string() << "\n";
  return 0;
}

int cmd_coadd(const fs::path& db_root, const std::string& strategy_text,
              const std::string& band_text, const std::string& bounds_text,
              double scale, const std::string& query_id,
              const fs::path& out_prefix, const EngineFlags& flags) {
  InputStrategy strategy = parse_strategy(strategy_text);
  Database db = Database::open(db_root);

  Query query;
  query.id = query_id;
  query.band = parse_band(band_text);
  query.bounds = parse_bounds(bounds_text);
  query.pixel_scale = scale > 0.0 ? scale : db.survey.pixel_scale;

  RunOutcome outcome = run_query(strategy, query, db, flags.config());

  if (out_prefix.has_parent_path())
    fs::create_directories(out_prefix.parent_path());
  fs::path coadd_path = out_prefix;
  coadd_path += ".cdf";
  fs::path report_path = out_prefix;
  report_path += ".report.csv";
  write_coadd(coadd_path, outcome.result);
  report_emit(outcome.report, report_path, g_invocation);

  std::cout << strategy_name(strategy) << ": " << outcome.report.input_records
            << " input records, " << outcome.report.records_contributing
            << " contributing, " << outcome.report.mapper_objects
            << " mapper objects, total " << std::fixed << std::setprecision(3)
            << outcome.report.total << " s\n"
            << "coadd:  " << coadd_path.string() << "\n"
            << "report: " << report_path.string() << "\n";
  return 0;
}

int cmd_oracle(const fs::path& db_root, const std::string& band_text,
               const std::string& bounds_text, double scale,
               const std::string& query_id, const fs::path& out_prefix) {
  Database db = Database::open(db_root);
  std::vector<ImageRecord> records = load_raw_records(db.raw_root());

  Query query;
  query.id = query_id;
  query.band = parse_band(band_text);
  query.bounds = parse_bounds(bounds_text);
  query.pixel_scale = scale > 0.0 ? scale : db.survey.pixel_scale;

  CoaddResult result = serial_coadd(records, query);
  if (out_prefix.has_parent_path())
    fs::create_directories(out_prefix.parent_path());
  fs::path coadd_path = out_prefix;
  coadd_path += ".cdf";
  write_coadd(coadd_path, result);

  uint64_t covered = 0;
  for (uint32_t d : result.depth)
    if (d > 0) ++covered;
  std::cout << "oracle over " << records.size() << " records, grid "
            << result.wcs.width << "x" << result.wcs.height << ", " << covered
            << " covered pixels\ncoadd:  " << coadd_path.string() << "\n";
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const fs::path& db_root,
              const std::vector<std::string>& strategy_texts,
              const std::string& band_text, double center_ra,
              double center_dec, double scale, int reps,
              const fs::path& out_dir, const EngineFlags& flags) {
  Database db = Database::open(db_root);
  Band band = parse_band(band_text);
  double scale_v = scale > 0.0 ? scale : db.survey.pixel_scale;
  if (center_ra < 0.0)
    center_ra = db.survey.ra_min +
                0.5 * (db.survey.ra_max - db.survey.ra_min);
  // center_dec defaults to the stripe center via the flag default

  std::vector<InputStrategy> strategies;
  if (strategy_texts.empty()) {
    strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
  } else {
    for (const std::string& t : strategy_texts)
      strategies.push_back(parse_strategy(t));
  }

  std::vector<Query> queries;
  queries.push_back({"q-large", band,
                     SkyBounds::make(center_ra - 0.5, center_ra + 0.5,
                                     center_dec - 0.5, center_dec + 0.5),
                     scale_v});
  queries.push_back({"q-small", band,
                     SkyBounds::make(center_ra - 0.125, center_ra + 0.125,
                                     center_dec - 0.125, center_dec + 0.125),
                     scale_v});

  fs::create_directories(out_dir);
  std::ostringstream summary;
  summary << "# " << g_invocation << "\n";
  summary << "strategy,query,planning_s,map_s,reduce_s,total_s,"
             "input_records,mapper_objects\n";

  EngineConfig cfg = flags.config();
  for (InputStrategy strategy : strategies) {
    for (const Query& query : queries) {
      std::vector<RunReport> reports;
      for (int rep = 0; rep < reps; ++rep) {
        RunOutcome outcome = run_query(strategy, query, db, cfg);
        if (!reports.empty()) {
          const RunReport& first = reports.front();
          const RunReport& now = outcome.report;
          if (now.input_records != first.input_records ||
              now.records_contributing != first.records_contributing ||
              now.mapper_objects != first.mapper_objects)
            throw std::runtime_error(
                std::string("non-deterministic counters across repetitions "
                            "for ") +
                std::string(strategy_name(strategy)) + "/" + query.id);
        }
        reports.push_back(outcome.report);
      }

      std::vector<double> planning, map_s, reduce_s, total_s;
      for (const RunReport& r : reports) {
        planning.push_back(r.construct_file_splits);
        map_s.push_back(r.map_phase);
        reduce_s.push_back(r.reduce);
        total_s.push_back(r.total);
      }
      // Report file: the repetition with the median total.
      std::vector<double> sorted_total = total_s;
      std::sort(sorted_total.begin(), sorted_total.end());
      double med_total = sorted_total[sorted_total.size() / 2];
      size_t med_idx = 0;
      for (size_t i = 0; i < total_s.size(); ++i)
        if (total_s[i] == med_total) med_idx = i;
      fs::path report_path =
          out_dir / ("report-" + std::string(strategy_name(strategy)) + "-" +
                     query.id + ".csv");
      report_emit(reports[med_idx], report_path, g_invocation);

      summary << strategy_name(strategy) << ',' << query.id << ','
              << std::fixed << std::setprecision(6) << median(planning) << ','
              << median(map_s) << ',' << median(reduce_s) << ','
              << median(total_s) << ',' << reports.front().input_records
              << ',' << reports.front().mapper_objects << "\n";
      std::cout << strategy_name(strategy) << " " << query.id << ": total "
                << std::fixed << std::setprecision(3) << median(total_s)
                << " s (" << reports.front().input_records << " records, "
                << reports.front().mapper_objects << " mappers)\n";
    }
  }

  std::ofstream f(out_dir / "summary.csv", std::ios::trunc);
  f << summary.str();
  if (!f)
    throw FormatError(FormatErrc::IoFailure, "failed writing summary.csv");
  std::cout << "summary: " << (out_dir / "summary.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::vector<fs::path>& paths) {
  for (const fs::path& path : paths) {
    std::ifstream in(path);
    if (!in)
      throw FormatError(FormatErrc::IoFailure,
                        "cannot open report " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      rows.push_back(std::move(cells));
    }
    std::vector<size_t> widths;
    for (const auto& row : rows) {
      if (widths.size() < row.size()) widths.resize(row.size());
      for (size_t i = 0; i < row.size(); ++i)
        widths[i] = std::max(widths[i], row[i].size());
    }
    std::cout << path.string() << "\n";
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i)
        std::cout << "  " << std::left << std::setw(static_cast<int>(widths[i]))
                  << row[i];
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_invocation = join_args(argc, argv);

  CLI::App app{"skystack: a parallel image-coaddition engine"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "generate a synthetic survey and materialize the raw tree");
  fs::path gen_config, gen_out;
  generate->add_option("--config", gen_config, "survey config file")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--out", gen_out, "database directory")->required();

  // pack
  auto* pack = app.add_subcommand(
      "pack", "pack the raw tree into sequence file containers");
  fs::path pack_db;
  std::string pack_policy;
  int pack_n_files = 8;
  uint64_t pack_seed = 1;
  pack->add_option("--db", pack_db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  pack->add_option("--policy", pack_policy, "unstructured | structured")
      ->required()
      ->check(CLI::IsMember({"unstructured", "structured"}));
  auto* nfiles_opt =
      pack->add_option("--n-files", pack_n_files,
                       "container count for unstructured packing")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
  pack->add_option("--seed", pack_seed, "assignment seed for unstructured")
      ->capture_default_str();

  // catalog
  auto* catalog = app.add_subcommand(
      "catalog", "build the exact metadata catalog over packed containers");
  fs::path cat_db;
  std::string cat_policy;
  catalog->add_option("--db", cat_db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  catalog->add_option("--policy", cat_policy, "unstructured | structured")
      ->required()
      ->check(CLI::IsMember({"unstructured", "structured"}));

  // coadd
  auto* coadd = app.add_subcommand(
      "coadd", "run one coadd query under one input strategy");
  fs::path coadd_db, coadd_out;
  std::string coadd_strategy, coadd_band, coadd_bounds,
      coadd_query_id = "query";
  double coadd_scale = 0.0;
  EngineFlags coadd_flags;
  coadd->add_option("--db", coadd_db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  coadd->add_option("--strategy", coadd_strategy,
                    "raw-unfiltered | raw-prefiltered | seq-unstructured | "
                    "seq-structured | catalog-unstructured | "
                    "catalog-structured")
      ->required();
  coadd->add_option("--band", coadd_band, "bandpass (u,g,r,i,z)")->required();
  coadd->add_option("--bounds", coadd_bounds,
                    "query bounds ra_min:ra_max:dec_min:dec_max, degrees")
      ->required();
  coadd->add_option("--scale", coadd_scale,
                    "output pixel scale, degrees/pixel (default: survey scale)");
  coadd->add_option("--query-id", coadd_query_id, "query identifier")
      ->capture_default_str();
  coadd->add_option("--out", coadd_out, "output path prefix")->required();
  add_engine_flags(coadd, coadd_flags, 0.0, 0.0);

  // oracle
  auto* oracle = app.add_subcommand(
      "oracle", "run the serial reference coadd over the raw tree");
  fs::path oracle_db, oracle_out;
  std::string oracle_band, oracle_bounds, oracle_query_id = "query";
  double oracle_scale = 0.0;
  oracle->add_option("--db", oracle_db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  oracle->add_option("--band", oracle_band, "bandpass (u,g,r,i,z)")
      ->required();
  oracle->add_option("--bounds", oracle_bounds,
                     "query bounds ra_min:ra_max:dec_min:dec_max, degrees")
      ->required();
  oracle->add_option("--scale", oracle_scale,
                     "output pixel scale, degrees/pixel (default: survey scale)");
  oracle->add_option("--query-id", oracle_query_id, "query identifier")
      ->capture_default_str();
  oracle->add_option("--out", oracle_out, "output path prefix")->required();

  // bench
  auto* bench = app.add_subcommand(
      "bench", "run the strategy benchmark matrix and emit summary CSV");
  fs::path bench_db, bench_out;
  std::vector<std::string> bench_strategies;
  std::string bench_band = "r";
  double bench_center_ra = -1.0, bench_center_dec = 0.0, bench_scale = 0.0;
  int bench_reps = 3;
  EngineFlags bench_flags;
  bench->add_option("--db", bench_db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  bench->add_option("--strategies", bench_strategies,
                    "strategies to run (default: all six)")
      ->delimiter(',');
  bench->add_option("--band", bench_band, "bandpass")->capture_default_str();
  bench->add_option("--center-ra", bench_center_ra,
                    "query center RA (default: survey center)");
  bench->add_option("--center-dec", bench_center_dec, "query center Dec")
      ->capture_default_str();
  bench->add_option("--scale", bench_scale,
                    "output pixel scale (default: survey scale)");
  bench->add_option("--reps", bench_reps, "repetitions per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--out", bench_out, "output directory")->required();
  // Calibrated to reproduce the per-file location bottleneck at realistic
  // magnitude; tests and quick runs override with ~0.
  add_engine_flags(bench, bench_flags, 0.18, 2.0);

  // report
  auto* report = app.add_subcommand("report", "pretty-print report CSVs");
  std::vector<fs::path> report_paths;
  report->add_option("paths", report_paths, "report/summary CSV files")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_config, gen_out);
    if (pack->parsed()) {
      if (pack_policy == "structured" && nfiles_opt->count() > 0) {
        std::cerr << "error: --n-files only applies to unstructured packing\n";
        return kExitUsage;
      }
      return cmd_pack(pack_db, pack_policy, pack_n_files, pack_seed);
    }
    if (catalog->parsed()) return cmd_catalog(cat_db, cat_policy);
    if (coadd->parsed())
      return cmd_coadd(coadd_db, coadd_strategy, coadd_band, coadd_bounds,
                       coadd_scale, coadd_query_id, coadd_out, coadd_flags);
    if (oracle->parsed())
      return cmd_oracle(oracle_db, oracle_band, oracle_bounds, oracle_scale,
                        oracle_query_id, oracle_out);
    if (bench->parsed())
      return cmd_bench(bench_db, bench_strategies, bench_band, bench_center_ra,
                       bench_center_dec, bench_scale, bench_reps, bench_out,
                       bench_flags);
    if (report->parsed()) return cmd_report(report_paths);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
