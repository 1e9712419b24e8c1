#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "skystack/coadd.hpp"
#include "skystack/survey.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<uint64_t> counter{0};
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("skystack-test-" + std::to_string(rd()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const {
    return path / name;
  }
};

// 180-record survey (2 runs x 5 bands x 6 strips x 3 fields) with small
// tiles; the default workhorse for unit tests.
inline skystack::SurveyConfig small_survey(uint64_t seed = 42) {
  skystack::SurveyConfig cfg;
  cfg.n_runs = 2;
  cfg.fields_per_run = 3;
  cfg.field_width = 1.0;
  cfg.pixel_scale = 0.05;  // 20x9 px tiles
  cfg.noise_sigma = 1.0;
  cfg.n_sources = 10;
  cfg.seed = seed;
  return cfg;
}

// Brute-force metadata scan: the independent predicate oracle used against
// glob prefiltering and catalog queries.
inline std::vector<const skystack::ImageRecord*> scan_records(
    const std::vector<skystack::ImageRecord>& records, skystack::Band band,
    const std::optional<skystack::SkyBounds>& bounds = std::nullopt) {
  std::vector<const skystack::ImageRecord*> out;
  for (const skystack::ImageRecord& r : records) {
    if (r.meta.band != band) continue;
    if (bounds && !skystack::bounds_intersect(r.meta.bounds, *bounds)) continue;
    out.push_back(&r);
  }
  return out;
}

}  // namespace testutil
