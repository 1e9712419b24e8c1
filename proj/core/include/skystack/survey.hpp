#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "skystack/image.hpp"

namespace skystack {

// Parameters of the synthetic drift-scan survey. Each run images the whole
// stripe once: 5 bands x 6 strips x fields_per_run exposures whose fields
// abut along RA and tile the configured range exactly, with identical
// footprints across runs. That exact tiling makes per-point coverage equal
// n_runs in every band.
struct SurveyConfig {
  int n_runs = 2;
  int fields_per_run = 3;
  double dec_min = -1.25;  // stripe declination range, split into 6 strips
  double dec_max = 1.25;
  double ra_min = 37.0;
  double ra_max = 40.0;
  double field_width = 1.0;   // degrees of RA per field
  double pixel_scale = 0.01;  // degrees per pixel
  double noise_sigma = 1.0;   // per-exposure Gaussian noise, illumination units
  int n_sources = 20;         // fixed star field shared by all exposures
  uint64_t seed = 1;

  CameraLayout layout() const { return CameraLayout{dec_min, dec_max}; }

  // Throws std::invalid_argument with a description of the offending field;
  // in particular the field grid must tile the RA range exactly.
  void validate() const;

  size_t record_count() const {
    return static_cast<size_t>(n_runs) * 5 * CameraLayout::kStrips *
           fields_per_run;
  }
};

// Deterministic in cfg.seed: the star catalog is drawn once, then every
// exposure gets its own noise stream derived from (seed, run, band, strip,
// field). Two calls with the same config produce bit-identical tiles.
std::vector<ImageRecord> generate_survey(const SurveyConfig& cfg);

// Path of a record inside the raw directory hierarchy:
// root/<run>/<rerun>/corr/<strip>/<key>.fit
std::filesystem::path raw_record_path(const std::filesystem::path& root,
                                      const ImageMeta& meta);

// Writes every record to its raw_record_path. Idempotent: re-materializing
// produces identical bytes.
void materialize_raw_layout(const std::vector<ImageRecord>& records,
                            const std::filesystem::path& root);

// Reads every .fit record under root, in sorted path order.
std::vector<ImageRecord> load_raw_records(const std::filesystem::path& root);

// Key=value config file used by the CLI and by database directories.
SurveyConfig load_survey_config(const std::filesystem::path& path);
void save_survey_config(const SurveyConfig& cfg,
                        const std::filesystem::path& path);

}  // namespace skystack
