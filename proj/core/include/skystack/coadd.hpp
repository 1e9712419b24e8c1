#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skystack/image.hpp"

namespace skystack {

// One coaddition request: the bandpass, the sky rectangle, and the output
// pixel scale.
struct Query {
  std::string id;
  Band band = Band::r;
  SkyBounds bounds;
  double pixel_scale = 0.0;
};

// One exposure projected onto a query's pixel grid: a rectangle of the
// grid plus per-pixel 0/1 coverage. Pixels without coverage hold 0.
// source_key names the exposure so reducers can accumulate in a globally
// sorted, hence deterministic, order.
struct ProjectedTile {
  std::string query_id;
  std::string source_key;
  int origin_x = 0;
  int origin_y = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::vector<uint8_t> coverage;
};

// Accumulated coadd: per-pixel illumination sum and integer depth (the
// number of exposures contributing). The mean is derived, never stored.
struct CoaddResult {
  Wcs wcs;
  std::vector<double> sum;
  std::vector<uint32_t> depth;

  std::vector<float> mean() const;
};

// Projects one exposure against each query: skips on band mismatch or
// empty bounds intersection, otherwise emits one tile whose covered pixels
// are bilinearly interpolated from the exposure at the query-grid pixel
// centers. Output pixels whose sky position falls outside the exposure's
// footprint, or whose 2x2 interpolation neighborhood is not fully inside
// the source raster, get coverage 0.
std::vector<ProjectedTile> map_fn(const ImageRecord& record,
                                  std::span<const Query> queries);

// Accumulates tiles into the query grid in key-sorted order (sum += values,
// depth += coverage). Tiles outside the grid or keyed to a different query
// are an invariant breach upstream and raise std::runtime_error.
CoaddResult reduce_fn(const Query& query, std::vector<ProjectedTile> tiles);

// Single-threaded reference path: filter by band, intersect bounds,
// project, then accumulate in the same sorted order the parallel engine
// uses. Ground truth for everything else.
CoaddResult serial_coadd(std::span<const ImageRecord> records,
                         const Query& query);

struct CoaddDiff {
  double max_abs_diff = 0.0;
  bool depth_equal = false;
};

// Exact integer comparison of depth planes, max absolute difference of the
// sums. Throws std::invalid_argument on shape mismatch.
CoaddDiff compare_coadds(const CoaddResult& a, const CoaddResult& b);

// Persistence via the raster container: sum plane plus depth plane.
void write_coadd(const std::filesystem::path& path, const CoaddResult& result);
CoaddResult read_coadd(const std::filesystem::path& path);

}  // namespace skystack
