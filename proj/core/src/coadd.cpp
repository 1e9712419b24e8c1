#include "skystack/coadd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skystack/errors.hpp"

namespace skystack {

namespace {

// Snap tolerance for interpolation coordinates. Forward+inverse projection
// of a grid-aligned point lands within ~1e-12 px of the integer; snapping
// keeps aligned-grid interpolation an exact identity.
constexpr double kGridEps = 1e-9;

struct Sample {
  float value = 0.0f;
  bool covered = false;
};

// Bilinear sample at continuous pixel position (px, py), edge-origin
// convention (pixel centers at i+0.5). Uncovered when the 2x2 neighborhood
// is not fully inside the raster.
Sample interpolate(const ImageTile& tile, double px, double py) {
  double u = px - 0.5;
  double v = py - 0.5;
  double ur = std::nearbyint(u);
  double vr = std::nearbyint(v);
  if (std::abs(u - ur) < kGridEps) u = ur;
  if (std::abs(v - vr) < kGridEps) v = vr;

  if (u < 0.0 || v < 0.0 || u > tile.width - 1 || v > tile.height - 1)
    return {};

  int x0 = std::min(static_cast<int>(std::floor(u)), tile.width - 2);
  int y0 = std::min(static_cast<int>(std::floor(v)), tile.height - 2);
  if (tile.width == 1) x0 = 0;
  if (tile.height == 1) y0 = 0;
  double fx = u - x0;
  double fy = v - y0;
  if (tile.width == 1) {
    if (fx != 0.0) return {};
  }
  if (tile.height == 1) {
    if (fy != 0.0) return {};
  }

  int x1 = std::min(x0 + 1, tile.width - 1);
  int y1 = std::min(y0 + 1, tile.height - 1);
  double v00 = tile.at(x0, y0);
  double v10 = tile.at(x1, y0);
  double v01 = tile.at(x0, y1);
  double v11 = tile.at(x1, y1);
  double out = (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 +
               (1.0 - fx) * fy * v01 + fx * fy * v11;
  return {static_cast<float>(out), true};
}

}  // namespace

std::vector<float> CoaddResult::mean() const {
  std::vector<float> m(sum.size(), 0.0f);
  for (size_t i = 0; i < sum.size(); ++i)
    if (depth[i] > 0) m[i] = static_cast<float>(sum[i] / depth[i]);
  return m;
}

std::vector<ProjectedTile> map_fn(const ImageRecord& record,
                                  std::span<const Query> queries) {
  std::vector<ProjectedTile> out;
  for (const Query& q : queries) {
    if (record.meta.band != q.band) continue;
    auto overlap = bounds_intersect(q.bounds, record.meta.bounds);
    if (!overlap) continue;

    Wcs target = make_target_wcs(q.bounds, q.pixel_scale);

    // Pixel rectangle covering the overlap, padded one pixel against the
    // slight curvature of rectangle edges under the projection. Membership
    // tests below discard the padding again.
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    const double corner_ra[2] = {overlap->ra_min, overlap->ra_max};
    const double corner_dec[2] = {overlap->dec_min, overlap->dec_max};
    for (double ra : corner_ra) {
      for (double dec : corner_dec) {
        PixelXY p = sky_to_pixel(target, ra, dec);
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
      }
    }
    int rx0 = std::max(0, static_cast<int>(std::floor(x_lo)) - 1);
    int ry0 = std::max(0, static_cast<int>(std::floor(y_lo)) - 1);
    int rx1 = std::min(target.width, static_cast<int>(std::ceil(x_hi)) + 1);
    int ry1 = std::min(target.height, static_cast<int>(std::ceil(y_hi)) + 1);
    if (rx1 <= rx0 || ry1 <= ry0) continue;

    ProjectedTile tile;
    tile.query_id = q.id;
    tile.source_key = record.meta.key();
    tile.origin_x = rx0;
    tile.origin_y = ry0;
    tile.width = rx1 - rx0;
    tile.height = ry1 - ry0;
    tile.values.assign(static_cast<size_t>(tile.width) * tile.height, 0.0f);
    tile.coverage.assign(static_cast<size_t>(tile.width) * tile.height, 0);

    for (int y = ry0; y < ry1; ++y) {
      for (int x = rx0; x < rx1; ++x) {
        SkyPos sky = pixel_to_sky(target, x + 0.5, y + 0.5);
        if (!record.meta.bounds.contains(sky.ra, sky.dec)) continue;
        PixelXY src = sky_to_pixel(record.tile.wcs, sky.ra, sky.dec);
        Sample s = interpolate(record.tile, src.x, src.y);
        if (!s.covered) continue;
        size_t idx = static_cast<size_t>(y - ry0) * tile.width + (x - rx0);
        tile.values[idx] = s.value;
        tile.coverage[idx] = 1;
      }
    }
    out.push_back(std::move(tile));
  }
  return out;
}

CoaddResult reduce_fn(const Query& query, std::vector<ProjectedTile> tiles) {
  Wcs target = make_target_wcs(query.bounds, query.pixel_scale);
  size_t npx = static_cast<size_t>(target.width) * target.height;
  CoaddResult result;
  result.wcs = target;
  result.sum.assign(npx, 0.0);
  result.depth.assign(npx, 0);

  std::stable_sort(tiles.begin(), tiles.end(),
                   [](const ProjectedTile& a, const ProjectedTile& b) {
                     return a.source_key < b.source_key;
                   });

  for (const ProjectedTile& t : tiles) {
    if (t.query_id != query.id)
      throw std::runtime_error("reduce_fn: tile for query '" + t.query_id +
                               "' fed to query '" + query.id + "'");
    if (t.origin_x < 0 || t.origin_y < 0 ||
        t.origin_x + t.width > target.width ||
        t.origin_y + t.height > target.height)
      throw std::runtime_error("reduce_fn: tile from '" + t.source_key +
                               "' lies outside the query grid");
    for (int y = 0; y < t.height; ++y) {
      size_t src_row = static_cast<size_t>(y) * t.width;
      size_t dst_row =
          static_cast<size_t>(t.origin_y + y) * target.width + t.origin_x;
      for (int x = 0; x < t.width; ++x) {
        result.sum[dst_row + x] += t.values[src_row + x];
        result.depth[dst_row + x] += t.coverage[src_row + x];
      }
    }
  }
  return result;
}

CoaddResult serial_coadd(std::span<const ImageRecord> records,
                         const Query& query) {
  std::vector<ProjectedTile> tiles;
  std::span<const Query> one(&query, 1);
  for (const ImageRecord& rec : records) {
    if (rec.meta.band != query.band) continue;
    if (!bounds_intersect(query.bounds, rec.meta.bounds)) continue;
    std::vector<ProjectedTile> projected = map_fn(rec, one);
    for (ProjectedTile& t : projected) tiles.push_back(std::move(t));
  }
  return reduce_fn(query, std::move(tiles));
}

CoaddDiff compare_coadds(const CoaddResult& a, const CoaddResult& b) {
  if (a.wcs.width != b.wcs.width || a.wcs.height != b.wcs.height)
    throw std::invalid_argument("compare_coadds: grid shapes differ");
  CoaddDiff diff;
  diff.depth_equal = a.depth == b.depth;
  for (size_t i = 0; i < a.sum.size(); ++i)
    diff.max_abs_diff = std::max(diff.max_abs_diff,
                                 std::abs(a.sum[i] - b.sum[i]));
  return diff;
}

void write_coadd(const std::filesystem::path& path,
                 const CoaddResult& result) {
  ImageTile tile;
  tile.width = result.wcs.width;
  tile.height = result.wcs.height;
  tile.wcs = result.wcs;
  tile.pixels.reserve(result.sum.size());
  for (double v : result.sum) tile.pixels.push_back(static_cast<float>(v));
  write_raster(path, RasterFile{std::move(tile), result.depth, std::nullopt});
}

CoaddResult read_coadd(const std::filesystem::path& path) {
  RasterFile r = read_raster(path);
  if (!r.depth)
    throw FormatError(FormatErrc::MissingSection,
                      "coadd file has no depth plane: " + path.string());
  CoaddResult result;
  result.wcs = r.tile.wcs;
  result.sum.assign(r.tile.pixels.begin(), r.tile.pixels.end());
  result.depth = std::move(*r.depth);
  return result;
}

}  // namespace skystack
