#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace skystack {

// One of the five survey bandpasses, canonical order u, g, r, i, z.
enum class Band : unsigned char { u = 0, g, r, i, z };

inline constexpr std::array<Band, 5> kAllBands = {Band::u, Band::g, Band::r,
                                                  Band::i, Band::z};

char band_char(Band b);
std::optional<Band> band_from_char(char c);

// An RA/Dec rectangle on the sky. RA is kept in [0,360) and the interval
// may wrap through 360->0 (ra_min > ra_max); width is always positive and
// strictly less than 360. Empty bounds have no representation here: code
// that can produce "nothing" returns std::optional<SkyBounds>.
struct SkyBounds {
  double ra_min = 0.0;
  double ra_max = 0.0;
  double dec_min = 0.0;
  double dec_max = 0.0;

  // Validates and normalizes RA into [0,360). Throws std::invalid_argument
  // on zero/negative area or out-of-range declination.
  static SkyBounds make(double ra_min, double ra_max, double dec_min,
                        double dec_max);

  double ra_width() const;   // (ra_max - ra_min) mod 360, in (0,360)
  double dec_height() const;
  double center_ra() const;  // midpoint along the (possibly wrapping) arc
  double center_dec() const;

  // Half-open membership: [ra_min, ra_max) along the arc, [dec_min, dec_max)
  // in declination. Abutting rectangles therefore claim a boundary point
  // exactly once.
  bool contains(double ra, double dec) const;

  bool operator==(const SkyBounds&) const = default;
};

// Rectangle common to both, handling RA wrap. Absent when the two share no
// point of positive area (shared edges do not count). When two wrapping
// arcs meet in two disjoint arcs the wider one is returned.
std::optional<SkyBounds> bounds_intersect(const SkyBounds& a,
                                          const SkyBounds& b);

// The camera's six abutting declination strips covering one stripe.
// Strip ids are 1-based; strip 1 is the lowest-declination interval.
struct CameraLayout {
  double dec_min = -1.25;
  double dec_max = 1.25;

  static constexpr int kStrips = 6;

  struct Interval {
    double lo, hi;
  };
  Interval strip_interval(int strip) const;  // strip in [1,6]
  SkyBounds strip_bounds(int strip, double ra_min, double ra_max) const;
};

// Ids of every strip whose dec interval intersects [q.dec_min, q.dec_max]
// with positive measure; empty when the query lies outside the stripe.
std::vector<int> strips_overlapping(const SkyBounds& q,
                                    const CameraLayout& layout);

// Tangent-plane (gnomonic) mapping between sky coordinates and a pixel
// grid. Pixel coordinates are continuous with pixel (i,j) covering
// [i,i+1)x[j,j+1); the tangent point sits at (ref_px_x, ref_px_y).
// Orientation follows the astronomical convention: RA increases towards
// -x, Dec towards +y.
struct Wcs {
  double center_ra = 0.0;   // tangent point, degrees
  double center_dec = 0.0;
  double pixel_scale = 0.0;  // degrees per pixel, > 0
  double ref_px_x = 0.0;
  double ref_px_y = 0.0;
  int width = 0;   // pixels
  int height = 0;

  bool operator==(const Wcs&) const = default;
};

struct PixelXY {
  double x, y;
};
struct SkyPos {
  double ra, dec;
};

// Forward gnomonic projection. Throws std::invalid_argument for points
// 90 degrees or more from the tangent point.
PixelXY sky_to_pixel(const Wcs& wcs, double ra, double dec);

// Inverse gnomonic projection; round-trips with sky_to_pixel to better
// than 1e-9 degrees within 5 degrees of the tangent point.
SkyPos pixel_to_sky(const Wcs& wcs, double x, double y);

// Gnomonic grid centered on the bounds: width/height = ceil(extent/scale),
// tangent point at the exact grid center. Every point of the bounds lands
// on the grid to within a tenth of a pixel (the gnomonic stretch of a
// small field is below that). Throws on scale <= 0 or bounds wider than
// 90 degrees.
Wcs make_target_wcs(const SkyBounds& bounds, double pixel_scale);

}  // namespace skystack
