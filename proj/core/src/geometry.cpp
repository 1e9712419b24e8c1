#include "skystack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skystack {

namespace {

constexpr double kDegToRad = 0.017453292519943295;
constexpr double kRadToDeg = 57.29577951308232;

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r == 360.0) r = 0.0;
  return r;
}

// ceil(extent/scale) with a relative snap so that exact-integer ratios do
// not pick up a spurious extra pixel from floating-point division.
int grid_cells(double extent, double scale) {
  double r = extent / scale;
  double n = std::nearbyint(r);
  if (std::abs(r - n) < 1e-6 * std::max(1.0, n)) return static_cast<int>(n);
  return static_cast<int>(std::ceil(r));
}

}  // namespace

char band_char(Band b) {
  static constexpr char kChars[] = {'u', 'g', 'r', 'i', 'z'};
  return kChars[static_cast<unsigned char>(b)];
}

std::optional<Band> band_from_char(char c) {
  switch (c) {
    case 'u': return Band::u;
    case 'g': return Band::g;
    case 'r': return Band::r;
    case 'i': return Band::i;
    case 'z': return Band::z;
    default: return std::nullopt;
  }
}

SkyBounds SkyBounds::make(double ra_min, double ra_max, double dec_min,
                          double dec_max) {
  if (!(dec_min < dec_max) || dec_min < -90.0 || dec_max > 90.0)
    throw std::invalid_argument("SkyBounds: invalid dec interval");
  SkyBounds b{wrap360(ra_min), wrap360(ra_max), dec_min, dec_max};
  double w = wrap360(b.ra_max - b.ra_min);
  if (w <= 0.0)
    throw std::invalid_argument("SkyBounds: zero-width RA interval");
  return b;
}

double SkyBounds::ra_width() const { return wrap360(ra_max - ra_min); }

double SkyBounds::dec_height() const { return dec_max - dec_min; }

double SkyBounds::center_ra() const {
  return wrap360(ra_min + 0.5 * ra_width());
}

double SkyBounds::center_dec() const { return 0.5 * (dec_min + dec_max); }

bool SkyBounds::contains(double ra, double dec) const {
  if (dec < dec_min || dec >= dec_max) return false;
  return wrap360(ra - ra_min) < ra_width();
}

std::optional<SkyBounds> bounds_intersect(const SkyBounds& a,
                                          const SkyBounds& b) {
  double dec_lo = std::max(a.dec_min, b.dec_min);
  double dec_hi = std::min(a.dec_max, b.dec_max);
  if (!(dec_hi - dec_lo > 0.0)) return std::nullopt;

  // Work on the circle relative to a.ra_min: a covers [0, wa]; b covers
  // [d, d+wb] and, one turn earlier, [d-360, d-360+wb]. Either image may
  // overlap a; two overlaps means two disjoint arcs, where we keep the
  // wider (ties go to the smaller RA start). The resulting endpoints are
  // always one of the original endpoint values, so intersection is exactly
  // commutative and idempotent.
  double wa = a.ra_width();
  double wb = b.ra_width();
  double d = wrap360(b.ra_min - a.ra_min);

  struct Arc {
    double ra_min = 0.0, ra_max = 0.0, width = -1.0;
  };
  Arc best;
  for (double s : {d, d - 360.0}) {
    double lo = std::max(0.0, s);
    double hi = std::min(wa, s + wb);
    double w = hi - lo;
    if (w <= 0.0) continue;
    Arc arc{lo == 0.0 ? a.ra_min : b.ra_min, hi == wa ? a.ra_max : b.ra_max,
            w};
    if (w > best.width || (w == best.width && arc.ra_min < best.ra_min))
      best = arc;
  }
  if (best.width <= 0.0) return std::nullopt;

  SkyBounds out;
  out.ra_min = best.ra_min;
  out.ra_max = best.ra_max;
  out.dec_min = dec_lo;
  out.dec_max = dec_hi;
  return out;
}

CameraLayout::Interval CameraLayout::strip_interval(int strip) const {
  if (strip < 1 || strip > kStrips)
    throw std::invalid_argument("strip id out of range [1,6]");
  double span = dec_max - dec_min;
  return {dec_min + (strip - 1) * span / kStrips,
          dec_min + strip * span / kStrips};
}

SkyBounds CameraLayout::strip_bounds(int strip, double ra_min,
                                     double ra_max) const {
  Interval iv = strip_interval(strip);
  return SkyBounds::make(ra_min, ra_max, iv.lo, iv.hi);
}

std::vector<int> strips_overlapping(const SkyBounds& q,
                                    const CameraLayout& layout) {
  std::vector<int> out;
  for (int s = 1; s <= CameraLayout::kStrips; ++s) {
    CameraLayout::Interval iv = layout.strip_interval(s);
    if (std::min(q.dec_max, iv.hi) - std::max(q.dec_min, iv.lo) > 0.0)
      out.push_back(s);
  }
  return out;
}

PixelXY sky_to_pixel(const Wcs& wcs, double ra, double dec) {
  double dec0 = wcs.center_dec * kDegToRad;
  double sin_dec0 = std::sin(dec0), cos_dec0 = std::cos(dec0);
  double d = dec * kDegToRad;
  double sin_dec = std::sin(d), cos_dec = std::cos(d);
  double dra = (ra - wcs.center_ra) * kDegToRad;
  double sin_dra = std::sin(dra), cos_dra = std::cos(dra);

  double denom = sin_dec0 * sin_dec + cos_dec0 * cos_dec * cos_dra;
  if (denom <= 1e-12)
    throw std::invalid_argument(
        "sky_to_pixel: point is 90 degrees or more from the tangent point");

  double xi = cos_dec * sin_dra / denom;                            // rad, +east
  double eta = (cos_dec0 * sin_dec - sin_dec0 * cos_dec * cos_dra) / denom;
  return {wcs.ref_px_x - xi * kRadToDeg / wcs.pixel_scale,
          wcs.ref_px_y + eta * kRadToDeg / wcs.pixel_scale};
}

SkyPos pixel_to_sky(const Wcs& wcs, double x, double y) {
  double xi = -(x - wcs.ref_px_x) * wcs.pixel_scale * kDegToRad;
  double eta = (y - wcs.ref_px_y) * wcs.pixel_scale * kDegToRad;
  double rho = std::hypot(xi, eta);
  if (rho == 0.0) return {wcs.center_ra, wcs.center_dec};

  double dec0 = wcs.center_dec * kDegToRad;
  double sin_dec0 = std::sin(dec0), cos_dec0 = std::cos(dec0);
  double c = std::atan(rho);
  double sin_c = std::sin(c), cos_c = std::cos(c);

  double dec = std::asin(cos_c * sin_dec0 + eta * sin_c * cos_dec0 / rho);
  double dra = std::atan2(xi * sin_c,
                          rho * cos_dec0 * cos_c - eta * sin_dec0 * sin_c);
  double ra = wrap360(wcs.center_ra + dra * kRadToDeg);
  return {ra, dec * kRadToDeg};
}

Wcs make_target_wcs(const SkyBounds& bounds, double pixel_scale) {
  if (!(pixel_scale > 0.0))
    throw std::invalid_argument("make_target_wcs: pixel_scale must be > 0");
  double w = bounds.ra_width();
  double h = bounds.dec_height();
  if (w > 90.0 || h > 90.0)
    throw std::invalid_argument(
        "make_target_wcs: bounds wider than 90 degrees");

  Wcs wcs;
  wcs.center_ra = bounds.center_ra();
  wcs.center_dec = bounds.center_dec();
  wcs.pixel_scale = pixel_scale;
  wcs.width = std::max(1, grid_cells(w, pixel_scale));
  wcs.height = std::max(1, grid_cells(h, pixel_scale));
  wcs.ref_px_x = wcs.width / 2.0;
  wcs.ref_px_y = wcs.height / 2.0;
  return wcs;
}

}  // namespace skystack
