#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skystack/geometry.hpp"

namespace skystack {

// Identity of one camera exposure. `key()` follows the survey filename
// convention fpC-RRRRRR-bC-FFFF (zero-padded run and field, band char,
// strip digit), e.g. fpC-005902-u1-0690.
struct ImageMeta {
  int run = 0;
  int rerun = 0;
  int strip = 0;  // camera column, 1..6
  Band band = Band::u;
  int field = 0;  // position along RA within the run
  SkyBounds bounds;

  std::string key() const;

  bool operator==(const ImageMeta&) const = default;
};

// A pixel raster with its sky mapping. Values are 32-bit illumination
// samples at pixel centers, row-major, all finite.
struct ImageTile {
  int width = 0;
  int height = 0;
  Wcs wcs;
  std::vector<float> pixels;

  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

  bool operator==(const ImageTile&) const = default;
};

struct ImageRecord {
  ImageMeta meta;
  ImageTile tile;

  bool operator==(const ImageRecord&) const = default;
};

// Self-describing raster container ("CDF1"). Layout, all little-endian:
//   magic "CDF1", u16 version=1, u32 width, u32 height,
//   f64 center_ra, center_dec, pixel_scale, ref_px_x, ref_px_y,
//   u8 flags (bit0: depth plane present, bit1: exposure metadata present),
//   [meta: u32 run, u32 rerun, u8 strip, u8 band, u32 field, 4 x f64 bounds],
//   f32 pixels[width*height],
//   [u32 depth[width*height]].
// Coadd outputs carry the depth plane; exposure files carry the metadata
// block. read/write round-trip bit-exactly.
struct RasterFile {
  ImageTile tile;
  std::optional<std::vector<uint32_t>> depth;
  std::optional<ImageMeta> meta;

  bool operator==(const RasterFile&) const = default;
};

std::string encode_raster(const RasterFile& r);
RasterFile decode_raster(std::string_view bytes);

void write_raster(const std::filesystem::path& path, const RasterFile& r);
void write_raster(const std::filesystem::path& path, const ImageTile& tile,
                  const std::optional<std::vector<uint32_t>>& depth = {});
RasterFile read_raster(const std::filesystem::path& path);

// Exposure-record convenience: a raster file with the metadata block.
std::string encode_record(const ImageRecord& rec);
ImageRecord decode_record(std::string_view bytes);
void write_record_file(const std::filesystem::path& path,
                       const ImageRecord& rec);
ImageRecord read_record_file(const std::filesystem::path& path);

}  // namespace skystack
