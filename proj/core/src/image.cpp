#include "skystack/image.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "skystack/errors.hpp"

namespace skystack {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'F', '1'};
constexpr uint16_t kVersion = 1;
constexpr uint8_t kFlagDepth = 0x01;
constexpr uint8_t kFlagMeta = 0x02;

// Little-endian primitives. Values are assembled byte by byte so the
// on-disk layout does not depend on host endianness.
void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

struct Cursor {
  const unsigned char* p;
  size_t n;
  size_t pos = 0;

  void require(size_t k, const char* what) {
    if (pos + k > n)
      throw FormatError(FormatErrc::Truncated,
                        std::string("truncated raster file (") + what + ")");
  }
  uint8_t u8(const char* what) {
    require(1, what);
    return p[pos++];
  }
  uint16_t u16(const char* what) {
    require(2, what);
    uint16_t v = static_cast<uint16_t>(p[pos]) | static_cast<uint16_t>(p[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    require(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    require(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

}  // namespace

std::string ImageMeta::key() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fpC-%06d-%c%d-%04d", run, band_char(band),
                strip, field);
  return buf;
}

std::string encode_raster(const RasterFile& r) {
  const ImageTile& t = r.tile;
  size_t npx = static_cast<size_t>(t.width) * t.height;
  if (t.pixels.size() != npx)
    throw std::invalid_argument("encode_raster: pixel count != width*height");
  if (r.depth && r.depth->size() != npx)
    throw std::invalid_argument("encode_raster: depth count != width*height");

  std::string out;
  out.reserve(64 + npx * (4 + (r.depth ? 4 : 0)));
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<uint32_t>(t.width));
  put_u32(out, static_cast<uint32_t>(t.height));
  put_f64(out, t.wcs.center_ra);
  put_f64(out, t.wcs.center_dec);
  put_f64(out, t.wcs.pixel_scale);
  put_f64(out, t.wcs.ref_px_x);
  put_f64(out, t.wcs.ref_px_y);
  uint8_t flags = 0;
  if (r.depth) flags |= kFlagDepth;
  if (r.meta) flags |= kFlagMeta;
  out.push_back(static_cast<char>(flags));
  if (r.meta) {
    const ImageMeta& m = *r.meta;
    put_u32(out, static_cast<uint32_t>(m.run));
    put_u32(out, static_cast<uint32_t>(m.rerun));
    out.push_back(static_cast<char>(m.strip));
    out.push_back(static_cast<char>(band_char(m.band)));
    put_u32(out, static_cast<uint32_t>(m.field));
    put_f64(out, m.bounds.ra_min);
    put_f64(out, m.bounds.ra_max);
    put_f64(out, m.bounds.dec_min);
    put_f64(out, m.bounds.dec_max);
  }
  for (float v : t.pixels) put_f32(out, v);
  if (r.depth)
    for (uint32_t v : *r.depth) put_u32(out, v);
  return out;
}

RasterFile decode_raster(std::string_view bytes) {
  Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  c.require(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(FormatErrc::BadMagic, "bad magic, not a raster file");
  c.pos = 4;
  uint16_t version = c.u16("version");
  if (version != kVersion)
    throw FormatError(FormatErrc::BadVersion,
                      "unsupported raster version " + std::to_string(version));

  RasterFile r;
  r.tile.width = static_cast<int>(c.u32("width"));
  r.tile.height = static_cast<int>(c.u32("height"));
  r.tile.wcs.center_ra = c.f64("wcs");
  r.tile.wcs.center_dec = c.f64("wcs");
  r.tile.wcs.pixel_scale = c.f64("wcs");
  r.tile.wcs.ref_px_x = c.f64("wcs");
  r.tile.wcs.ref_px_y = c.f64("wcs");
  r.tile.wcs.width = r.tile.width;
  r.tile.wcs.height = r.tile.height;
  uint8_t flags = c.u8("flags");

  if (flags & kFlagMeta) {
    ImageMeta m;
    m.run = static_cast<int>(c.u32("meta"));
    m.rerun = static_cast<int>(c.u32("meta"));
    m.strip = c.u8("meta");
    auto band = band_from_char(static_cast<char>(c.u8("meta")));
    if (!band)
      throw FormatError(FormatErrc::CorruptIndex, "unknown band in metadata");
    m.band = *band;
    m.field = static_cast<int>(c.u32("meta"));
    m.bounds.ra_min = c.f64("meta");
    m.bounds.ra_max = c.f64("meta");
    m.bounds.dec_min = c.f64("meta");
    m.bounds.dec_max = c.f64("meta");
    r.meta = m;
  }

  size_t npx = static_cast<size_t>(r.tile.width) * r.tile.height;
  r.tile.pixels.resize(npx);
  for (size_t i = 0; i < npx; ++i) r.tile.pixels[i] = c.f32("pixels");
  if (flags & kFlagDepth) {
    std::vector<uint32_t> depth(npx);
    for (size_t i = 0; i < npx; ++i) depth[i] = c.u32("depth");
    r.depth = std::move(depth);
  }
  if (c.pos != c.n)
    throw FormatError(FormatErrc::Truncated,
                      "raster file size does not match header");
  return r;
}

void write_raster(const std::filesystem::path& path, const RasterFile& r) {
  std::string bytes = encode_raster(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FormatError(FormatErrc::IoFailure,
                      "failed writing raster file " + path.string());
}

void write_raster(const std::filesystem::path& path, const ImageTile& tile,
                  const std::optional<std::vector<uint32_t>>& depth) {
  write_raster(path, RasterFile{tile, depth, std::nullopt});
}

RasterFile read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatErrc::IoFailure,
                      "failed opening raster file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_raster(bytes);
}

std::string encode_record(const ImageRecord& rec) {
  return encode_raster(RasterFile{rec.tile, std::nullopt, rec.meta});
}

ImageRecord decode_record(std::string_view bytes) {
  RasterFile r = decode_raster(bytes);
  if (!r.meta)
    throw FormatError(FormatErrc::MissingSection,
                      "raster file has no exposure metadata block");
  return ImageRecord{*r.meta, std::move(r.tile)};
}

void write_record_file(const std::filesystem::path& path,
                       const ImageRecord& rec) {
  write_raster(path, RasterFile{rec.tile, std::nullopt, rec.meta});
}

ImageRecord read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatErrc::IoFailure,
                      "failed opening record file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_record(bytes);
}

}  // namespace skystack
