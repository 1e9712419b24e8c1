#include "skystack/catalog.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <tuple>

#include "skystack/errors.hpp"

namespace skystack {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'T', '1'};
constexpr uint16_t kVersion = 1;

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
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

struct Cursor {
  const unsigned char* p;
  size_t n;
  size_t pos = 0;

  void require(size_t k) {
    if (pos + k > n)
      throw FormatError(FormatErrc::Truncated, "truncated catalog file");
  }
  uint8_t u8() {
    require(1);
    return p[pos++];
  }
  uint16_t u16() {
    require(2);
    uint16_t v = static_cast<uint16_t>(p[pos]) | static_cast<uint16_t>(p[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    require(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    require(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(size_t k) {
    require(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
};

void sort_entries(std::vector<CatalogEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const CatalogEntry& a, const CatalogEntry& b) {
              return std::make_tuple(a.meta.band, a.meta.strip,
                                     a.meta.bounds.ra_min, a.meta.key()) <
                     std::make_tuple(b.meta.band, b.meta.strip,
                                     b.meta.bounds.ra_min, b.meta.key());
            });
}

}  // namespace

Catalog Catalog::build(SeqFileRegistry& registry) {
  Catalog cat;
  std::set<std::string> seen;
  for (const std::string& id : registry.list_ids()) {
    SequenceFileReader& r = registry.reader(id);
    for (const SeqEntry& e : r.index()) {
      ImageRecord rec = decode_record(r.read(e.offset, e.length));
      if (!seen.insert(rec.meta.key()).second)
        throw FormatError(FormatErrc::DuplicateKey,
                          "duplicate record key '" + rec.meta.key() +
                              "' while building catalog");
      cat.entries_.push_back({rec.meta, id, e.offset, e.length});
    }
  }
  sort_entries(cat.entries_);
  return cat;
}

void Catalog::save(const std::filesystem::path& path) const {
  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u64(out, entries_.size());
  for (const CatalogEntry& e : entries_) {
    put_u32(out, static_cast<uint32_t>(e.meta.run));
    put_u32(out, static_cast<uint32_t>(e.meta.rerun));
    out.push_back(static_cast<char>(e.meta.strip));
    out.push_back(static_cast<char>(band_char(e.meta.band)));
    put_u32(out, static_cast<uint32_t>(e.meta.field));
    put_f64(out, e.meta.bounds.ra_min);
    put_f64(out, e.meta.bounds.ra_max);
    put_f64(out, e.meta.bounds.dec_min);
    put_f64(out, e.meta.bounds.dec_max);
    put_u32(out, static_cast<uint32_t>(e.seqfile_id.size()));
    out.append(e.seqfile_id);
    put_u64(out, e.offset);
    put_u64(out, e.length);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f)
    throw FormatError(FormatErrc::IoFailure,
                      "failed writing catalog file " + path.string());
}

Catalog Catalog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatErrc::IoFailure,
                      "cannot open catalog file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  c.require(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(FormatErrc::BadMagic,
                      "bad magic, not a catalog file: " + path.string());
  c.pos = 4;
  uint16_t version = c.u16();
  if (version != kVersion)
    throw FormatError(FormatErrc::BadVersion,
                      "unsupported catalog version " + std::to_string(version));

  Catalog cat;
  uint64_t count = c.u64();
  cat.entries_.reserve(count);
  std::set<std::string> seen;
  for (uint64_t i = 0; i < count; ++i) {
    CatalogEntry e;
    e.meta.run = static_cast<int>(c.u32());
    e.meta.rerun = static_cast<int>(c.u32());
    e.meta.strip = c.u8();
    auto band = band_from_char(static_cast<char>(c.u8()));
    if (!band)
      throw FormatError(FormatErrc::CorruptIndex,
                        "unknown band in catalog entry");
    e.meta.band = *band;
    e.meta.field = static_cast<int>(c.u32());
    e.meta.bounds.ra_min = c.f64();
    e.meta.bounds.ra_max = c.f64();
    e.meta.bounds.dec_min = c.f64();
    e.meta.bounds.dec_max = c.f64();
    uint32_t id_len = c.u32();
    e.seqfile_id = c.bytes(id_len);
    e.offset = c.u64();
    e.length = c.u64();
    if (!seen.insert(e.meta.key()).second)
      throw FormatError(FormatErrc::DuplicateKey,
                        "duplicate record key '" + e.meta.key() +
                            "' in catalog file " + path.string());
    cat.entries_.push_back(std::move(e));
  }
  if (c.pos != c.n)
    throw FormatError(FormatErrc::Truncated,
                      "catalog file size does not match header");
  return cat;
}

std::vector<FileSplit> Catalog::query(Band band, const SkyBounds& bounds,
                                      uint64_t block_size) const {
  if (block_size == 0)
    throw std::invalid_argument("Catalog::query: block_size must be > 0");
  std::vector<FileSplit> out;
  for (const CatalogEntry& e : entries_) {
    if (e.meta.band != band) continue;
    if (!bounds_intersect(e.meta.bounds, bounds)) continue;
    out.push_back({e.seqfile_id, e.offset, e.length, e.meta.key(),
                   e.offset / block_size});
  }
  std::sort(out.begin(), out.end(),
            [](const FileSplit& a, const FileSplit& b) { return a.key < b.key; });
  return out;
}

}  // namespace skystack
