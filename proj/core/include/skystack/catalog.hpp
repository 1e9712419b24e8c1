#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skystack/seqfile.hpp"

namespace skystack {

// One catalogued exposure: its identity/bounds plus where its bytes live
// in the packed container database.
struct CatalogEntry {
  ImageMeta meta;
  std::string seqfile_id;
  uint64_t offset = 0;
  uint64_t length = 0;

  bool operator==(const CatalogEntry&) const = default;
};

// Sorted metadata table over a packed container database, the exact
// prefilter: a query maps to precisely the splits whose band matches and
// whose bounds intersect, no false positives and no false negatives.
// Persisted form ("CAT1"): magic, u16 version=1, u64 count, then per entry
// u32 run, u32 rerun, u8 strip, u8 band, u32 field, 4 x f64 bounds,
// u32 id_len + seqfile id, u64 offset, u64 length; all little-endian.
// Entries are ordered by (band, strip, ra_min, key). At desk scale a
// linear scan answers queries in well under a second, so there is no
// secondary index.
class Catalog {
 public:
  Catalog() = default;

  // Reads every record of every container once. Duplicate keys are
  // rejected.
  static Catalog build(SeqFileRegistry& registry);

  void save(const std::filesystem::path& path) const;
  static Catalog load(const std::filesystem::path& path);

  // Splits for exactly the records with the query band and a non-empty
  // bounds intersection, sorted by key.
  std::vector<FileSplit> query(Band band, const SkyBounds& bounds,
                               uint64_t block_size) const;

  size_t size() const { return entries_.size(); }
  const std::vector<CatalogEntry>& entries() const { return entries_; }

  bool operator==(const Catalog& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<CatalogEntry> entries_;
};

}  // namespace skystack
