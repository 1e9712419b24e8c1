#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skystack/glob.hpp"
#include "skystack/image.hpp"

namespace skystack {

// One index entry of a container: where a record's bytes live.
struct SeqEntry {
  std::string key;
  uint64_t offset = 0;  // absolute file offset
  uint64_t length = 0;

  bool operator==(const SeqEntry&) const = default;
};

// Everything needed to retrieve one record from a host container, plus the
// storage block it falls in (block_id = offset / block_size) which drives
// mapper grouping.
struct FileSplit {
  std::string seqfile_id;
  uint64_t offset = 0;
  uint64_t length = 0;
  std::string key;
  uint64_t block_id = 0;

  bool operator==(const FileSplit&) const = default;
};

// Indexed record container ("SEQ1"). Layout, little-endian:
//   magic "SEQ1", u16 version=1, u64 entry count,
//   entries: { u32 key_len, key bytes, u64 offset, u64 length } x count,
//   payload bytes.
// The index sits at the front so split planning touches nothing else;
// entries are sorted by key, unique, non-overlapping. Containers are
// write-once; an empty index is legal.
void write_sequence_file(
    const std::filesystem::path& path,
    std::vector<std::pair<std::string, std::string>> entries);

// Read side. Opening parses and validates the index; after that each
// record retrieval is exactly one seek plus one read, which the stats
// counters track for tests and instrumentation.
class SequenceFileReader {
 public:
  struct IoStats {
    uint64_t seeks = 0;
    uint64_t reads = 0;
  };

  static std::unique_ptr<SequenceFileReader> open(
      const std::filesystem::path& path);

  const std::string& id() const { return id_; }
  const std::vector<SeqEntry>& index() const { return entries_; }

  // Retrieves the bytes at (offset, length). The pair must match an index
  // entry exactly, otherwise the split is corrupt. Thread-safe.
  std::string read(uint64_t offset, uint64_t length);

  IoStats stats() const;

 private:
  SequenceFileReader() = default;

  std::string id_;
  std::filesystem::path path_;
  std::vector<SeqEntry> entries_;  // sorted by key; offsets ascend too
  mutable std::mutex mutex_;
  std::ifstream stream_;
  std::atomic<uint64_t> seeks_{0};
  std::atomic<uint64_t> reads_{0};
};

// Lazily opens containers (files "<dir>/<id>.seq") and hands out readers.
// Tracks which containers were opened so prefilter behaviour is
// observable.
class SeqFileRegistry {
 public:
  explicit SeqFileRegistry(std::filesystem::path dir);

  std::vector<std::string> list_ids() const;  // sorted
  SequenceFileReader& reader(const std::string& id);
  ImageRecord read_record(const FileSplit& split);

  std::vector<std::string> opened_ids() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<SequenceFileReader>> readers_;
  std::vector<std::string> opened_order_;
};

// Container-id filter for structured layouts: keeps "seq-<band><strip>"
// ids whose band matches and whose strip is in the set.
struct BandStripFilter {
  Band band;
  std::vector<int> strips;

  bool matches_container(const std::string& id) const;
};

struct PackResult {
  std::vector<std::string> ids;  // container ids, in write order
  size_t total_entries = 0;
};

// Random grouping: each record goes to one of n_files containers chosen by
// a seeded uniform draw. Deterministic in seed; empty containers are
// written out too. Ids are "seq-0000".."seq-NNNN".
PackResult pack_unstructured(const std::vector<ImageRecord>& records,
                             int n_files, uint64_t seed,
                             const std::filesystem::path& out_dir);

// One container per occupied (band, strip) pair, id "seq-<band><strip>".
// A full five-band six-strip survey therefore packs into 30 containers
// whose names support the same band/strip filtering as the raw layout.
PackResult pack_structured(const std::vector<ImageRecord>& records,
                           const std::filesystem::path& out_dir);

// One split per entry of every container passing the filter (no filter:
// all containers). Containers failing the filter are never opened.
std::vector<FileSplit> splits_for(SeqFileRegistry& registry,
                                  const std::vector<std::string>& ids,
                                  const std::optional<BandStripFilter>& filter,
                                  uint64_t block_size);

}  // namespace skystack
