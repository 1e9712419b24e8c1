#include "skystack/seqfile.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <random>

#include "skystack/errors.hpp"

namespace skystack {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'Q', '1'};
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

class FileCursor {
 public:
  FileCursor(std::ifstream& in, const std::string& name) : in_(in), name_(name) {}

  std::string take(size_t k, const char* what) {
    std::string buf(k, '\0');
    in_.read(buf.data(), static_cast<std::streamsize>(k));
    if (static_cast<size_t>(in_.gcount()) != k)
      throw FormatError(FormatErrc::Truncated,
                        "truncated sequence file " + name_ + " (" + what + ")");
    return buf;
  }
  uint16_t u16(const char* what) {
    std::string b = take(2, what);
    return static_cast<uint16_t>(static_cast<unsigned char>(b[0])) |
           static_cast<uint16_t>(static_cast<unsigned char>(b[1])) << 8;
  }
  uint32_t u32(const char* what) {
    std::string b = take(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    std::string b = take(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

 private:
  std::ifstream& in_;
  std::string name_;
};

void write_container_bytes(
    const std::filesystem::path& path,
    std::vector<std::pair<std::string, std::string>>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 1; i < entries.size(); ++i)
    if (entries[i].first == entries[i - 1].first)
      throw FormatError(FormatErrc::DuplicateKey,
                        "duplicate key '" + entries[i].first +
                            "' while packing " + path.string());

  size_t index_size = 4 + 2 + 8;
  for (const auto& [key, payload] : entries) index_size += 4 + key.size() + 16;

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u64(out, entries.size());
  uint64_t offset = index_size;
  for (const auto& [key, payload] : entries) {
    put_u32(out, static_cast<uint32_t>(key.size()));
    out.append(key);
    put_u64(out, offset);
    put_u64(out, payload.size());
    offset += payload.size();
  }
  for (const auto& [key, payload] : entries) out.append(payload);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f)
    throw FormatError(FormatErrc::IoFailure,
                      "failed writing sequence file " + path.string());
}

}  // namespace

void write_sequence_file(
    const std::filesystem::path& path,
    std::vector<std::pair<std::string, std::string>> entries) {
  write_container_bytes(path, entries);
}

std::unique_ptr<SequenceFileReader> SequenceFileReader::open(
    const std::filesystem::path& path) {
  auto r = std::unique_ptr<SequenceFileReader>(new SequenceFileReader());
  r->path_ = path;
  r->id_ = path.stem().string();
  r->stream_.open(path, std::ios::binary);
  if (!r->stream_)
    throw FormatError(FormatErrc::IoFailure,
                      "cannot open sequence file " + path.string());
  uint64_t file_size = std::filesystem::file_size(path);

  FileCursor c(r->stream_, path.string());
  std::string magic = c.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError(FormatErrc::BadMagic,
                      "bad magic, not a sequence file: " + path.string());
  uint16_t version = c.u16("version");
  if (version != kVersion)
    throw FormatError(FormatErrc::BadVersion,
                      "unsupported sequence file version " +
                          std::to_string(version) + " in " + path.string());
  uint64_t count = c.u64("entry count");
  r->entries_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    SeqEntry e;
    uint32_t klen = c.u32("key length");
    e.key = c.take(klen, "key");
    e.offset = c.u64("offset");
    e.length = c.u64("length");
    r->entries_.push_back(std::move(e));
  }
  uint64_t payload_start = static_cast<uint64_t>(r->stream_.tellg());

  // Index sanity: sorted unique keys, payload-resident, non-overlapping.
  uint64_t prev_end = payload_start;
  for (size_t i = 0; i < r->entries_.size(); ++i) {
    const SeqEntry& e = r->entries_[i];
    if (i > 0 && !(r->entries_[i - 1].key < e.key))
      throw FormatError(FormatErrc::CorruptIndex,
                        "index keys not sorted/unique in " + path.string());
    if (e.offset < prev_end || e.offset + e.length > file_size)
      throw FormatError(FormatErrc::CorruptIndex,
                        "index entry outside payload in " + path.string());
    prev_end = e.offset + e.length;
  }
  return r;
}

std::string SequenceFileReader::read(uint64_t offset, uint64_t length) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), offset,
      [](const SeqEntry& e, uint64_t off) { return e.offset < off; });
  if (it == entries_.end() || it->offset != offset || it->length != length)
    throw FormatError(FormatErrc::CorruptSplit,
                      "corrupt split: offset/length does not match the index "
                      "of " + id_);

  std::lock_guard<std::mutex> lock(mutex_);
  stream_.clear();
  stream_.seekg(static_cast<std::streamoff>(offset));
  seeks_.fetch_add(1, std::memory_order_relaxed);
  std::string buf(length, '\0');
  stream_.read(buf.data(), static_cast<std::streamsize>(length));
  reads_.fetch_add(1, std::memory_order_relaxed);
  if (static_cast<uint64_t>(stream_.gcount()) != length)
    throw FormatError(FormatErrc::Truncated,
                      "truncated payload reading " + id_);
  return buf;
}

SequenceFileReader::IoStats SequenceFileReader::stats() const {
  return {seeks_.load(std::memory_order_relaxed),
          reads_.load(std::memory_order_relaxed)};
}

SeqFileRegistry::SeqFileRegistry(std::filesystem::path dir)
    : dir_(std::move(dir)) {}

std::vector<std::string> SeqFileRegistry::list_ids() const {
  std::vector<std::string> ids;
  if (!std::filesystem::exists(dir_)) return ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".seq")
      ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

SequenceFileReader& SeqFileRegistry::reader(const std::string& id) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = readers_.find(id);
  if (it != readers_.end()) return *it->second;
  std::filesystem::path path = dir_ / (id + ".seq");
  if (!std::filesystem::exists(path))
    throw FormatError(FormatErrc::UnknownContainer,
                      "unknown sequence file id '" + id + "' (no " +
                          path.string() + ")");
  auto r = SequenceFileReader::open(path);
  opened_order_.push_back(id);
  auto [pos, inserted] = readers_.emplace(id, std::move(r));
  (void)inserted;
  return *pos->second;
}

ImageRecord SeqFileRegistry::read_record(const FileSplit& split) {
  std::string bytes = reader(split.seqfile_id).read(split.offset, split.length);
  return decode_record(bytes);
}

std::vector<std::string> SeqFileRegistry::opened_ids() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return opened_order_;
}

bool BandStripFilter::matches_container(const std::string& id) const {
  if (strips.empty()) return false;
  GlobPattern pattern = build_container_glob(band, strips);
  return pattern.matches(id);
}

PackResult pack_unstructured(const std::vector<ImageRecord>& records,
                             int n_files, uint64_t seed,
                             const std::filesystem::path& out_dir) {
  if (n_files < 1)
    throw std::invalid_argument("pack_unstructured: n_files must be >= 1");
  std::filesystem::create_directories(out_dir);

  std::vector<std::vector<std::pair<std::string, std::string>>> buckets(
      n_files);
  std::mt19937_64 rng(seed);
  for (const ImageRecord& rec : records) {
    size_t slot = static_cast<size_t>(rng() % static_cast<uint64_t>(n_files));
    buckets[slot].emplace_back(rec.meta.key(), encode_record(rec));
  }

  PackResult result;
  result.total_entries = records.size();
  for (int i = 0; i < n_files; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "seq-%04d", i);
    write_sequence_file(out_dir / (std::string(name) + ".seq"),
                        std::move(buckets[i]));
    result.ids.emplace_back(name);
  }
  return result;
}

PackResult pack_structured(const std::vector<ImageRecord>& records,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::map<std::string, std::vector<std::pair<std::string, std::string>>>
      buckets;
  for (const ImageRecord& rec : records) {
    std::string id = std::string("seq-") + band_char(rec.meta.band) +
                     std::to_string(rec.meta.strip);
    buckets[id].emplace_back(rec.meta.key(), encode_record(rec));
  }

  PackResult result;
  result.total_entries = records.size();
  for (auto& [id, entries] : buckets) {
    write_sequence_file(out_dir / (id + ".seq"), std::move(entries));
    result.ids.push_back(id);
  }
  return result;
}

std::vector<FileSplit> splits_for(SeqFileRegistry& registry,
                                  const std::vector<std::string>& ids,
                                  const std::optional<BandStripFilter>& filter,
                                  uint64_t block_size) {
  if (block_size == 0)
    throw std::invalid_argument("splits_for: block_size must be > 0");
  std::vector<FileSplit> splits;
  for (const std::string& id : ids) {
    if (filter && !filter->matches_container(id)) continue;
    SequenceFileReader& r = registry.reader(id);
    for (const SeqEntry& e : r.index())
      splits.push_back(
          {id, e.offset, e.length, e.key, e.offset / block_size});
  }
  return splits;
}

}  // namespace skystack
