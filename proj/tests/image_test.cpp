#include "skystack/image.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "skystack/errors.hpp"
#include "skystack/survey.hpp"
#include "testutil.hpp"

using namespace skystack;
using testutil::TempDir;

namespace {

ImageTile random_tile(std::mt19937_64& rng, int max_dim = 24) {
  std::uniform_int_distribution<int> dim(1, max_dim);
  std::uniform_real_distribution<double> val(-1e6, 1e6);
  std::uniform_real_distribution<double> coord(0.0, 359.0);
  ImageTile t;
  t.width = dim(rng);
  t.height = dim(rng);
  t.wcs = Wcs{coord(rng), coord(rng) / 8.0 - 20.0, 0.001,
              t.width / 2.0,  t.height / 2.0,      t.width, t.height};
  t.pixels.resize(static_cast<size_t>(t.width) * t.height);
  for (float& p : t.pixels) p = static_cast<float>(val(rng));
  return t;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("record key follows the filename convention") {
  ImageMeta m;
  m.run = 5902;
  m.rerun = 40;
  m.band = Band::u;
  m.strip = 1;
  m.field = 690;
  CHECK(m.key() == "fpC-005902-u1-0690");
}

TEST_CASE("generate_survey: record count") {
  SurveyConfig cfg = testutil::small_survey();
  auto records = generate_survey(cfg);
  CHECK(records.size() == 180);  // 2 runs x 5 bands x 6 strips x 3 fields
  CHECK(records.size() == cfg.record_count());
}

TEST_CASE("generate_survey: deterministic in seed") {
  SurveyConfig cfg = testutil::small_survey(7);
  auto a = generate_survey(cfg);
  auto b = generate_survey(cfg);
  REQUIRE(a.size() == b.size());
  CHECK(a == b);

  cfg.seed = 8;
  auto c = generate_survey(cfg);
  bool all_equal = true;
  for (size_t i = 0; i < a.size(); ++i)
    if (!(a[i].tile.pixels == c[i].tile.pixels)) all_equal = false;
  CHECK(!all_equal);
}

TEST_CASE("generate_survey: strip bounds match the layout") {
  SurveyConfig cfg = testutil::small_survey();
  CameraLayout layout = cfg.layout();
  for (const ImageRecord& r : generate_survey(cfg)) {
    auto iv = layout.strip_interval(r.meta.strip);
    CHECK(r.meta.bounds.dec_min == iv.lo);
    CHECK(r.meta.bounds.dec_max == iv.hi);
  }
}

TEST_CASE("generate_survey: per-point coverage equals n_runs") {
  SurveyConfig cfg = testutil::small_survey();
  auto records = generate_survey(cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ra(cfg.ra_min + 1e-6,
                                            cfg.ra_max - 1e-6);
  std::uniform_real_distribution<double> dec(cfg.dec_min + 1e-6,
                                             cfg.dec_max - 1e-6);
  for (int i = 0; i < 100; ++i) {
    double p_ra = ra(rng), p_dec = dec(rng);
    for (Band band : kAllBands) {
      int covering = 0;
      for (const ImageRecord& r : records)
        if (r.meta.band == band && r.meta.bounds.contains(p_ra, p_dec))
          ++covering;
      CHECK(covering == cfg.n_runs);
    }
  }
}

TEST_CASE("generate_survey: noise-only stack obeys the 1/sqrt(N) law") {
  SurveyConfig cfg;
  cfg.n_runs = 79;
  cfg.fields_per_run = 1;
  cfg.ra_min = 37.0;
  cfg.ra_max = 37.5;
  cfg.field_width = 0.5;
  cfg.pixel_scale = 0.004;  // 125 x 105 px tiles: >= 1e4 samples
  cfg.noise_sigma = 1.0;
  cfg.n_sources = 0;
  cfg.seed = 1;
  auto records = generate_survey(cfg);

  // Mean the same (band r, strip 3, field 0) tile across runs.
  std::vector<const ImageTile*> tiles;
  for (const ImageRecord& r : records)
    if (r.meta.band == Band::r && r.meta.strip == 3) tiles.push_back(&r.tile);
  REQUIRE(tiles.size() == 79);

  for (int n : {4, 16, 64, 79}) {
    size_t npx = tiles[0]->pixels.size();
    REQUIRE(npx >= 10000);
    std::vector<double> mean(npx, 0.0);
    for (int i = 0; i < n; ++i)
      for (size_t p = 0; p < npx; ++p) mean[p] += tiles[i]->pixels[p];
    double m1 = 0.0, m2 = 0.0;
    for (size_t p = 0; p < npx; ++p) {
      double v = mean[p] / n;
      m1 += v;
      m2 += v * v;
    }
    m1 /= static_cast<double>(npx);
    m2 /= static_cast<double>(npx);
    double std_dev = std::sqrt(m2 - m1 * m1);
    double expected = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(std_dev - expected) < 0.1 * expected);
  }
}

TEST_CASE("generate_survey rejects a non-tiling field grid") {
  SurveyConfig cfg = testutil::small_survey();
  cfg.field_width = 0.9;  // 3 x 0.9 != 3.0
  CHECK_THROWS_AS(generate_survey(cfg), std::invalid_argument);
}

TEST_CASE("raster codec: 1x1 round-trip") {
  TempDir tmp;
  ImageTile t;
  t.width = t.height = 1;
  t.wcs = Wcs{10.0, 0.0, 0.01, 0.5, 0.5, 1, 1};
  t.pixels = {0.0f};
  write_raster(tmp / "a.cdf", t);
  RasterFile r = read_raster(tmp / "a.cdf");
  CHECK(r.tile == t);
  CHECK(!r.depth);
  CHECK(!r.meta);
}

TEST_CASE("raster codec: large random tile round-trips bit-exactly") {
  TempDir tmp;
  std::mt19937_64 rng(21);
  ImageTile t;
  t.width = 2500;
  t.height = 2500;
  t.wcs = Wcs{37.5, 0.0, 0.0004, 1250.0, 1250.0, 2500, 2500};
  t.pixels.resize(static_cast<size_t>(t.width) * t.height);
  std::uniform_real_distribution<double> val(-1e30, 1e30);
  for (float& p : t.pixels) p = static_cast<float>(val(rng));
  write_raster(tmp / "big.cdf", t);
  RasterFile r = read_raster(tmp / "big.cdf");
  CHECK(r.tile.pixels == t.pixels);
  CHECK(r.tile.wcs == t.wcs);
}

TEST_CASE("raster codec: distinct decode errors") {
  std::mt19937_64 rng(5);
  std::string good = encode_raster(RasterFile{random_tile(rng), {}, {}});

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  try {
    static_cast<void>(decode_raster(bad_magic));
    FAIL("expected magic error");
  } catch (const FormatError& e) {
    CHECK(e.code() == FormatErrc::BadMagic);
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }

  std::string bad_version = good;
  bad_version[4] = 9;
  try {
    static_cast<void>(decode_raster(bad_version));
    FAIL("expected version error");
  } catch (const FormatError& e) {
    CHECK(e.code() == FormatErrc::BadVersion);
  }

  std::string truncated = good.substr(0, good.size() - 3);
  try {
    static_cast<void>(decode_raster(truncated));
    FAIL("expected truncation error");
  } catch (const FormatError& e) {
    CHECK(e.code() == FormatErrc::Truncated);
  }
}

TEST_CASE("raster codec: random instances with depth and meta planes") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < 50; ++i) {
    RasterFile r;
    r.tile = random_tile(rng);
    size_t npx = r.tile.pixels.size();
    if (coin(rng)) {
      std::vector<uint32_t> depth(npx);
      for (uint32_t& d : depth) d = static_cast<uint32_t>(rng() % 100);
      r.depth = std::move(depth);
    }
    if (coin(rng)) {
      ImageMeta m;
      m.run = static_cast<int>(rng() % 999999);
      m.rerun = static_cast<int>(rng() % 100);
      m.strip = 1 + static_cast<int>(rng() % 6);
      m.band = kAllBands[rng() % 5];
      m.field = static_cast<int>(rng() % 9999);
      m.bounds = SkyBounds::make(10.0, 11.0, -1.0, 1.0);
      r.meta = m;
    }
    std::string bytes = encode_raster(r);
    RasterFile back = decode_raster(bytes);
    CHECK(back == r);
    CHECK(encode_raster(back) == bytes);
  }
}

TEST_CASE("materialize_raw_layout: exact archive paths") {
  ImageMeta m;
  m.run = 5902;
  m.rerun = 40;
  m.band = Band::u;
  m.strip = 1;
  m.field = 690;
  CHECK(raw_record_path("/data", m).generic_string() ==
        "/data/5902/40/corr/1/fpC-005902-u1-0690.fit");
}

TEST_CASE("materialize_raw_layout: file count and idempotence") {
  TempDir tmp;
  SurveyConfig cfg = testutil::small_survey();
  auto records = generate_survey(cfg);
  materialize_raw_layout(records, tmp / "raw");

  size_t n = 0;
  for (const auto& e :
       std::filesystem::recursive_directory_iterator(tmp / "raw"))
    if (e.is_regular_file()) ++n;
  CHECK(n == 180);

  // one strip directory per strip under each run/rerun
  std::filesystem::path strips = tmp.path / "raw" / "0" / "40" / "corr";
  size_t strip_dirs = 0;
  for (const auto& e : std::filesystem::directory_iterator(strips))
    if (e.is_directory()) ++strip_dirs;
  CHECK(strip_dirs == 6);

  std::filesystem::path sample =
      raw_record_path(tmp / "raw", records.front().meta);
  auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  std::string before = read_bytes(sample);
  materialize_raw_layout(records, tmp / "raw");
  CHECK(read_bytes(sample) == before);

  // records read back identically
  auto loaded = load_raw_records(tmp / "raw");
  REQUIRE(loaded.size() == records.size());
  std::vector<ImageRecord> sorted_in = records;
  std::sort(sorted_in.begin(), sorted_in.end(),
            [](const ImageRecord& a, const ImageRecord& b) {
              return raw_record_path("r", a.meta) < raw_record_path("r", b.meta);
            });
  CHECK(loaded == sorted_in);
}

TEST_CASE("survey config file round-trip and diagnostics") {
  TempDir tmp;
  SurveyConfig cfg = testutil::small_survey(1234);
  save_survey_config(cfg, tmp / "s.config");
  SurveyConfig back = load_survey_config(tmp / "s.config");
  CHECK(back.n_runs == cfg.n_runs);
  CHECK(back.seed == cfg.seed);
  CHECK(back.pixel_scale == cfg.pixel_scale);

  std::ofstream bad(tmp / "bad.config");
  bad << "n_runs = 2\nnot a line\n";
  bad.close();
  try {
    load_survey_config(tmp / "bad.config");
    FAIL("expected parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  std::ofstream unknown(tmp / "unk.config");
  unknown << "n_rnus = 2\n";
  unknown.close();
  CHECK_THROWS_AS(load_survey_config(tmp / "unk.config"),
                  std::invalid_argument);
}

}  // TEST_SUITE
