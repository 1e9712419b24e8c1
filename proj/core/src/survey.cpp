#include "skystack/survey.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "skystack/errors.hpp"

namespace skystack {

namespace {

constexpr int kRerun = 40;  // constant rerun id, as in the raw archive layout

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic normal deviates: mt19937_64 + Box-Muller, so tile bytes do
// not depend on the standard library's distribution implementation.
class NormalRng {
 public:
  explicit NormalRng(uint64_t seed) : eng_(seed) {}

  double uniform() {
    return (eng_() >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

struct Source {
  double ra, dec;
  double flux[5];
};

std::vector<Source> draw_sources(const SurveyConfig& cfg) {
  NormalRng rng(splitmix64(cfg.seed ^ 0x736f757263656c6full));
  std::vector<Source> out;
  out.reserve(cfg.n_sources);
  for (int i = 0; i < cfg.n_sources; ++i) {
    Source s;
    s.ra = cfg.ra_min + rng.uniform() * (cfg.ra_max - cfg.ra_min);
    s.dec = cfg.dec_min + rng.uniform() * (cfg.dec_max - cfg.dec_min);
    for (double& f : s.flux) f = 5.0 + 45.0 * rng.uniform();
    out.push_back(s);
  }
  return out;
}

uint64_t record_seed(const SurveyConfig& cfg, int run, int band, int strip,
                     int field) {
  uint64_t h = cfg.seed;
  h = splitmix64(h ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(run + 1)));
  h = splitmix64(h ^ (0xbf58476d1ce4e5b9ull * static_cast<uint64_t>(band + 1)));
  h = splitmix64(h ^ (0x94d049bb133111ebull * static_cast<uint64_t>(strip)));
  h = splitmix64(h ^ (0x2545f4914f6cdd1dull * static_cast<uint64_t>(field + 1)));
  return h;
}

void render_sources(ImageTile& tile, const std::vector<Source>& sources,
                    Band band, const SkyBounds& bounds, double psf_sigma_deg) {
  double sigma_px = psf_sigma_deg / tile.wcs.pixel_scale;
  double margin = 4.0 * psf_sigma_deg;
  int bi = static_cast<int>(band);
  for (const Source& s : sources) {
    // Quick reject against the tile footprint grown by the PSF support.
    if (s.dec < bounds.dec_min - margin || s.dec >= bounds.dec_max + margin)
      continue;
    double dra = std::fmod(s.ra - bounds.ra_min + 540.0, 360.0) - 180.0;
    if (dra < -margin || dra >= bounds.ra_width() + margin) continue;

    PixelXY c = sky_to_pixel(tile.wcs, s.ra, s.dec);
    int x0 = std::max(0, static_cast<int>(std::floor(c.x - 4.0 * sigma_px)));
    int x1 = std::min(tile.width - 1,
                      static_cast<int>(std::ceil(c.x + 4.0 * sigma_px)));
    int y0 = std::max(0, static_cast<int>(std::floor(c.y - 4.0 * sigma_px)));
    int y1 = std::min(tile.height - 1,
                      static_cast<int>(std::ceil(c.y + 4.0 * sigma_px)));
    double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double dx = (x + 0.5) - c.x;
        double dy = (y + 0.5) - c.y;
        double v = s.flux[bi] * std::exp(-(dx * dx + dy * dy) * inv2s2);
        tile.pixels[static_cast<size_t>(y) * tile.width + x] +=
            static_cast<float>(v);
      }
    }
  }
}

}  // namespace

void SurveyConfig::validate() const {
  if (n_runs < 1) throw std::invalid_argument("survey config: n_runs must be >= 1");
  if (fields_per_run < 1)
    throw std::invalid_argument("survey config: fields_per_run must be >= 1");
  if (!(dec_max > dec_min))
    throw std::invalid_argument("survey config: dec_max must exceed dec_min");
  if (!(ra_max > ra_min) || ra_max - ra_min >= 360.0)
    throw std::invalid_argument("survey config: ra range must be positive and < 360");
  if (!(field_width > 0.0))
    throw std::invalid_argument("survey config: field_width must be > 0");
  if (!(pixel_scale > 0.0))
    throw std::invalid_argument("survey config: pixel_scale must be > 0");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("survey config: noise_sigma must be >= 0");
  if (n_sources < 0)
    throw std::invalid_argument("survey config: n_sources must be >= 0");
  double span = ra_max - ra_min;
  if (std::abs(fields_per_run * field_width - span) > 1e-9)
    throw std::invalid_argument(
        "survey config: field grid does not tile the RA range "
        "(fields_per_run * field_width must equal ra_max - ra_min)");
}

std::vector<ImageRecord> generate_survey(const SurveyConfig& cfg) {
  cfg.validate();
  CameraLayout layout = cfg.layout();
  std::vector<Source> sources = draw_sources(cfg);
  double psf_sigma_deg = 2.0 * cfg.pixel_scale;

  std::vector<ImageRecord> records;
  records.reserve(cfg.record_count());
  for (int run = 0; run < cfg.n_runs; ++run) {
    for (Band band : kAllBands) {
      for (int strip = 1; strip <= CameraLayout::kStrips; ++strip) {
        CameraLayout::Interval iv = layout.strip_interval(strip);
        for (int field = 0; field < cfg.fields_per_run; ++field) {
          SkyBounds bounds = SkyBounds::make(
              cfg.ra_min + field * cfg.field_width,
              cfg.ra_min + (field + 1) * cfg.field_width, iv.lo, iv.hi);

          ImageRecord rec;
          rec.meta = ImageMeta{run, kRerun, strip, band, field, bounds};
          rec.tile.wcs = make_target_wcs(bounds, cfg.pixel_scale);
          rec.tile.width = rec.tile.wcs.width;
          rec.tile.height = rec.tile.wcs.height;
          rec.tile.pixels.assign(
              static_cast<size_t>(rec.tile.width) * rec.tile.height, 0.0f);

          if (cfg.n_sources > 0)
            render_sources(rec.tile, sources, band, bounds, psf_sigma_deg);
          if (cfg.noise_sigma > 0.0) {
            NormalRng rng(record_seed(cfg, run, static_cast<int>(band), strip,
                                      field));
            for (float& px : rec.tile.pixels)
              px += static_cast<float>(cfg.noise_sigma * rng.normal());
          }
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return records;
}

std::filesystem::path raw_record_path(const std::filesystem::path& root,
                                      const ImageMeta& meta) {
  return root / std::to_string(meta.run) / std::to_string(meta.rerun) /
         "corr" / std::to_string(meta.strip) / (meta.key() + ".fit");
}

void materialize_raw_layout(const std::vector<ImageRecord>& records,
                            const std::filesystem::path& root) {
  for (const ImageRecord& rec : records) {
    std::filesystem::path path = raw_record_path(root, rec.meta);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw FormatError(FormatErrc::IoFailure,
                        "failed creating " + path.parent_path().string() +
                            ": " + ec.message());
    write_record_file(path, rec);
  }
}

std::vector<ImageRecord> load_raw_records(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(root)) {
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().extension() == ".fit")
        files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageRecord> records;
  records.reserve(files.size());
  for (const std::filesystem::path& f : files)
    records.push_back(read_record_file(f));
  return records;
}

SurveyConfig load_survey_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError(FormatErrc::IoFailure,
                      "cannot open config file " + path.string());

  SurveyConfig cfg;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (value.empty()) fail("empty value for key '" + key + "'");

    try {
      if (key == "n_runs") cfg.n_runs = std::stoi(value);
      else if (key == "fields_per_run") cfg.fields_per_run = std::stoi(value);
      else if (key == "dec_min") cfg.dec_min = std::stod(value);
      else if (key == "dec_max") cfg.dec_max = std::stod(value);
      else if (key == "ra_min") cfg.ra_min = std::stod(value);
      else if (key == "ra_max") cfg.ra_max = std::stod(value);
      else if (key == "field_width") cfg.field_width = std::stod(value);
      else if (key == "pixel_scale") cfg.pixel_scale = std::stod(value);
      else if (key == "noise_sigma") cfg.noise_sigma = std::stod(value);
      else if (key == "n_sources") cfg.n_sources = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else fail("unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      fail("cannot parse value '" + value + "' for key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void save_survey_config(const SurveyConfig& cfg,
                        const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(17);
  out << "n_runs = " << cfg.n_runs << "\n"
      << "fields_per_run = " << cfg.fields_per_run << "\n"
      << "dec_min = " << cfg.dec_min << "\n"
      << "dec_max = " << cfg.dec_max << "\n"
      << "ra_min = " << cfg.ra_min << "\n"
      << "ra_max = " << cfg.ra_max << "\n"
      << "field_width = " << cfg.field_width << "\n"
      << "pixel_scale = " << cfg.pixel_scale << "\n"
      << "noise_sigma = " << cfg.noise_sigma << "\n"
      << "n_sources = " << cfg.n_sources << "\n"
      << "seed = " << cfg.seed << "\n";
  std::ofstream f(path, std::ios::trunc);
  f << out.str();
  if (!f)
    throw FormatError(FormatErrc::IoFailure,
                      "failed writing config file " + path.string());
}

}  // namespace skystack
