#include "skystack/glob.hpp"

#include <algorithm>
#include <stdexcept>

namespace skystack {

namespace {

std::vector<std::string_view> split_segments(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t slash = s.find('/', start);
    if (slash == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, slash - start));
    start = slash + 1;
  }
}

std::string strip_digits(const std::vector<int>& strips) {
  std::string cls;
  for (int s : strips) {
    if (s < 1 || s > 9)
      throw std::invalid_argument("strip id out of range for glob class");
    cls.push_back(static_cast<char>('0' + s));
  }
  return cls;
}

}  // namespace

GlobPattern GlobPattern::parse(std::string pattern) {
  GlobPattern p;
  p.text_ = std::move(pattern);
  for (std::string_view seg : split_segments(p.text_)) {
    Segment tokens;
    std::string literal;
    auto flush = [&] {
      if (!literal.empty()) {
        tokens.push_back({Token::kLiteral, literal});
        literal.clear();
      }
    };
    for (size_t i = 0; i < seg.size(); ++i) {
      char c = seg[i];
      if (c == '*') {
        flush();
        if (tokens.empty() || tokens.back().kind != Token::kStar)
          tokens.push_back({Token::kStar, {}});
      } else if (c == '[') {
        size_t close = seg.find(']', i + 1);
        if (close == std::string_view::npos)
          throw std::invalid_argument("glob pattern: unclosed '[' in '" +
                                      std::string(seg) + "'");
        flush();
        tokens.push_back(
            {Token::kClass, std::string(seg.substr(i + 1, close - i - 1))});
        i = close;
      } else {
        literal.push_back(c);
      }
    }
    flush();
    p.segments_.push_back(std::move(tokens));
  }
  return p;
}

bool GlobPattern::match_segment(const Segment& seg, std::string_view s) {
  // Backtracking match over one path segment; tokens are literal runs,
  // classes, and stars.
  size_t tok = 0, pos = 0;
  size_t star_tok = Segment::size_type(-1), star_pos = 0;
  while (true) {
    if (tok == seg.size()) {
      if (pos == s.size()) return true;
    } else {
      const Token& t = seg[tok];
      switch (t.kind) {
        case Token::kStar:
          star_tok = tok;
          star_pos = pos;
          ++tok;
          continue;
        case Token::kLiteral:
          if (s.compare(pos, t.chars.size(), t.chars) == 0) {
            pos += t.chars.size();
            ++tok;
            continue;
          }
          break;
        case Token::kClass:
          if (pos < s.size() &&
              t.chars.find(s[pos]) != std::string::npos) {
            ++pos;
            ++tok;
            continue;
          }
          break;
      }
    }
    // Mismatch: grow the most recent star by one character, if any.
    if (star_tok == Segment::size_type(-1) || star_pos >= s.size())
      return false;
    ++star_pos;
    pos = star_pos;
    tok = star_tok + 1;
  }
}

bool GlobPattern::matches(std::string_view path) const {
  std::vector<std::string_view> parts = split_segments(path);
  if (parts.size() != segments_.size()) return false;
  for (size_t i = 0; i < parts.size(); ++i)
    if (!match_segment(segments_[i], parts[i])) return false;
  return true;
}

bool glob_match(std::string_view path, const GlobPattern& pattern) {
  return pattern.matches(path);
}

std::vector<std::filesystem::path> prefilter_paths(
    const std::filesystem::path& root, const GlobPattern& pattern) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (pattern.matches(entry.path().generic_string()))
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

GlobPattern build_glob(const std::filesystem::path& root, Band band,
                       const std::vector<int>& strips) {
  if (strips.empty())
    throw std::invalid_argument("build_glob: empty strip set");
  std::string cls = strip_digits(strips);
  std::string rootstr = root.generic_string();
  while (!rootstr.empty() && rootstr.back() == '/') rootstr.pop_back();
  std::string pattern = rootstr + "/*/*/corr/[" + cls + "]/fpC-*-[" +
                        band_char(band) + "][" + cls + "]-*.fit";
  return GlobPattern::parse(std::move(pattern));
}

GlobPattern build_glob(const std::filesystem::path& root, Band band,
                       const SkyBounds& query_bounds,
                       const CameraLayout& layout) {
  std::vector<int> strips = strips_overlapping(query_bounds, layout);
  if (strips.empty())
    throw std::invalid_argument(
        "build_glob: query bounds lie outside the stripe");
  return build_glob(root, band, strips);
}

GlobPattern build_container_glob(Band band, const std::vector<int>& strips) {
  if (strips.empty())
    throw std::invalid_argument("build_container_glob: empty strip set");
  std::string pattern = std::string("seq-[") + band_char(band) + "][" +
                        strip_digits(strips) + "]";
  return GlobPattern::parse(std::move(pattern));
}

}  // namespace skystack
