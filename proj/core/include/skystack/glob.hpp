#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "skystack/geometry.hpp"

namespace skystack {

// Glob over '/'-separated paths. '*' matches any run of characters within
// one segment (it never crosses '/'); '[abc]' matches one character from
// the class. Everything else is literal. Matching is segment-wise: the
// pattern and the path must have the same number of segments.
class GlobPattern {
 public:
  // Throws std::invalid_argument on malformed patterns (unclosed '[').
  static GlobPattern parse(std::string pattern);

  bool matches(std::string_view path) const;
  const std::string& str() const { return text_; }

 private:
  struct Token {
    enum Kind { kLiteral, kStar, kClass } kind;
    std::string chars;  // literal text or class members
  };
  using Segment = std::vector<Token>;

  static bool match_segment(const Segment& seg, std::string_view s);

  std::string text_;
  std::vector<Segment> segments_;
};

bool glob_match(std::string_view path, const GlobPattern& pattern);

// Walks the tree under root and returns the regular files whose full path
// matches, sorted.
std::vector<std::filesystem::path> prefilter_paths(
    const std::filesystem::path& root, const GlobPattern& pattern);

// Pattern accepting exactly the raw-layout files with the query's band and
// an overlapping strip, e.g. "<root>/*/*/corr/[234]/fpC-*-[g][234]-*.fit".
// Throws std::invalid_argument when the query lies outside the stripe.
GlobPattern build_glob(const std::filesystem::path& root, Band band,
                       const SkyBounds& query_bounds,
                       const CameraLayout& layout);
GlobPattern build_glob(const std::filesystem::path& root, Band band,
                       const std::vector<int>& strips);

// Same filter expressed over structured container ids ("seq-g2" etc.).
GlobPattern build_container_glob(Band band, const std::vector<int>& strips);

}  // namespace skystack
