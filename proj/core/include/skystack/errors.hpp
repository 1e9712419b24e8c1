#pragma once

#include <stdexcept>
#include <string>

namespace skystack {

// Error codes for the on-disk formats (raster, sequence-file container,
// catalog). Each decode failure carries a distinct code so callers and
// tests can tell corruption modes apart.
enum class FormatErrc {
  BadMagic,
  BadVersion,
  Truncated,
  CorruptIndex,
  CorruptSplit,
  UnknownContainer,
  DuplicateKey,
  MissingSection,
  IoFailure,
};

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  FormatErrc code() const { return code_; }

 private:
  FormatErrc code_;
};

}  // namespace skystack
