#include "sae/metadata.hpp"

#include <fmt/format.h>

#ifndef SAE_VERSION
#define SAE_VERSION "0.0.0"
#endif

namespace sae {

std::string tool_version() { return SAE_VERSION; }

std::string config_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string ArtifactMetadata::line() const {
  return fmt::format("sae {} seed={} config={}", version, seed, config_hash);
}

}  // namespace sae
