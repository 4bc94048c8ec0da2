#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sae {

std::string tool_version();

/// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string config_hash(std::string_view text);

/// Provenance stamped on every artifact the tool writes.
struct ArtifactMetadata {
  std::string version = tool_version();
  std::uint64_t seed = 0;
  std::string config_hash = "none";

  /// Single line, no trailing newline: `sae <version> seed=<seed> config=<hash>`.
  std::string line() const;
};

}  // namespace sae
