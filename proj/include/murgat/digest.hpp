#pragma once

#include <string>
#include <vector>

namespace murgat {

// SHA-256 hex digest.  Used for cache keys, content addressing, and run
// manifests; everything that must be stable across runs and processes.
std::string sha256_hex(const std::string& bytes);
std::string sha256_hex(const std::vector<std::string>& parts); // length-prefixed join
std::string sha256_file_hex(const std::string& path);

} // namespace murgat
