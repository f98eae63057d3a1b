#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace exitdse {

// FNV-1a 64-bit. Used as a stable fingerprint for run manifests and input
// files, not for anything adversarial.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view data);
std::string hash_file(const std::filesystem::path& path);

}  // namespace exitdse
