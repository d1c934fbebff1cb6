#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace afp {

// FNV-1a 64-bit; used for artifact/provenance hashes in manifests.
class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001B3ULL;
        }
    }
    std::uint64_t digest() const { return h_; }
    std::string hex() const;

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

std::uint64_t hash_bytes(const void* data, std::size_t n);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_file_hex(const std::filesystem::path& path);
std::string to_hex(std::uint64_t h);

}  // namespace afp
