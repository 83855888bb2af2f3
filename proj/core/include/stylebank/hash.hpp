#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stylebank {

using Digest = std::array<uint8_t, 32>;

/// Incremental SHA-256 (OpenSSL-backed).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t len);
    void update_f32(const double* values, size_t count);  // hashes the float32 LE image of doubles
    Digest finish();

    static Digest of_bytes(const void* data, size_t len);
    static Digest of_file(const std::filesystem::path& path);

private:
    void* ctx_ = nullptr;
};

std::string hex(const Digest& d);

}  // namespace stylebank
