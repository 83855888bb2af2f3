#include "stylebank/hash.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stylebank {

Sha256::Sha256() {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: init failed");
    ctx_ = ctx;
}

Sha256::~Sha256() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(const void* data, size_t len) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) != 1)
        throw std::runtime_error("sha256: update failed");
}

void Sha256::update_f32(const double* values, size_t count) {
    // Matches the on-disk encoding: float32 little-endian.
    unsigned char buf[4];
    for (size_t i = 0; i < count; ++i) {
        const float f = static_cast<float>(values[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        buf[0] = static_cast<unsigned char>(bits & 0xff);
        buf[1] = static_cast<unsigned char>((bits >> 8) & 0xff);
        buf[2] = static_cast<unsigned char>((bits >> 16) & 0xff);
        buf[3] = static_cast<unsigned char>((bits >> 24) & 0xff);
        update(buf, 4);
    }
}

Digest Sha256::finish() {
    Digest d{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.data(), &len) != 1 || len != d.size())
        throw std::runtime_error("sha256: finalize failed");
    return d;
}

Digest Sha256::of_bytes(const void* data, size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.finish();
}

Digest Sha256::of_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256: cannot open " + path.string());
    Sha256 h;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        if (got > 0) h.update(buf, static_cast<size_t>(got));
    }
    return h.finish();
}

std::string hex(const Digest& d) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (uint8_t b : d) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

}  // namespace stylebank
