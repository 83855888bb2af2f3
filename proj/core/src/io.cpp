#include "stylebank/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stylebank {

namespace {

void put_le(std::ostream& out, uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, bytes);
}

uint64_t get_le(std::istream& in, int bytes) {
    char buf[8];
    in.read(buf, bytes);
    if (in.gcount() != bytes) {
        const auto missing = bytes - in.gcount();
        throw std::runtime_error("truncated stream: missing " + std::to_string(missing) + " bytes");
    }
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

}  // namespace

void write_u8(std::ostream& out, uint8_t v) { put_le(out, v, 1); }
void write_u32(std::ostream& out, uint32_t v) { put_le(out, v, 4); }
void write_u64(std::ostream& out, uint64_t v) { put_le(out, v, 8); }

void write_f32(std::ostream& out, double v) {
    const float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_le(out, bits, 4);
}

uint8_t read_u8(std::istream& in) { return static_cast<uint8_t>(get_le(in, 1)); }
uint32_t read_u32(std::istream& in) { return static_cast<uint32_t>(get_le(in, 4)); }
uint64_t read_u64(std::istream& in) { return get_le(in, 8); }

double read_f32(std::istream& in) {
    const uint32_t bits = static_cast<uint32_t>(get_le(in, 4));
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

void write_bytes(std::ostream& out, const void* data, size_t len) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_bytes(std::istream& in, void* data, size_t len) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (static_cast<size_t>(in.gcount()) != len) {
        const auto missing = len - static_cast<size_t>(in.gcount());
        throw std::runtime_error("truncated stream: missing " + std::to_string(missing) + " bytes");
    }
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

namespace {

size_t dims_product(const std::vector<uint32_t>& dims) {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
}

void write_tensor_header(std::ostream& out, const std::vector<uint32_t>& dims) {
    write_bytes(out, kTensorMagic, sizeof(kTensorMagic));
    write_u32(out, static_cast<uint32_t>(dims.size()));
    for (uint32_t d : dims) write_u32(out, d);
}

std::vector<uint32_t> read_tensor_header(std::istream& in, const std::filesystem::path& path) {
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kTensorMagic, 8) != 0)
        throw std::runtime_error("bad tensor magic in " + path.string());
    const uint32_t rank = read_u32(in);
    if (rank == 0 || rank > 8) throw std::runtime_error("bad tensor rank in " + path.string());
    std::vector<uint32_t> dims(rank);
    for (uint32_t& d : dims) d = read_u32(in);
    return dims;
}

}  // namespace

void write_tensor_f32(const std::filesystem::path& path, const std::vector<uint32_t>& dims,
                      const std::vector<double>& values) {
    if (values.size() != dims_product(dims))
        throw std::invalid_argument("tensor payload size does not match dims");
    auto out = open_output(path);
    write_tensor_header(out, dims);
    for (double v : values) write_f32(out, v);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_tensor_u32(const std::filesystem::path& path, const std::vector<uint32_t>& dims,
                      const std::vector<uint32_t>& values) {
    if (values.size() != dims_product(dims))
        throw std::invalid_argument("tensor payload size does not match dims");
    auto out = open_output(path);
    write_tensor_header(out, dims);
    for (uint32_t v : values) write_u32(out, v);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void read_tensor_f32(const std::filesystem::path& path, std::vector<uint32_t>& dims,
                     std::vector<double>& values) {
    auto in = open_input(path);
    dims = read_tensor_header(in, path);
    values.resize(dims_product(dims));
    for (double& v : values) v = read_f32(in);
}

void read_tensor_u32(const std::filesystem::path& path, std::vector<uint32_t>& dims,
                     std::vector<uint32_t>& values) {
    auto in = open_input(path);
    dims = read_tensor_header(in, path);
    values.resize(dims_product(dims));
    for (uint32_t& v : values) v = read_u32(in);
}

}  // namespace stylebank
