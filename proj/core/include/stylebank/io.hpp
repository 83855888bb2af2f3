#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stylebank {

// Little-endian primitives shared by every binary format in the project.
// Readers throw std::runtime_error on short reads, naming the missing byte count.

void write_u8(std::ostream& out, uint8_t v);
void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_f32(std::ostream& out, double v);  // stored as float32

uint8_t read_u8(std::istream& in);
uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
double read_f32(std::istream& in);

void write_bytes(std::ostream& out, const void* data, size_t len);
void read_bytes(std::istream& in, void* data, size_t len);

// Sample tensor file: magic "USYN0001", u32 rank, u32 dims[rank], then the
// row-major payload (float32 for images, u32 token ids for text).
inline constexpr char kTensorMagic[8] = {'U', 'S', 'Y', 'N', '0', '0', '0', '1'};

void write_tensor_f32(const std::filesystem::path& path, const std::vector<uint32_t>& dims,
                      const std::vector<double>& values);
void write_tensor_u32(const std::filesystem::path& path, const std::vector<uint32_t>& dims,
                      const std::vector<uint32_t>& values);

void read_tensor_f32(const std::filesystem::path& path, std::vector<uint32_t>& dims,
                     std::vector<double>& values);
void read_tensor_u32(const std::filesystem::path& path, std::vector<uint32_t>& dims,
                     std::vector<uint32_t>& values);

std::ofstream open_output(const std::filesystem::path& path);   // binary, throws if unwritable
std::ifstream open_input(const std::filesystem::path& path);    // binary, throws if missing

}  // namespace stylebank
