#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "moeforge/types.hpp"

namespace moeforge {

/// Little-endian byte encoding of 64-bit values, independent of host order.
void append_u64_le(std::vector<unsigned char>& out, std::uint64_t v);
void append_f64_le(std::vector<unsigned char>& out, double v);
std::uint64_t read_u64_le(const unsigned char* p);
double read_f64_le(const unsigned char* p);

/// Raw row-major payload of a matrix (no header).
void append_payload(std::vector<unsigned char>& out, const Matrix& m);
Matrix decode_payload(const unsigned char* p, Index rows, Index cols);

std::uint32_t crc32_of(const unsigned char* data, std::size_t size);

/// Standalone tensor file: u64 rows, u64 cols, then rows*cols f64, all
/// little-endian.
void write_tensor_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_tensor_file(const std::filesystem::path& path);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace moeforge
