#include "moeforge/tensor_io.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>

#include "moeforge/errors.hpp"

namespace moeforge {

void append_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void append_f64_le(std::vector<unsigned char>& out, double v) {
  append_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double read_f64_le(const unsigned char* p) { return std::bit_cast<double>(read_u64_le(p)); }

void append_payload(std::vector<unsigned char>& out, const Matrix& m) {
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Index i = 0; i < m.size(); ++i) append_f64_le(out, m.data()[i]);
}

Matrix decode_payload(const unsigned char* p, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = read_f64_le(p + 8 * i);
  return m;
}

std::uint32_t crc32_of(const unsigned char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  while (size > 0) {
    const std::size_t n = size < kChunk ? size : kChunk;
    crc = crc32(crc, data, static_cast<uInt>(n));
    data += n;
    size -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_tensor_file(const std::filesystem::path& path, const Matrix& m) {
  std::vector<unsigned char> bytes;
  append_u64_le(bytes, static_cast<std::uint64_t>(m.rows()));
  append_u64_le(bytes, static_cast<std::uint64_t>(m.cols()));
  append_payload(bytes, m);
  write_file_bytes(path, bytes);
}

Matrix read_tensor_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 16) throw IoError(path.string() + ": truncated tensor header");
  const auto rows = read_u64_le(bytes.data());
  const auto cols = read_u64_le(bytes.data() + 8);
  if (bytes.size() != 16 + rows * cols * 8) {
    throw IoError(path.string() + ": payload size does not match header " +
                  std::to_string(rows) + "x" + std::to_string(cols));
  }
  return decode_payload(bytes.data() + 16, static_cast<Index>(rows), static_cast<Index>(cols));
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace moeforge
