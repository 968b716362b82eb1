#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "texeval/error.hpp"

namespace texeval {

// Little-endian fixed-width encoding, independent of host byte order.

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
  }

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path.string());
  }

  std::uint64_t u64() {
    unsigned char b[8];
    in_.read(reinterpret_cast<char*>(b), 8);
    if (in_.gcount() != 8) throw IoError("truncated file: " + path_.string());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  void f64s(std::span<double> out) {
    for (double& v : out) v = f64();
  }

  /// Throws unless the magic word and version match.
  void expect_header(std::uint64_t magic, std::uint64_t version) {
    if (u64() != magic) throw IoError("bad magic in " + path_.string());
    const auto v = u64();
    if (v != version) {
      throw IoError("unsupported version " + std::to_string(v) + " in " +
                    path_.string());
    }
  }

  void expect_eof() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw IoError("trailing bytes in " + path_.string());
    }
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

/// Packs up to eight ASCII characters into a little-endian magic word.
constexpr std::uint64_t magic_word(const char (&tag)[9]) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(tag[i])) << (8 * i);
  }
  return v;
}

}  // namespace texeval
