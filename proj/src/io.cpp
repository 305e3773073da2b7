// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include "pairforge/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace pairforge {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void ByteWriter::put_u32(std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void ByteWriter::put_f32(float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void ByteWriter::put_f32s(const float* data, std::size_t n) {
  buf_.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

void ByteWriter::put_string(std::string_view s) {
  put_u32(static_cast<std::uint32_t>(s.size()));
  put_bytes(s);
}

std::string_view ByteReader::take(std::size_t n, const char* what) {
  if (n > remaining()) {
    throw ParseError(std::string("truncated input while reading ") + what, pos_);
  }
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8(const char* what) {
  return static_cast<std::uint8_t>(take(1, what)[0]);
}

std::uint32_t ByteReader::u32(const char* what) {
  std::uint32_t v;
  std::memcpy(&v, take(4, what).data(), 4);
  return v;
}

float ByteReader::f32(const char* what) {
  float v;
  std::memcpy(&v, take(4, what).data(), 4);
  return v;
}

void ByteReader::f32s(float* out, std::size_t n, const char* what) {
  if (n > remaining() / sizeof(float)) {
    throw ParseError(std::string("truncated input while reading ") + what, pos_);
  }
  std::memcpy(out, take(n * sizeof(float), what).data(), n * sizeof(float));
}

std::string ByteReader::string(const char* what) {
  const std::uint32_t n = u32(what);
  return std::string(take(n, what));
}

void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  if (remaining() < magic.size() || data_.substr(pos_, magic.size()) != magic) {
    throw ParseError("bad magic, expected \"" + std::string(magic) + "\"", at);
  }
  pos_ += magic.size();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace pairforge
