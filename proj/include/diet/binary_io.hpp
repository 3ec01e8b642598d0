#pragma once

// Little-endian primitives shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diet/error.hpp"

namespace diet::io {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_f64s(std::ostream& out, std::span<const double> vs) {
  for (double v : vs) put_f64(out, v);
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void put_string(std::ostream& out, std::string_view s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n,
                       const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
}

inline std::uint64_t get_u64(std::istream& in, const char* what = "u64") {
  unsigned char buf[8];
  read_exact(in, reinterpret_cast<char*>(buf), 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& in, const char* what = "u32") {
  unsigned char buf[4];
  read_exact(in, reinterpret_cast<char*>(buf), 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline double get_f64(std::istream& in, const char* what = "f64") {
  return std::bit_cast<double>(get_u64(in, what));
}

inline void get_f64s(std::istream& in, std::span<double> dst,
                     const char* what = "f64 array") {
  for (double& v : dst) v = get_f64(in, what);
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<std::size_t>(in.gcount()) != magic.size() || got != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

inline std::string get_string(std::istream& in, std::uint64_t max_len,
                              const char* what = "string") {
  const std::uint64_t n = get_u64(in, what);
  if (n > max_len) throw FormatError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  read_exact(in, s.data(), n, what);
  return s;
}

// Guards against allocating absurd sizes from a corrupt header.
inline std::uint64_t get_count(std::istream& in, std::uint64_t max,
                               const char* what) {
  const std::uint64_t n = get_u64(in, what);
  if (n > max) throw FormatError(std::string("implausible ") + what);
  return n;
}

}  // namespace diet::io
