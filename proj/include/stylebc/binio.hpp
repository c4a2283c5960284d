#pragma once

// Little-endian primitive readers/writers shared by the checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "stylebc/error.hpp"

namespace stylebc::binio {

template <typename U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename U>
U read_le(std::istream& is, const char* what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

inline void write_f64(std::ostream& os, double v) { write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }

inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  if (!is.read(got, 4)) throw FormatError("truncated file: missing magic");
  if (std::memcmp(got, magic, 4) != 0) throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace stylebc::binio
