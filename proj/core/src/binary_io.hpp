#pragma once

// Little-endian primitive readers/writers shared by the SDF1 and EDTM formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "eegdt/errors.hpp"

namespace eegdt::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& is, const std::string& what) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw TruncatedError("truncated payload while reading " + what);
  }
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

void read_exact(std::istream& is, char* dst, size_t n, const std::string& what);

}  // namespace eegdt::detail
