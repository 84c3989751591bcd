#include "binary_io.hpp"

namespace eegdt::detail {

void read_exact(std::istream& is, char* dst, size_t n, const std::string& what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) {
    throw TruncatedError("truncated payload while reading " + what);
  }
}

}  // namespace eegdt::detail
