#pragma once

// Little-endian primitives shared by the CPCD / CGRD / CCBK file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "colc/error.hpp"

namespace colc::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_pod(std::istream& in, std::string_view what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw IoError("truncated stream while reading " + std::string(what));
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void write_magic(std::ostream& out, std::string_view magic,
                        std::uint8_t version) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  write_pod<std::uint8_t>(out, version);
}

inline void expect_magic(std::istream& in, std::string_view magic,
                         std::uint8_t version) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) ||
      got != magic) {
    throw IoError("bad magic, expected \"" + std::string(magic) + "\"");
  }
  const auto v = read_pod<std::uint8_t>(in, "version");
  if (v != version) {
    throw IoError(std::string(magic) + ": unsupported version " +
                  std::to_string(v));
  }
}

}  // namespace colc::io
