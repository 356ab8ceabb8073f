#pragma once

// Little-endian scalar I/O shared by the bundle and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace graphnf::io {

template <typename U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  }
}

template <typename T>
void write_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = byteswap_if_big(std::bit_cast<U>(value));
  os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
}

template <typename T>
bool read_le(std::istream& is, T& value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  if (!is.read(reinterpret_cast<char*>(&bits), sizeof(bits))) return false;
  value = std::bit_cast<T>(byteswap_if_big(bits));
  return true;
}

}  // namespace graphnf::io
