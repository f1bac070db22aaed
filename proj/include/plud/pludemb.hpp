#pragma once

// PLUDEMB1 embedding blob:
//   bytes 0..7   ASCII "PLUDEMB1"
//   bytes 8..11  u32 little-endian row count n
//   bytes 12..15 u32 little-endian dimension d
//   then n*d IEEE-754 binary32, little-endian, row-major.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "plud/error.hpp"
#include "plud/types.hpp"

namespace plud {

inline constexpr std::array<char, 8> kEmbeddingMagic = {'P', 'L', 'U', 'D', 'E', 'M', 'B', '1'};

namespace detail {

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
  const auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(byteswap_if_big(v));
  out.write(bytes.data(), sizeof(T));
}

template <class T>
T read_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  return byteswap_if_big(std::bit_cast<T>(bytes));
}

inline std::vector<unsigned char> slurp(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Parses a PLUDEMB1 blob held in memory. Stored bits are kept unchanged.
inline EmbeddingMatrix parse_pludemb(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16) throw FormatError("PLUDEMB1: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size()) != 0) {
    throw FormatError("PLUDEMB1: bad magic '" + std::string(bytes.begin(), bytes.begin() + 8) + "'");
  }
  const auto n = detail::read_le<std::uint32_t>(bytes.data() + 8);
  const auto d = detail::read_le<std::uint32_t>(bytes.data() + 12);
  const std::uint64_t expected = 16 + std::uint64_t{n} * d * 4;
  if (bytes.size() != expected) {
    throw FormatError("PLUDEMB1: shape n=" + std::to_string(n) + " d=" + std::to_string(d) + " needs " +
                      std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<float> values(std::size_t{n} * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = detail::read_le<float>(bytes.data() + 16 + 4 * i);
    if (!std::isfinite(values[i])) {
      throw DataError("PLUDEMB1: non-finite value in row " + std::to_string(i / d));
    }
  }
  return EmbeddingMatrix(n, d, std::move(values));
}

inline EmbeddingMatrix read_pludemb(std::istream& in) { return parse_pludemb(detail::slurp(in)); }

inline void write_pludemb(std::ostream& out, const EmbeddingMatrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("PLUDEMB1: shape exceeds u32");
  }
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  detail::write_le(out, static_cast<std::uint32_t>(m.rows()));
  detail::write_le(out, static_cast<std::uint32_t>(m.cols()));
  for (float v : m.values()) detail::write_le(out, v);
  if (!out) throw EnvironmentError("PLUDEMB1: write failed");
}

}  // namespace plud
