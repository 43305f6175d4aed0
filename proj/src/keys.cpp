#include "qgraph/keys.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

namespace qgraph {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

template <class Tag>
VectorKey<Tag> VectorKey<Tag>::from(std::span<const double> values) {
  std::string bytes;
  bytes.reserve(values.size() * sizeof(double));
  for (double x : values) {
    if (!std::isfinite(x)) {
      throw InvalidInput("vector key: component is not finite");
    }
    if (x == 0.0) x = 0.0;  // folds -0.0
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      bytes.push_back(static_cast<char>(bits & 0xffu));
      bits >>= 8;
    }
  }
  return VectorKey(std::move(bytes));
}

template <class Tag>
VectorKey<Tag> VectorKey<Tag>::from_hex(std::string_view hex) {
  if (hex.size() % 16 != 0) {
    throw InvalidInput("vector key: hex length must be a multiple of 16");
  }
  std::string bytes;
  bytes.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_value(hex[i]);
    const int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) throw InvalidInput("vector key: bad hex digit");
    bytes.push_back(static_cast<char>((hi << 4) | lo));
  }
  VectorKey key(std::move(bytes));
  // Round-trip through from() so non-finite payloads are rejected and -0.0
  // is canonicalized.
  const auto values = key.decode();
  return from(values);
}

template <class Tag>
std::string VectorKey<Tag>::hex() const {
  std::string out;
  out.reserve(bytes_.size() * 2);
  for (char c : bytes_) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(kHexDigits[u >> 4]);
    out.push_back(kHexDigits[u & 0xfu]);
  }
  return out;
}

template <class Tag>
std::vector<double> VectorKey<Tag>::decode() const {
  std::vector<double> out(dimension());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      bits = (bits << 8) |
             static_cast<unsigned char>(bytes_[i * sizeof(double) + b]);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

template class VectorKey<StateTag>;
template class VectorKey<ActionTag>;

}  // namespace qgraph
