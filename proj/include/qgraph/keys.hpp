#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qgraph {

// Thrown for NaN / non-finite inputs and malformed encodings.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bit-exact identity of a real vector: the little-endian IEEE-754 pattern of
// every component, with -0.0 folded onto +0.0. No rounding or binning, so two
// vectors share a key exactly when they are componentwise identical.
template <class Tag>
class VectorKey {
 public:
  VectorKey() = default;

  static VectorKey from(std::span<const double> values);
  static VectorKey from_hex(std::string_view hex);

  const std::string& bytes() const { return bytes_; }
  std::size_t dimension() const { return bytes_.size() / sizeof(double); }
  bool empty() const { return bytes_.empty(); }

  std::string hex() const;
  std::vector<double> decode() const;

  friend bool operator==(const VectorKey&, const VectorKey&) = default;
  friend auto operator<=>(const VectorKey&, const VectorKey&) = default;

 private:
  explicit VectorKey(std::string bytes) : bytes_(std::move(bytes)) {}
  std::string bytes_;
};

struct StateTag {};
struct ActionTag {};

using StateKey = VectorKey<StateTag>;
using ActionKey = VectorKey<ActionTag>;

inline StateKey state_key(std::span<const double> v) {
  return StateKey::from(v);
}
inline ActionKey action_key(std::span<const double> v) {
  return ActionKey::from(v);
}

extern template class VectorKey<StateTag>;
extern template class VectorKey<ActionTag>;

}  // namespace qgraph

template <class Tag>
struct std::hash<qgraph::VectorKey<Tag>> {
  std::size_t operator()(const qgraph::VectorKey<Tag>& k) const noexcept {
    return std::hash<std::string>{}(k.bytes());
  }
};
