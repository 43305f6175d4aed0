#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <unordered_set>
#include <vector>

#include "qgraph/keys.hpp"

using namespace qgraph;

TEST(Keys, EqualVectorsShareKey) {
  const std::vector<double> a = {0.1, -2.5, 3.0};
  EXPECT_EQ(state_key(a), state_key(std::vector<double>{0.1, -2.5, 3.0}));
  EXPECT_EQ(state_key(a).dimension(), 3u);
}

TEST(Keys, NoRoundingOrBinning) {
  const double x = 0.1;
  const std::vector<double> a = {x};
  const std::vector<double> b = {std::nextafter(x, 1.0)};
  EXPECT_NE(state_key(a), state_key(b));
}

TEST(Keys, NegativeZeroFoldsOntoZero) {
  EXPECT_EQ(state_key(std::vector<double>{-0.0, 1.0}), state_key(std::vector<double>{0.0, 1.0}));
}

TEST(Keys, NonFiniteRejected) {
  for (double bad : {std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::infinity()}) {
    EXPECT_THROW(state_key(std::vector<double>{1.0, bad}), InvalidInput);
  }
}

TEST(Keys, HexRoundTrip) {
  const std::vector<double> v = {1.0, -0.03, 1e-300, 12345.678};
  const auto k = action_key(v);
  EXPECT_EQ(k.hex().size(), 64u);
  EXPECT_EQ(ActionKey::from_hex(k.hex()), k);
  EXPECT_EQ(k.decode(), v);
  // 1.0 little-endian.
  EXPECT_EQ(action_key(std::vector<double>{1.0}).hex(), "000000000000f03f");
}

TEST(Keys, MalformedHexRejected) {
  EXPECT_THROW(StateKey::from_hex("abc"), InvalidInput);
  EXPECT_THROW(StateKey::from_hex("zz00000000000000"), InvalidInput);
  // NaN bit pattern.
  EXPECT_THROW(StateKey::from_hex("000000000000f87f"), InvalidInput);
}

TEST(Keys, EmptyVector) {
  const auto k = state_key(std::vector<double>{});
  EXPECT_TRUE(k.empty());
  EXPECT_EQ(k.dimension(), 0u);
  EXPECT_NE(k, state_key(std::vector<double>{0.0}));
}

TEST(Keys, HashableAndOrdered) {
  std::unordered_set<StateKey> set;
  set.insert(state_key(std::vector<double>{1.0}));
  set.insert(state_key(std::vector<double>{1.0}));
  set.insert(state_key(std::vector<double>{2.0}));
  EXPECT_EQ(set.size(), 2u);
  const auto a = state_key(std::vector<double>{1.0});
  const auto b = state_key(std::vector<double>{2.0});
  EXPECT_TRUE((a < b) != (b < a));
}
