#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "norad/indexset.hpp"

using norad::IndexSet;
using norad::Rational;

namespace {

IndexSet ov(std::int64_t z, std::int64_t k) { return IndexSet::block(Rational(z), k); }

IndexSet random_set(std::mt19937& rng) {
  std::uniform_int_distribution<int> nz(0, 3), zs(-2, 4), ks(0, 3);
  std::vector<IndexSet::Element> gens;
  const int n = nz(rng);
  for (int i = 0; i < n; ++i) gens.push_back({Rational(zs(rng)), ks(rng)});
  return IndexSet(std::move(gens));
}

}  // namespace

TEST_CASE("extended union") {
  CHECK(IndexSet::equal(IndexSet::extended_union(ov(0, 0), ov(0, 0)), ov(0, 1)));
  IndexSet e = ov(1, 2) | ov(-1, 0);
  CHECK(IndexSet::equal(IndexSet::extended_union(e, IndexSet{}), e));
  CHECK(IndexSet::equal(IndexSet::extended_union(IndexSet{}, e), e));
  // Disjoint z below closure overlap: no log bump at z=1, but one at z=2.
  IndexSet u = IndexSet::extended_union(ov(1, 0), ov(2, 0));
  CHECK(u.contains(Rational(1), 0));
  CHECK_FALSE(u.contains(Rational(1), 1));
  CHECK(u.contains(Rational(2), 1));
}

TEST_CASE("sum") {
  CHECK(IndexSet::equal(ov(1, 0) + ov(1, 0), ov(2, 0)));
  CHECK(IndexSet::equal(ov(1, 1) + ov(2, 0), ov(3, 1)));
  IndexSet e = ov(0, 2) | ov(2, 3);
  CHECK(IndexSet::equal(e + ov(0, 0), e));
}

TEST_CASE("shift") {
  CHECK(IndexSet::equal(ov(2, 0).shift(Rational(1), 0), ov(1, 0)));
  CHECK(IndexSet::equal(ov(1, 1).shift(Rational(0), 1), ov(1, 0)));
  CHECK(IndexSet{}.shift(Rational(3), 2).empty());
}

TEST_CASE("min element") {
  auto m = ov(2, 1).min_element();
  CHECK(m.z == Rational(2));
  CHECK(m.k == 1);
  m = (ov(1, 0) | ov(1, 2)).min_element();
  CHECK(m.z == Rational(1));
  CHECK(m.k == 2);
  CHECK_THROWS_AS(IndexSet{}.min_element(), std::domain_error);
}

TEST_CASE("closure invariants on random sets") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    IndexSet e = random_set(rng);
    auto tr = e.truncation(6);
    for (const auto& el : tr) {
      if (el.k >= 1) CHECK(e.contains(el.z, el.k - 1));
      if (el.z + Rational(1) < Rational(6)) CHECK(e.contains(el.z + Rational(1), el.k));
    }
  }
}

TEST_CASE("algebraic laws on random sets") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    IndexSet a = random_set(rng), b = random_set(rng), c = random_set(rng);
    CHECK(IndexSet::equal(IndexSet::extended_union(a, b),
                          IndexSet::extended_union(b, a), 6));
    CHECK(IndexSet::equal(a + b, b + a, 6));
    CHECK(IndexSet::equal((a + b) + c, a + (b + c), 6));
    if (!a.empty() && !b.empty()) {
      auto ma = a.min_element(), mb = b.min_element(), ms = (a + b).min_element();
      CHECK(ms.z == ma.z + mb.z);
    }
  }
}

TEST_CASE("extended union associativity on closed truncations") {
  // Associativity holds for the low-order truncation as long as the bound used
  // while forming the bumps dominates the comparison bound.
  std::mt19937 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    IndexSet a = random_set(rng), b = random_set(rng), c = random_set(rng);
    auto ab_c = IndexSet::extended_union(IndexSet::extended_union(a, b, 12), c, 12);
    auto a_bc = IndexSet::extended_union(a, IndexSet::extended_union(b, c, 12), 12);
    CHECK(IndexSet::equal(ab_c, a_bc, 6));
  }
}

TEST_CASE("serialization is sorted and exact") {
  IndexSet e = ov(2, 1) | IndexSet({{Rational(1, 2), 0}});
  auto s = e.serialized();
  REQUIRE(s.size() == 2);
  CHECK(s[0] == std::array<std::int64_t, 3>{1, 2, 0});
  CHECK(s[1] == std::array<std::int64_t, 3>{2, 1, 1});
}
