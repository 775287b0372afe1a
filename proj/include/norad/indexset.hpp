#pragma once
#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "norad/rational.hpp"

namespace norad {

// Exponent bookkeeping for polyhomogeneous expansions.  An index set is a
// subset of R x N closed under (z,k) -> (z,k-1) and (z,k) -> (z+1,k), with
// finite truncations {z < b}.  We store only generators; the closure of a
// single generator (z,k) is the "overline" block {(z+n, l) : n >= 0, l <= k},
// so every set handled here is a finite union of such blocks.
class IndexSet {
 public:
  struct Element {
    Rational z;
    std::int64_t k = 0;
    friend bool operator==(const Element&, const Element&) = default;
    friend bool operator<(const Element& a, const Element& b) {
      if (a.z != b.z) return a.z < b.z;
      return a.k < b.k;
    }
  };

  /// Truncation bound used for equality tests and enumeration; only orders
  /// below this are ever inspected by the construction.
  static constexpr std::int64_t kDefaultBound = 12;

  IndexSet() = default;
  explicit IndexSet(std::vector<Element> generators) : gens_(std::move(generators)) {
    reduce();
  }

  /// The block overline(z,k) = closure of the single generator (z,k).
  static IndexSet block(Rational z, std::int64_t k) {
    return IndexSet({Element{z, k}});
  }

  bool empty() const { return gens_.empty(); }
  const std::vector<Element>& generators() const { return gens_; }

  /// True if (z,k) lies in the closure.
  bool contains(Rational z, std::int64_t k) const {
    for (const auto& g : gens_)
      if (g.z <= z && k <= g.k && integral_gap(g.z, z)) return true;
    return false;
  }

  /// All elements with z < bound, sorted.
  std::vector<Element> truncation(std::int64_t bound = kDefaultBound) const {
    std::set<Element> out;
    for (const auto& g : gens_) {
      for (Rational z = g.z; z < Rational(bound); z = z + Rational(1))
        for (std::int64_t l = 0; l <= g.k; ++l) out.insert({z, l});
    }
    return {out.begin(), out.end()};
  }

  /// Smallest element in the order (z,k) <= (z',k') iff z<z' or (z=z', k>=k').
  Element min_element() const {
    if (gens_.empty())
      throw std::domain_error("IndexSet::min_element: empty set has no leading order");
    Element best = gens_.front();
    for (const auto& g : gens_) {
      if (g.z < best.z || (g.z == best.z && g.k > best.k)) best = g;
    }
    return best;
  }

  /// Union (generators concatenated, then reduced).
  friend IndexSet operator|(const IndexSet& a, const IndexSet& b) {
    std::vector<Element> g = a.gens_;
    g.insert(g.end(), b.gens_.begin(), b.gens_.end());
    return IndexSet(std::move(g));
  }

  /// Extended union E1 unionbar E2: the plain union plus a log bump (z,k1+k2+1)
  /// wherever both sets reach a common exponent z below the bound.
  static IndexSet extended_union(const IndexSet& a, const IndexSet& b,
                                 std::int64_t bound = kDefaultBound) {
    std::vector<Element> g = a.gens_;
    g.insert(g.end(), b.gens_.begin(), b.gens_.end());
    std::map<Rational, std::int64_t> amax, bmax;
    for (const auto& e : a.truncation(bound))
      amax[e.z] = std::max(amax.count(e.z) ? amax[e.z] : 0, e.k);
    for (const auto& e : b.truncation(bound))
      bmax[e.z] = std::max(bmax.count(e.z) ? bmax[e.z] : 0, e.k);
    for (const auto& [z, ka] : amax) {
      auto it = bmax.find(z);
      if (it != bmax.end()) g.push_back({z, ka + it->second + 1});
    }
    return IndexSet(std::move(g));
  }

  /// Minkowski sum in z, additive in k.  Exact on generators: the closure of a
  /// sum of blocks is the sum of the closures.
  friend IndexSet operator+(const IndexSet& a, const IndexSet& b) {
    std::vector<Element> g;
    for (const auto& x : a.gens_)
      for (const auto& y : b.gens_) g.push_back({x.z + y.z, x.k + y.k});
    return IndexSet(std::move(g));
  }

  /// (z,k) -> (z - z0, k - k0); generators falling below k0 contribute nothing
  /// (their whole descendant cone sits below k0 as well).
  IndexSet shift(Rational z0, std::int64_t k0) const {
    std::vector<Element> g;
    for (const auto& e : gens_)
      if (e.k >= k0) g.push_back({e.z - z0, e.k - k0});
    return IndexSet(std::move(g));
  }

  /// Equality of truncations below the bound.
  static bool equal(const IndexSet& a, const IndexSet& b,
                    std::int64_t bound = kDefaultBound) {
    return a.truncation(bound) == b.truncation(bound);
  }

  /// Sorted [z_num, z_den, k] triples of the reduced generator list.
  std::vector<std::array<std::int64_t, 3>> serialized() const {
    std::vector<std::array<std::int64_t, 3>> out;
    for (const auto& g : gens_) out.push_back({g.z.num, g.z.den, g.k});
    std::sort(out.begin(), out.end());
    return out;
  }

  friend std::ostream& operator<<(std::ostream& os, const IndexSet& s) {
    os << '{';
    for (std::size_t i = 0; i < s.gens_.size(); ++i) {
      if (i) os << ", ";
      os << "ov(" << s.gens_[i].z << ',' << s.gens_[i].k << ')';
    }
    return os << '}';
  }

 private:
  static bool integral_gap(Rational lo, Rational hi) {
    Rational d = hi - lo;
    return d.den == 1 && d.num >= 0;
  }

  // Drop generators whose block is contained in another generator's block.
  void reduce() {
    std::sort(gens_.begin(), gens_.end());
    gens_.erase(std::unique(gens_.begin(), gens_.end()), gens_.end());
    std::vector<Element> keep;
    for (std::size_t i = 0; i < gens_.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < gens_.size() && !dominated; ++j) {
        if (j == i) continue;
        const auto& h = gens_[j];
        const auto& g = gens_[i];
        dominated = h.z <= g.z && h.k >= g.k && integral_gap(h.z, g.z);
      }
      if (!dominated) keep.push_back(gens_[i]);
    }
    gens_ = std::move(keep);
  }

  std::vector<Element> gens_;
};

}  // namespace norad
