#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

namespace cqap {

constexpr int kMaxVars = 16;

// A set of query variables as a bitmask over indices 0..15.
class VarSet {
 public:
  constexpr VarSet() = default;
  constexpr explicit VarSet(std::uint32_t bits) : bits_(bits) {}
  VarSet(std::initializer_list<int> vars) {
    for (int v : vars) bits_ |= 1u << v;
  }

  static constexpr VarSet single(int v) { return VarSet(1u << v); }
  static constexpr VarSet full(int n) { return VarSet(n >= 32 ? ~0u : ((1u << n) - 1)); }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const { return std::popcount(bits_); }
  constexpr bool contains(int v) const { return (bits_ >> v) & 1u; }

  constexpr bool subset_of(VarSet o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr bool proper_subset_of(VarSet o) const { return subset_of(o) && bits_ != o.bits_; }
  constexpr bool intersects(VarSet o) const { return (bits_ & o.bits_) != 0; }

  constexpr VarSet operator|(VarSet o) const { return VarSet(bits_ | o.bits_); }
  constexpr VarSet operator&(VarSet o) const { return VarSet(bits_ & o.bits_); }
  constexpr VarSet operator-(VarSet o) const { return VarSet(bits_ & ~o.bits_); }
  VarSet& operator|=(VarSet o) { bits_ |= o.bits_; return *this; }
  VarSet& operator&=(VarSet o) { bits_ &= o.bits_; return *this; }

  constexpr bool operator==(const VarSet& o) const = default;
  constexpr auto operator<=>(const VarSet& o) const = default;

  // Members in ascending index order.
  std::vector<int> members() const {
    std::vector<int> out;
    for (std::uint32_t b = bits_; b; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  // Position of variable v among the members (v must be a member).
  int rank_of(int v) const { return std::popcount(bits_ & ((1u << v) - 1)); }

 private:
  std::uint32_t bits_ = 0;
};

// Orders by size first, then by the sorted member list.
bool varset_less(VarSet a, VarSet b);

// Calls f on every subset of s, including the empty set and s itself.
template <class F>
void for_each_subset(VarSet s, F&& f) {
  std::uint32_t m = s.bits();
  std::uint32_t sub = m;
  while (true) {
    f(VarSet(sub));
    if (sub == 0) break;
    sub = (sub - 1) & m;
  }
}

}  // namespace cqap

template <>
struct std::hash<cqap::VarSet> {
  std::size_t operator()(cqap::VarSet s) const noexcept { return std::hash<std::uint32_t>()(s.bits()); }
};
