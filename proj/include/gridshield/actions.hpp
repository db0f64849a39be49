#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>

namespace gridshield {

using ActionId = std::uint8_t;

/// Shield files store one byte per cell, which caps the action alphabet.
inline constexpr std::size_t kMaxActions = 8;

struct Action {
  ActionId id = 0;
  std::string name;
};

/// Set of action ids as a bitmask; bit i set means action i is in the set.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr explicit ActionSet(std::uint8_t mask) : mask_(mask) {}

  static constexpr ActionSet all(std::size_t count) {
    return ActionSet(static_cast<std::uint8_t>(count >= 8 ? 0xFF : ((1u << count) - 1u)));
  }
  static constexpr ActionSet single(ActionId a) { return ActionSet(static_cast<std::uint8_t>(1u << a)); }

  constexpr std::uint8_t mask() const noexcept { return mask_; }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }
  constexpr bool contains(ActionId a) const noexcept { return a < 8 && ((mask_ >> a) & 1u); }
  constexpr void insert(ActionId a) noexcept { mask_ = static_cast<std::uint8_t>(mask_ | (1u << a)); }
  constexpr void erase(ActionId a) noexcept { mask_ = static_cast<std::uint8_t>(mask_ & ~(1u << a)); }

  /// The i-th member in increasing id order; i must be < size().
  constexpr ActionId nth(std::size_t i) const noexcept {
    std::uint8_t m = mask_;
    for (ActionId a = 0; a < 8; ++a, m >>= 1) {
      if (m & 1u) {
        if (i == 0) return a;
        --i;
      }
    }
    return 0;
  }

  template <class F>
  constexpr void for_each(F&& f) const {
    for (ActionId a = 0; a < 8; ++a)
      if (contains(a)) f(a);
  }

  friend constexpr bool operator==(ActionSet a, ActionSet b) noexcept { return a.mask_ == b.mask_; }

 private:
  std::uint8_t mask_ = 0;
};

}  // namespace gridshield
