#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <string>
#include <string_view>

#include "cfhf/errors.hpp"

namespace cfhf {

// A value in (1/2)Z, stored as twice its value so arithmetic stays exact.
class HalfInt {
 public:
  constexpr HalfInt() = default;
  constexpr HalfInt(int value) : twice_(2 * value) {}

  static constexpr HalfInt from_twice(int twice) {
    HalfInt h;
    h.twice_ = twice;
    return h;
  }

  // Accepts only values that are integer or half-integer to within 1e-9.
  static HalfInt from_double(double value) {
    const double t = 2.0 * value;
    const double r = std::round(t);
    if (!std::isfinite(value) || std::abs(t - r) > 1e-9) {
      throw InvalidArgument("not a half-integer: " + std::to_string(value));
    }
    return from_twice(static_cast<int>(r));
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }

  constexpr HalfInt operator-() const { return from_twice(-twice_); }
  constexpr HalfInt operator+(HalfInt o) const { return from_twice(twice_ + o.twice_); }
  constexpr HalfInt operator-(HalfInt o) const { return from_twice(twice_ - o.twice_); }

  constexpr auto operator<=>(const HalfInt&) const = default;

  // "7/2", "-3/2", "4" or "0".
  std::string str() const {
    if (is_integer()) return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
  }

 private:
  int twice_ = 0;
};

// Parses "-7/2", "3/2", "4", "-3.5". Denominators other than 1 and 2 are
// rejected.
inline HalfInt parse_half_int(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
      s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.empty()) throw InvalidArgument("empty half-integer");
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);

  const auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    const auto num_s = trim(text.substr(0, slash));
    const auto den_s = trim(text.substr(slash + 1));
    int num = 0;
    int den = 0;
    auto r1 = std::from_chars(num_s.data(), num_s.data() + num_s.size(), num);
    auto r2 = std::from_chars(den_s.data(), den_s.data() + den_s.size(), den);
    if (r1.ec != std::errc{} || r1.ptr != num_s.data() + num_s.size() ||
        r2.ec != std::errc{} || r2.ptr != den_s.data() + den_s.size()) {
      throw InvalidArgument("malformed rational: '" + std::string(text) + "'");
    }
    if (den == 1) return HalfInt(num);
    if (den == 2) return HalfInt::from_twice(num);
    throw InvalidArgument("denominator must be 1 or 2: '" + std::string(text) + "'");
  }

  // std::from_chars for double is missing in older libstdc++, so use stod.
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(std::string(text), &used);
  } catch (const std::exception&) {
    throw InvalidArgument("malformed number: '" + std::string(text) + "'");
  }
  if (used != text.size()) throw InvalidArgument("malformed number: '" + std::string(text) + "'");
  return HalfInt::from_double(v);
}

}  // namespace cfhf
