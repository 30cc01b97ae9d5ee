// Small exact rational arithmetic on 128-bit integers, used for
// approximation-factor bookkeeping (summation-tree labels, cover checks).
// Magnitudes are bounded by construction; overflow faults rather than wraps.

#pragma once

#include <cstdint>
#include <string>

#include "kernel.hpp"

namespace pramql {

// Public parameter type for lambda / epsilon style constants.
struct Ratio {
  i64 num = 0;
  i64 den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool positive() const { return num > 0 && den > 0; }
};

inline Ratio ratio(i64 num, i64 den) { return Ratio{num, den}; }

namespace detail {

using int128 = __int128;

inline int128 gcd128(int128 a, int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline void check_mul_overflow(int128 a, int128 b) {
  if (a == 0 || b == 0) return;
  int128 p = a * b;
  if (p / b != a)
    throw fault(fault_kind::overflow, "rational arithmetic overflow");
}

}  // namespace detail

struct Rat {
  detail::int128 num = 0;
  detail::int128 den = 1;

  Rat() = default;
  Rat(detail::int128 n, detail::int128 d) : num(n), den(d) { normalize(); }
  static Rat of(u64 n) { return Rat(static_cast<detail::int128>(n), 1); }
  static Rat of(const Ratio& r) { return Rat(r.num, r.den); }

  void normalize() {
    if (den == 0) throw fault(fault_kind::parameter, "rational with zero denominator");
    if (den < 0) {
      den = -den;
      num = -num;
    }
    detail::int128 g = detail::gcd128(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  Rat operator+(const Rat& o) const {
    detail::check_mul_overflow(num, o.den);
    detail::check_mul_overflow(o.num, den);
    detail::check_mul_overflow(den, o.den);
    return Rat(num * o.den + o.num * den, den * o.den);
  }
  Rat operator-(const Rat& o) const {
    detail::check_mul_overflow(num, o.den);
    detail::check_mul_overflow(o.num, den);
    detail::check_mul_overflow(den, o.den);
    return Rat(num * o.den - o.num * den, den * o.den);
  }
  Rat operator*(const Rat& o) const {
    detail::check_mul_overflow(num, o.num);
    detail::check_mul_overflow(den, o.den);
    return Rat(num * o.num, den * o.den);
  }

  int compare(const Rat& o) const {
    detail::check_mul_overflow(num, o.den);
    detail::check_mul_overflow(o.num, den);
    detail::int128 lhs = num * o.den;
    detail::int128 rhs = o.num * den;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
  }
  bool operator<(const Rat& o) const { return compare(o) < 0; }
  bool operator<=(const Rat& o) const { return compare(o) <= 0; }
  bool operator>=(const Rat& o) const { return compare(o) >= 0; }
  bool operator==(const Rat& o) const { return compare(o) == 0; }

  u64 floor_u64() const {
    if (num < 0) throw fault(fault_kind::parameter, "floor of negative rational");
    return static_cast<u64>(num / den);
  }
  u64 ceil_u64() const {
    if (num < 0) throw fault(fault_kind::parameter, "ceil of negative rational");
    detail::int128 q = num / den;
    if (q * den != num) ++q;
    return static_cast<u64>(q);
  }

  // (1 + r)^h as an exact rational.
  static Rat one_plus_pow(const Ratio& r, u64 h) {
    Rat base(r.num + r.den, r.den);
    Rat acc(1, 1);
    for (u64 i = 0; i < h; ++i) acc = acc * base;
    return acc;
  }
};

}  // namespace pramql
