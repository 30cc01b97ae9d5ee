// Fractional edge covers of query hypergraphs and the resulting output
// bounds. Covers are computed exactly: the optimum of the covering LP is
// attained at a vertex of the feasible region, and query hypergraphs are
// tiny, so enumerating vertices with rational Gaussian elimination is both
// simple and exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "query.hpp"
#include "rational.hpp"

namespace pramql {

struct FractionalCover {
  std::vector<Rat> weights;  // one per atom, in atom order
  Rat total;                 // sum of the weights
};

namespace detail {

inline Rat rat_div(const Rat& a, const Rat& b) {
  if (b.num == 0)
    throw fault(fault_kind::parameter, "division by zero rational");
  check_mul_overflow(a.num, b.den);
  check_mul_overflow(a.den, b.num);
  return Rat(a.num * b.den, a.den * b.num);
}

// Solve an m x m rational system in place; returns false if singular.
inline bool solve_rational(std::vector<std::vector<Rat>>& a,
                           std::vector<Rat>& rhs, std::vector<Rat>& out) {
  const size_t n = a.size();
  for (size_t c = 0; c < n; ++c) {
    size_t piv = c;
    while (piv < n && a[piv][c].num == 0) ++piv;
    if (piv == n) return false;
    std::swap(a[piv], a[c]);
    std::swap(rhs[piv], rhs[c]);
    for (size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c].num == 0) continue;
      Rat f = rat_div(a[r][c], a[c][c]);
      for (size_t k = c; k < n; ++k) a[r][k] = a[r][k] - f * a[c][k];
      rhs[r] = rhs[r] - f * rhs[c];
    }
  }
  out.resize(n);
  for (size_t c = 0; c < n; ++c) out[c] = rat_div(rhs[c], a[c][c]);
  return true;
}

}  // namespace detail

// Checks sum_{i : v in atoms[i]} w_i >= 1 for every body variable, w >= 0.
inline bool is_fractional_cover(const Query& q, const std::vector<Rat>& w) {
  if (w.size() != q.atoms.size()) return false;
  const Rat zero(0, 1), one(1, 1);
  for (const auto& wi : w)
    if (wi < zero) return false;
  for (const auto& v : q.all_vars()) {
    Rat sum(0, 1);
    for (size_t i = 0; i < q.atoms.size(); ++i)
      if (q.atoms[i].vars().count(v)) sum = sum + w[i];
    if (sum < one) return false;
  }
  return true;
}

// Minimum fractional edge cover of the query's body hypergraph.
inline FractionalCover fractional_cover(const Query& q) {
  const size_t m = q.atoms.size();
  const std::set<std::string> vset = q.all_vars();
  const std::vector<std::string> vars(vset.begin(), vset.end());

  // Constraint rows: per variable, sum of incident weights >= 1; per atom,
  // the weight itself >= 0. A vertex is m of them, tight and independent.
  std::vector<std::vector<Rat>> rows;
  std::vector<Rat> rhs;
  for (const auto& v : vars) {
    std::vector<Rat> row(m, Rat(0, 1));
    for (size_t i = 0; i < m; ++i)
      if (q.atoms[i].vars().count(v)) row[i] = Rat(1, 1);
    rows.push_back(std::move(row));
    rhs.emplace_back(1, 1);
  }
  for (size_t i = 0; i < m; ++i) {
    std::vector<Rat> row(m, Rat(0, 1));
    row[i] = Rat(1, 1);
    rows.push_back(std::move(row));
    rhs.emplace_back(0, 1);
  }

  const size_t total = rows.size();
  {
    // combination count guard: C(total, m)
    long double combos = 1.0L;
    for (size_t i = 0; i < m; ++i)
      combos = combos * static_cast<long double>(total - i) /
               static_cast<long double>(i + 1);
    if (combos > 2e6L)
      throw fault(fault_kind::parameter,
                  "query too large for exact fractional cover computation");
  }

  FractionalCover best;
  bool found = false;
  std::vector<size_t> pick(m);
  for (size_t i = 0; i < m; ++i) pick[i] = i;
  while (true) {
    std::vector<std::vector<Rat>> a;
    std::vector<Rat> b;
    for (size_t i : pick) {
      a.push_back(rows[i]);
      b.push_back(rhs[i]);
    }
    std::vector<Rat> w;
    if (detail::solve_rational(a, b, w) && is_fractional_cover(q, w)) {
      Rat sum(0, 1);
      for (const auto& wi : w) sum = sum + wi;
      if (!found || sum < best.total) {
        best.weights = w;
        best.total = sum;
        found = true;
      }
    }
    // next m-combination of {0..total-1}
    size_t i = m;
    while (i > 0 && pick[i - 1] == total - m + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (size_t j = i; j < m; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (!found)
    throw fault(fault_kind::parameter, "covering LP has no vertex optimum");
  return best;
}

namespace detail {

inline u64 isqrt_u128(unsigned __int128 x) {
  if (x == 0) return 0;
  u64 r = static_cast<u64>(std::sqrt(static_cast<long double>(x)));
  // settle the floating point estimate exactly
  while (static_cast<unsigned __int128>(r) * r > x) --r;
  while (static_cast<unsigned __int128>(r + 1) * (r + 1) <= x) ++r;
  return r;
}

// ceil of prod sizes[i]^{w_i}. Integer and half-integer exponents are
// evaluated exactly (the half-integer case via an exact integer square
// root); other exponents fall back to long double logarithms with a tiny
// upward guard.
inline u64 agm_value(const std::vector<u64>& sizes,
                     const std::vector<Rat>& weights) {
  int128 lcm = 1;
  for (const auto& w : weights) {
    int128 g = gcd128(lcm, w.den);
    check_mul_overflow(lcm / g, w.den);
    lcm = lcm / g * w.den;
  }
  for (size_t i = 0; i < sizes.size(); ++i)
    if (sizes[i] == 0 && weights[i].num > 0) return 0;
  if (lcm == 1 || lcm == 2) {
    unsigned __int128 prod = 1;
    bool fits = true;
    for (size_t i = 0; i < sizes.size() && fits; ++i) {
      if (sizes[i] == 0) continue;
      u64 e = static_cast<u64>(weights[i].num * (lcm / weights[i].den));
      for (u64 t = 0; t < e && fits; ++t) {
        unsigned __int128 next = prod * sizes[i];
        if (sizes[i] != 0 && next / sizes[i] != prod) fits = false;
        else prod = next;
      }
    }
    if (fits) {
      if (lcm == 1) {
        if (prod > std::numeric_limits<u64>::max())
          throw fault(fault_kind::overflow, "agm_bound exceeds a machine word");
        return static_cast<u64>(prod);
      }
      const u64 r = isqrt_u128(prod);
      const unsigned __int128 rr = static_cast<unsigned __int128>(r) * r;
      return rr == prod ? r : r + 1;
    }
  }
  long double lg = 0.0L;
  for (size_t i = 0; i < sizes.size(); ++i) {
    if (weights[i].num == 0 || sizes[i] == 0) continue;
    lg += static_cast<long double>(weights[i].num) /
          static_cast<long double>(weights[i].den) *
          std::log(static_cast<long double>(sizes[i]));
  }
  const long double val = std::exp(lg) * (1.0L + 1e-12L);
  if (val > static_cast<long double>(std::numeric_limits<u64>::max()))
    throw fault(fault_kind::overflow, "agm_bound exceeds a machine word");
  return static_cast<u64>(std::ceil(val));
}

}  // namespace detail

// AGM bound: ceil of prod |R_i|^{w_i} for a minimum fractional cover.
inline u64 agm_bound(const Query& q, const std::vector<u64>& sizes) {
  if (sizes.size() != q.atoms.size())
    throw fault(fault_kind::parameter, "agm_bound: one size per atom required");
  return detail::agm_value(sizes, fractional_cover(q).weights);
}

// The same bound under a caller-supplied cover, verified exactly first.
inline u64 agm_bound(const Query& q, const std::vector<u64>& sizes,
                     const std::vector<Rat>& cover) {
  if (sizes.size() != q.atoms.size())
    throw fault(fault_kind::parameter, "agm_bound: one size per atom required");
  if (!is_fractional_cover(q, cover))
    throw fault(fault_kind::parameter,
                "agm_bound: not a fractional edge cover of the query");
  return detail::agm_value(sizes, cover);
}

}  // namespace pramql
