// Constant-depth array primitives over the PRAM kernel: consistent
// approximate prefix sums (with summation trees), order-preserving
// compaction, padded sorting, predecessor/successor links, task scheduling.
//
// Depth discipline: every primitive executes a number of rounds computed
// only from the accuracy parameters (lambda, epsilon, value-range exponent),
// never from the input length. Loops that could terminate early for small
// inputs still run their full constant round budget with degenerate rounds,
// so the depth counter is identical for n and 16n.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "rational.hpp"

namespace pramql {

// A strided view of cells in one shared array. Cell i occupies words
// [i*stride, (i+1)*stride); the word at offset `flag` is the inhabited flag.
struct CellView {
  ArrayHandle h;
  u64 count = 0;
  u64 stride = 1;
  u64 flag = 0;
  u64 word_of(u64 cell, u64 offset) const { return cell * stride + offset; }
};

namespace detail {

inline void check_accuracy(const Ratio& lambda, const Ratio& eps) {
  if (!lambda.positive())
    throw fault(fault_kind::parameter, "lambda must be a positive rational");
  if (!eps.positive())
    throw fault(fault_kind::parameter, "epsilon must be a positive rational");
}

// ceil(n^x) for n >= 1, as u64 (saturating well below overflow for our uses).
inline u64 ceil_pow(u64 n, double x) {
  if (n <= 1) return n;
  long double v = std::pow(static_cast<long double>(n), static_cast<long double>(x));
  long double c = std::ceil(v - 1e-9L);
  if (c < 1) c = 1;
  return static_cast<u64>(c);
}

inline u64 checked_add(u64 a, u64 b) {
  if (a > std::numeric_limits<u64>::max() - b)
    throw fault(fault_kind::overflow, "word overflow in prefix sum");
  return a + b;
}

// n^c in unsigned 128-bit, saturating at max.
inline unsigned __int128 sat_pow_u128(u64 n, u64 c) {
  unsigned __int128 r = 1;
  const unsigned __int128 lim = ~static_cast<unsigned __int128>(0);
  for (u64 i = 0; i < c; ++i) {
    if (n != 0 && r > lim / n) return lim;
    r *= n;
  }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Consistent approximate prefix sums (recursive block scheme, iteratively).
//
// The array is cut into blocks of size b = ceil(n^delta) (delta = eps/3,
// frozen at the top-level n across all levels); per-block prefix sums are
// exact macro sums, block totals recurse for ceil(1/delta) levels, offsets
// propagate back down. The exact base makes the output the exact prefix
// sums, which satisfy both lambda-consistency conditions with room to spare.
// ---------------------------------------------------------------------------
inline ArrayHandle approx_prefix_sums(Machine& m, ArrayHandle A,
                                      const Ratio& lambda, const Ratio& eps) {
  detail::check_accuracy(lambda, eps);
  const u64 n = m.size(A);
  const double delta = eps.value() / 3.0;
  const u64 levels = static_cast<u64>(std::ceil(1.0 / delta - 1e-9));
  if (n == 0) {
    // Same round budget as the generic path, with zero processors.
    for (u64 r = 0; r < 3 * levels + 1; ++r) m.step(0, [](Step&, u64) {});
    return m.allocate(0);
  }
  const u64 b = std::max<u64>(2, detail::ceil_pow(n, delta));
  if (b > m.config().macro_width)
    throw fault(fault_kind::parameter,
                "prefix sums: block size " + std::to_string(b) +
                    " exceeds macro width " +
                    std::to_string(m.config().macro_width));

  // Upward sweep: per-block exact prefix sums, then block totals.
  std::vector<u64> sizes{n};
  std::vector<ArrayHandle> values{A};  // values[l], length sizes[l]
  std::vector<ArrayHandle> blockpref;  // blockpref[l], per-block prefixes
  for (u64 l = 0; l < levels; ++l) {
    const u64 nl = sizes[l];
    ArrayHandle vals = values[l];
    ArrayHandle pref = m.allocate(nl);
    m.step(nl, [&](Step& s, u64 p) {
      const u64 g = p - 1;
      const u64 start = (g / b) * b;
      const u64 j = g - start + 1;  // operand count of this exact macro sum
      u64 sum = 0;
      for (u64 t = start; t <= g; ++t)
        sum = detail::checked_add(sum, s.read(vals, t));
      s.charge(j * j);
      s.write(pref, g, sum);
    });
    blockpref.push_back(pref);
    const u64 nn = (nl + b - 1) / b;
    ArrayHandle totals = m.allocate(nn);
    m.step(nn, [&](Step& s, u64 p) {
      const u64 k = p - 1;
      const u64 last = std::min(k * b + b - 1, nl - 1);
      s.write(totals, k, s.read(pref, last));
    });
    values.push_back(totals);
    sizes.push_back(nn);
  }

  // Top: the remaining array is tiny (size <= 3); one exact macro round.
  const u64 nt = sizes[levels];
  if (nt > m.config().macro_width)
    throw fault(fault_kind::parameter, "prefix sums: top level too wide");
  ArrayHandle top = m.allocate(nt);
  {
    ArrayHandle vals = values[levels];
    m.step(nt, [&](Step& s, u64 p) {
      const u64 g = p - 1;
      u64 sum = 0;
      for (u64 t = 0; t <= g; ++t)
        sum = detail::checked_add(sum, s.read(vals, t));
      s.charge((g + 1) * (g + 1));
      s.write(top, g, sum);
    });
  }

  // Downward sweep: add the prefix of earlier block totals to each entry.
  std::vector<ArrayHandle> full(levels + 1);
  full[levels] = top;
  for (u64 l = levels; l-- > 0;) {
    const u64 nl = sizes[l];
    ArrayHandle pref = blockpref[l];
    ArrayHandle above = full[l + 1];
    ArrayHandle out = m.allocate(nl);
    m.step(nl, [&](Step& s, u64 p) {
      const u64 g = p - 1;
      const u64 k = g / b;
      u64 off = k > 0 ? s.read(above, k - 1) : 0;
      s.write(out, g, detail::checked_add(off, s.read(pref, g)));
    });
    full[l] = out;
  }

  // Retire scratch; keep only the level-0 output.
  for (u64 l = 0; l < levels; ++l) {
    m.release(blockpref[l]);
    m.release(values[l + 1]);
    if (l + 1 <= levels && l + 1 != 0) m.release(full[l + 1]);
  }
  return full[0];
}

// ---------------------------------------------------------------------------
// Summation trees. Node labels are exact rationals stored as three words
// per node (num low, num high, den); heap indexing, node 1 is the root,
// leaves are nodes [leaf_count, 2*leaf_count). Padded leaves beyond the
// original length are synthetic and carry 0.
// ---------------------------------------------------------------------------
struct SummationTree {
  u64 leaf_count = 0;  // power of two
  u64 orig_n = 0;
  u64 height = 0;  // log2(leaf_count)
  Ratio lambda_prime;
  ArrayHandle labels;  // 3 words per node, node index * 3
  bool consistent = true;
};

namespace detail {

inline Rat read_label(Step& s, ArrayHandle labels, u64 v) {
  u64 lo = s.read(labels, 3 * v);
  u64 hi = s.read(labels, 3 * v + 1);
  u64 den = s.read(labels, 3 * v + 2);
  unsigned __int128 num =
      (static_cast<unsigned __int128>(hi) << 64) | lo;
  if (num > static_cast<unsigned __int128>(std::numeric_limits<__int128>::max()))
    throw fault(fault_kind::overflow, "summation tree label overflow");
  return Rat(static_cast<__int128>(num), den == 0 ? 1 : den);
}

inline void write_label(Step& s, ArrayHandle labels, u64 v, const Rat& r) {
  if (r.num < 0)
    throw fault(fault_kind::parameter, "negative summation tree label");
  unsigned __int128 num = static_cast<unsigned __int128>(r.num);
  if (r.den > static_cast<__int128>(std::numeric_limits<u64>::max()))
    throw fault(fault_kind::overflow, "summation tree denominator overflow");
  s.write(labels, 3 * v, static_cast<u64>(num & ~u64{0}));
  s.write(labels, 3 * v + 1, static_cast<u64>(num >> 64));
  s.write(labels, 3 * v + 2, static_cast<u64>(r.den));
}

inline u64 heap_depth(u64 v) {
  u64 d = 0;
  while (v > 1) {
    v >>= 1;
    ++d;
  }
  return d;
}

}  // namespace detail

inline SummationTree build_summation_tree(Machine& m, ArrayHandle A,
                                          const Ratio& lambda_prime) {
  if (!lambda_prime.positive())
    throw fault(fault_kind::parameter, "lambda' must be a positive rational");
  const u64 n = m.size(A);
  u64 P = 1, H = 0;
  while (P < std::max<u64>(n, 1)) {
    P <<= 1;
    ++H;
  }
  // Exact scan of the leaves; node labels are range differences of it.
  ArrayHandle scan = approx_prefix_sums(m, A, lambda_prime, ratio(1, 1));
  SummationTree tree;
  tree.leaf_count = P;
  tree.orig_n = n;
  tree.height = H;
  tree.lambda_prime = lambda_prime;
  tree.labels = m.allocate(3 * 2 * P);
  const u64 nodes = 2 * P - 1;
  m.step(nodes, [&](Step& s, u64 p) {
    const u64 v = p;  // heap index 1..2P-1
    const u64 d = detail::heap_depth(v);
    const u64 span = P >> d;              // leaves under v
    const u64 lo = v * span - P;          // first leaf index (0-based)
    const u64 hi = lo + span - 1;
    u64 sum = 0;
    if (n > 0 && lo < n) {
      const u64 h2 = std::min(hi, n - 1);
      const u64 upper = s.read(scan, h2);
      const u64 lower = lo > 0 ? s.read(scan, lo - 1) : 0;
      sum = upper - lower;
    }
    detail::write_label(s, tree.labels, v, Rat::of(sum));
  });
  m.release(scan);
  tree.consistent = true;  // exact labels satisfy consistency with equality
  return tree;
}

// Multiply each node label at height h by (1+lambda')^h. An exact input tree
// stays exact at the leaves and gains exactly the stated inflation per level;
// the standard argument then gives consistency at every inner node.
inline void make_consistent(Machine& m, SummationTree& tree) {
  const u64 nodes = 2 * tree.leaf_count - 1;
  const Ratio lp = tree.lambda_prime;
  const u64 H = tree.height;
  m.step(nodes, [&](Step& s, u64 p) {
    const u64 v = p;
    const u64 h = H - detail::heap_depth(v);
    if (h == 0) return;  // leaves are not scaled
    Rat label = detail::read_label(s, tree.labels, v);
    Rat factor = Rat::one_plus_pow(lp, h);
    s.charge(h);
    detail::write_label(s, tree.labels, v, label * factor);
  });
  tree.consistent = true;
}

// b_i = a_i + sum of labels of left siblings hanging off the leaf-to-root
// path; output floored to naturals (flooring preserves both conditions).
inline ArrayHandle prefix_from_tree(Machine& m, const SummationTree& tree) {
  if (!tree.consistent)
    throw fault(fault_kind::parameter, "prefix_from_tree requires a consistent tree");
  ArrayHandle out = m.allocate(tree.orig_n);
  const u64 P = tree.leaf_count;
  m.step(tree.orig_n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    u64 v = P + i;
    Rat acc = detail::read_label(s, tree.labels, v);  // a_i exactly
    while (v > 1) {
      if (v & 1) acc = acc + detail::read_label(s, tree.labels, v - 1);
      v >>= 1;
    }
    s.charge(tree.height);
    s.write(out, i, acc.floor_u64());
  });
  return out;
}

// Host-side helpers for inspecting trees in tests.
inline Rat tree_label(const Machine& m, const SummationTree& tree, u64 v) {
  u64 lo = m.host_read(tree.labels, 3 * v);
  u64 hi = m.host_read(tree.labels, 3 * v + 1);
  u64 den = m.host_read(tree.labels, 3 * v + 2);
  unsigned __int128 num = (static_cast<unsigned __int128>(hi) << 64) | lo;
  return Rat(static_cast<__int128>(num), den == 0 ? 1 : den);
}

inline bool tree_is_consistent(const Machine& m, const SummationTree& tree) {
  for (u64 v = 1; v < tree.leaf_count; ++v) {
    Rat parent = tree_label(m, tree, v);
    Rat sum = tree_label(m, tree, 2 * v) + tree_label(m, tree, 2 * v + 1);
    if (parent < sum) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Order-preserving approximate compaction.
// ---------------------------------------------------------------------------
struct CompactResult {
  CellView out;
  ArrayHandle fwd;   // input cell -> output cell index + 1 (0 = was empty)
  ArrayHandle back;  // output cell -> input cell index + 1
};

inline CompactResult approx_compact(Machine& m, const CellView& A,
                                    const Ratio& lambda, const Ratio& eps) {
  detail::check_accuracy(lambda, eps);
  const u64 n = A.count;
  ArrayHandle ind = m.allocate(n);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    s.write(ind, i, s.read(A.h, A.word_of(i, A.flag)) ? 1 : 0);
  });
  ArrayHandle pref = approx_prefix_sums(m, ind, lambda, eps);
  const u64 out_len = n > 0 ? m.host_read(pref, n - 1) : 0;
  CompactResult r;
  r.out = CellView{m.allocate(out_len * A.stride), out_len, A.stride, A.flag};
  r.fwd = m.allocate(n);
  r.back = m.allocate(out_len);
  const u64 stride = A.stride;
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.h, A.word_of(i, A.flag))) return;
    const u64 pos = s.read(pref, i) - 1;
    for (u64 f = 0; f < stride; ++f)
      s.write(r.out.h, r.out.word_of(pos, f), s.read(A.h, A.word_of(i, f)));
    s.charge(stride);
    s.write(r.fwd, i, pos + 1);
    s.write(r.back, pos, i + 1);
  });
  m.release(ind);
  m.release(pref);
  return r;
}

// ---------------------------------------------------------------------------
// Padded sorting of naturals in [0, n^c - 1] into at most (1+lambda)n cells.
// Values are made distinct via a_i*(n+1)+i, then bucket rounds shrink the
// value range by roughly n^delta per round; the round count depends only on
// (c, lambda, eps). Output cells have stride 2: (flag, value).
// ---------------------------------------------------------------------------
inline CellView padded_sort(Machine& m, ArrayHandle A, const Ratio& lambda,
                            const Ratio& eps, u64 c) {
  detail::check_accuracy(lambda, eps);
  if (c == 0) throw fault(fault_kind::parameter, "padded_sort: c must be >= 1");
  const u64 n = m.size(A);
  if (n <= 1) {
    CellView out{m.allocate(2 * n), n, 2, 0};
    m.step(n, [&](Step& s, u64) {
      s.write(out.h, 0, 1);
      s.write(out.h, 1, s.read(A, 0));
    });
    return out;
  }
  const double delta = eps.value() / 3.0;
  const u64 rounds =
      static_cast<u64>(std::ceil((static_cast<double>(c) + 1.0) / delta)) + 1;
  const u64 T = detail::ceil_pow(n, 1.0 + delta);

  const unsigned __int128 bound128 = detail::sat_pow_u128(n, c);
  const unsigned __int128 max_transformed =
      (bound128 - 1) * (n + 1) + n;
  if (max_transformed > std::numeric_limits<u64>::max())
    throw fault(fault_kind::overflow,
                "padded_sort: n^(c+1) does not fit a machine word (n=" +
                    std::to_string(n) + ", c=" + std::to_string(c) + ")");
  const u64 bound = static_cast<u64>(bound128);

  ArrayHandle work = m.allocate(n);
  ArrayHandle orig = m.allocate(n);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const u64 v = s.read(A, i);
    if (v >= bound)
      throw fault(fault_kind::parameter,
                  "padded_sort: value " + std::to_string(v) +
                      " out of range [0, n^c)");
    s.write(orig, i, v);
    s.write(work, i, v * (n + 1) + i);
  });

  u64 range = static_cast<u64>(max_transformed) + 1;
  for (u64 r = 0; r < rounds; ++r) {
    const u64 divisor = range > T ? (range + T - 1) / T : 1;
    ArrayHandle buckets = m.allocate(T);
    m.step(n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      s.write(buckets, s.read(work, i) / divisor, 1);
    });
    ArrayHandle pref = approx_prefix_sums(m, buckets, lambda, eps);
    m.step(n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      const u64 v = s.read(work, i);
      const u64 rank = s.read(pref, v / divisor) - 1;
      s.write(work, i, rank * divisor + v % divisor);
    });
    range = n * divisor;
    m.release(buckets);
    m.release(pref);
  }

  // Scatter by final position, compact, and restore the original values.
  CellView scatter{m.allocate(2 * range), range, 2, 0};
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const u64 pos = s.read(work, i);
    s.write(scatter.h, scatter.word_of(pos, 0), 1);
    s.write(scatter.h, scatter.word_of(pos, 1), i + 1);
  });
  CompactResult cr = approx_compact(m, scatter, lambda, eps);
  m.step(cr.out.count, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    const u64 src = s.read(cr.out.h, cr.out.word_of(j, 1)) - 1;
    s.write(cr.out.h, cr.out.word_of(j, 1), s.read(orig, src));
  });
  m.release(work);
  m.release(orig);
  m.release(scatter.h);
  m.release(cr.fwd);
  m.release(cr.back);
  return cr.out;
}

// ---------------------------------------------------------------------------
// Predecessor / successor links via ceil(1/delta) rounds of block merging
// (delta = eps/2). The result array holds 0 for "none", otherwise index+1.
// ---------------------------------------------------------------------------
namespace detail {

inline ArrayHandle directional_links(Machine& m, const CellView& A,
                                     const Ratio& eps, bool forward) {
  if (!eps.positive())
    throw fault(fault_kind::parameter, "epsilon must be a positive rational");
  const u64 n = A.count;
  const double delta = eps.value() / 2.0;
  const u64 rounds = static_cast<u64>(std::ceil(1.0 / delta - 1e-9));
  const u64 b = std::max<u64>(2, ceil_pow(n, delta));
  // logical position j maps to physical cell phys(j)
  auto phys = [&](u64 j) { return forward ? j : n - 1 - j; };

  ArrayHandle links = m.allocate(n);  // logical: pred index + 1, 0 = none
  ArrayHandle last = m.allocate(n);   // per-block last inhabited (logical +1)
  m.step(n, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    const u64 inh = s.read(A.h, A.word_of(phys(j), A.flag)) ? 1 : 0;
    s.write(last, j, inh ? j + 1 : 0);
  });

  u64 block = 1;  // current block size; `last` has ceil(n/block) entries
  for (u64 r = 0; r < rounds; ++r) {
    const u64 nb = block == 0 ? 0 : (n + block - 1) / block;  // sub-block count
    const u64 super = std::min(n, block * b);                 // merged size
    const u64 nsup = super == 0 ? 0 : (n + super - 1) / super;
    ArrayHandle elim = m.allocate(nsup * b * b);
    ArrayHandle prev = m.allocate(nsup * b);
    // (a1) mark pairs (j', j) with an inhabited sub-block strictly between
    m.step(nsup * b * b * b, [&](Step& s, u64 p) {
      u64 g = p - 1;
      const u64 jpp = g % b;
      g /= b;
      const u64 j = g % b;
      g /= b;
      const u64 jp = g % b;
      const u64 K = g / b;
      if (!(jp < jpp && jpp < j)) return;
      const u64 idx = K * b + jpp;
      if (idx >= nb) return;
      if (s.read(last, idx) != 0)
        s.write(elim, (K * b + jp) * b + j, 1);
    });
    // (a2) nearest earlier non-empty sub-block per (K, j)
    m.step(nsup * b * b, [&](Step& s, u64 p) {
      u64 g = p - 1;
      const u64 j = g % b;
      g /= b;
      const u64 jp = g % b;
      const u64 K = g / b;
      if (jp >= j) return;
      const u64 idx = K * b + jp;
      if (idx >= nb) return;
      const u64 l = s.read(last, idx);
      if (l != 0 && s.read(elim, (K * b + jp) * b + j) == 0)
        s.write(prev, K * b + j, l);
    });
    // (b) fill links for cells whose predecessor crosses a sub-block boundary
    m.step(n, [&](Step& s, u64 p) {
      const u64 j = p - 1;
      if (s.read(links, j) != 0) return;
      const u64 K = j / super;
      const u64 sub = (j % super) / block;
      const u64 v = s.read(prev, K * b + sub);
      if (v != 0) s.write(links, j, v);
    });
    // (c) merge `last` to superblock granularity
    ArrayHandle notlast = m.allocate(nsup * b);
    m.step(nsup * b * b, [&](Step& s, u64 p) {
      u64 g = p - 1;
      const u64 jp = g % b;
      g /= b;
      const u64 j = g % b;
      const u64 K = g / b;
      if (jp <= j) return;
      const u64 idx = K * b + jp;
      if (idx >= nb) return;
      if (s.read(last, idx) != 0) s.write(notlast, K * b + j, 1);
    });
    ArrayHandle merged = m.allocate(nsup);
    m.step(nsup * b, [&](Step& s, u64 p) {
      u64 g = p - 1;
      const u64 j = g % b;
      const u64 K = g / b;
      const u64 idx = K * b + j;
      if (idx >= nb) return;
      const u64 l = s.read(last, idx);
      if (l != 0 && s.read(notlast, K * b + j) == 0) s.write(merged, K, l);
    });
    m.release(elim);
    m.release(prev);
    m.release(notlast);
    m.release(last);
    last = merged;
    block = super == 0 ? 1 : super;
  }
  m.release(last);

  // Map logical links back to physical indices.
  ArrayHandle result = m.allocate(n);
  m.step(n, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    const u64 v = s.read(links, j);
    if (v != 0) s.write(result, phys(j), phys(v - 1) + 1);
  });
  m.release(links);
  return result;
}

}  // namespace detail

inline ArrayHandle predecessor_links(Machine& m, const CellView& A,
                                     const Ratio& eps) {
  return detail::directional_links(m, A, eps, /*forward=*/true);
}

inline ArrayHandle successor_links(Machine& m, const CellView& A,
                                   const Ratio& eps) {
  return detail::directional_links(m, A, eps, /*forward=*/false);
}

// ---------------------------------------------------------------------------
// Task scheduling: each task i with m_i >= 1 receives a block of m_i
// consecutive cells carrying its payload, each linking to the block's lead
// cell. Cell layout: (flag, task index + 1, lead cell index + 1, payload...).
// ---------------------------------------------------------------------------
struct TaskDescription {
  u64 m = 0;
  std::vector<word> payload;
};

struct Schedule {
  CellView cells;          // stride = 3 + payload_width
  u64 payload_width = 0;
  static constexpr u64 kTask = 1;
  static constexpr u64 kLead = 2;
  static constexpr u64 kPayload = 3;
};

inline Schedule schedule_tasks(Machine& m,
                               const std::vector<TaskDescription>& tasks,
                               const Ratio& lambda, const Ratio& eps) {
  detail::check_accuracy(lambda, eps);
  const u64 nt = tasks.size();
  u64 w = 0;
  for (const auto& t : tasks) w = std::max<u64>(w, t.payload.size());

  ArrayHandle ms = m.allocate(nt);
  ArrayHandle descr = m.allocate(nt * (1 + w));
  for (u64 i = 0; i < nt; ++i) {
    m.host_write(ms, i, tasks[i].m);
    m.host_write(descr, i * (1 + w), tasks[i].m);
    for (u64 f = 0; f < tasks[i].payload.size(); ++f)
      m.host_write(descr, i * (1 + w) + 1 + f, tasks[i].payload[f]);
  }
  ArrayHandle pref = approx_prefix_sums(m, ms, lambda, eps);
  const u64 total = nt > 0 ? m.host_read(pref, nt - 1) : 0;

  Schedule sched;
  sched.payload_width = w;
  const u64 stride = 3 + w;
  sched.cells = CellView{m.allocate(total * stride), total, stride, 0};
  const CellView& cells = sched.cells;

  // Lead cells at the prefix positions.
  m.step(nt, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const u64 mi = s.read(descr, i * (1 + w));
    if (mi == 0) return;
    const u64 start = i > 0 ? s.read(pref, i - 1) : 0;
    s.write(cells.h, cells.word_of(start, 0), 1);
    s.write(cells.h, cells.word_of(start, Schedule::kTask), i + 1);
    s.write(cells.h, cells.word_of(start, Schedule::kLead), start + 1);
    for (u64 f = 0; f < w; ++f)
      s.write(cells.h, cells.word_of(start, Schedule::kPayload + f),
              s.read(descr, i * (1 + w) + 1 + f));
    s.charge(w);
  });

  // Fill the remaining cells of each block via predecessor links.
  ArrayHandle pl = predecessor_links(m, cells, eps);
  m.step(total, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    if (s.read(cells.h, cells.word_of(j, 0))) return;
    const u64 lead = s.read(pl, j);
    if (lead == 0) return;
    const u64 lj = lead - 1;
    const u64 task = s.read(cells.h, cells.word_of(lj, Schedule::kTask));
    const u64 mi = s.read(descr, (task - 1) * (1 + w));
    if (j - lj >= mi) return;
    s.write(cells.h, cells.word_of(j, 0), 1);
    s.write(cells.h, cells.word_of(j, Schedule::kTask), task);
    s.write(cells.h, cells.word_of(j, Schedule::kLead), lead);
    for (u64 f = 0; f < w; ++f)
      s.write(cells.h, cells.word_of(j, Schedule::kPayload + f),
              s.read(cells.h, cells.word_of(lj, Schedule::kPayload + f)));
    s.charge(w);
  });
  m.release(pl);
  m.release(ms);
  m.release(pref);
  m.release(descr);
  return sched;
}

}  // namespace pramql
