// Basic operations on relation arrays: compaction, sorting by attribute
// lists, hash tables over tuple keys, searching (hashed and ordered),
// deduplication, and machine-resident task scheduling.

#pragma once

#include "relstore.hpp"

namespace pramql {

namespace detail {

inline std::vector<u64> cols_of(const Schema& s,
                                const std::vector<std::string>& names) {
  std::vector<u64> cols;
  for (const auto& n : names) {
    auto it = std::find(s.attrs.begin(), s.attrs.end(), n);
    if (it == s.attrs.end())
      throw fault(fault_kind::schema,
                  "attribute " + n + " not in relation " + s.name);
    cols.push_back(it - s.attrs.begin());
  }
  return cols;
}

// X followed by the remaining attributes in schema order.
inline std::vector<std::string> order_attrs(const Schema& s,
                                            const std::vector<std::string>& X) {
  std::vector<std::string> out = X;
  for (const auto& a : s.attrs)
    if (std::find(X.begin(), X.end(), a) == X.end()) out.push_back(a);
  return out;
}

inline void require_x_ordered(const RelationArray& a,
                              const std::vector<std::string>& X) {
  if (a.ordered_by.size() < X.size())
    throw fault(fault_kind::parameter,
                "relation " + a.schema.name + " is not ordered by the "
                "requested attributes");
  for (size_t i = 0; i < X.size(); ++i)
    if (a.ordered_by[i] != X[i])
      throw fault(fault_kind::parameter,
                  "relation " + a.schema.name + " is not ordered by the "
                  "requested attributes");
}

inline void require_dictionary(const Database& db, const char* op) {
  if (db.setting() != Setting::dictionary)
    throw fault(fault_kind::setting,
                std::string(op) + " needs the dictionary setting");
}

inline void require_arbitrary_winner(const Machine& m, const char* op) {
  if (m.config().write_mode == WriteMode::Common)
    throw fault(fault_kind::mode,
                std::string(op) + " needs arbitrary-winner concurrent "
                "writes (Arbitrary or Priority mode)");
}

// m_base^k checked against the word size.
inline u64 checked_pow(u64 base, u64 exp) {
  unsigned __int128 r = 1;
  for (u64 i = 0; i < exp; ++i) {
    r *= base;
    if (r > std::numeric_limits<u64>::max())
      throw fault(fault_kind::overflow,
                  "composite tuple key does not fit a machine word");
  }
  return static_cast<u64>(r);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Composite tuple keys: the characteristic number of a tuple over a column
// list, base c_val*|D|+1, most significant column first. Dictionary setting
// only (keys are arithmetic over the values). Returns (flag, key) cells.
// ---------------------------------------------------------------------------
inline u64 key_bound(const Database& db, u64 k) {
  return detail::checked_pow(db.value_bound() + 1, k);
}

inline CellView tuple_keys(Machine& m, const Database& db,
                           const RelationArray& a,
                           const std::vector<u64>& cols) {
  detail::require_dictionary(db, "tuple_keys");
  const u64 mbase = db.value_bound() + 1;
  detail::checked_pow(mbase, cols.size());
  const u64 n = a.cells.count;
  CellView kv{m.allocate(2 * n), n, 2, 0};
  const u64 k = cols.size();
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(a.cells.h, a.cells.word_of(i, 0))) return;
    u64 key = 0;
    for (u64 j = 0; j < k; ++j)
      key = key * mbase + s.read(a.cells.h, a.cells.word_of(i, a.payload(cols[j])));
    s.charge(k);
    s.write(kv.h, kv.word_of(i, 0), 1);
    s.write(kv.h, kv.word_of(i, 1), key);
  });
  return kv;
}

// ---------------------------------------------------------------------------
// Compaction of a relation array; partner links connect input and output.
// ---------------------------------------------------------------------------
inline RelationArray compact_rel(Machine& m, RelationArray& a,
                                 const Ratio& lambda, const Ratio& eps) {
  CompactResult cr = approx_compact(m, a.cells, lambda, eps);
  RelationArray out;
  out.schema = a.schema;
  out.cells = cr.out;
  out.ordered_by = a.ordered_by;
  out.fully_ordered = a.fully_ordered;
  out.concise = a.concise;
  m.step(a.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const u64 f = s.read(cr.fwd, i);
    s.write(a.cells.h, a.cells.word_of(i, a.link(kPartner)), f);
    if (f != 0)
      s.write(out.cells.h, out.cells.word_of(f - 1, out.link(kPartner)), i + 1);
  });
  m.release(cr.fwd);
  m.release(cr.back);
  return out;
}


// ---------------------------------------------------------------------------
// Hash tables over tuple keys: a 16-round radix descent through grids of
// arbitrary-winner writes. The digit count is input-independent; the base
// is the least b with b^16 covering the key bound. Probing replays the
// descent and verifies the key, so distinct keys never collide.
// ---------------------------------------------------------------------------
struct HashTable {
  u64 n = 0;
  u64 base = 2;
  static constexpr u64 kDigits = 16;
  std::vector<unsigned __int128> divisors;
  CellView keys;  // (flag, key), borrowed from the caller
  std::vector<ArrayHandle> grids;

  // Returns key index + 1 of a tuple with an equal key, or 0.
  u64 probe(Step& s, u64 key) const {
    u64 p = 0;
    for (u64 d = 0; d < kDigits; ++d) {
      const u64 digit = static_cast<u64>(
          (static_cast<unsigned __int128>(key) / divisors[d]) %
          static_cast<unsigned __int128>(base));
      const u64 w = s.read(grids[d], p * base + digit);
      if (w == 0) return 0;
      p = w - 1;
    }
    s.charge(kDigits);
    if (!s.read(keys.h, keys.word_of(p, 0))) return 0;
    return s.read(keys.h, keys.word_of(p, 1)) == key ? p + 1 : 0;
  }

  void release(Machine& m) {
    for (auto g : grids) m.release(g);
    grids.clear();
  }
};

inline HashTable build_hash_table(Machine& m, const CellView& kv,
                                  u64 bound /* keys < bound */) {
  detail::require_arbitrary_winner(m, "build_hash_table");
  HashTable ht;
  ht.n = kv.count;
  ht.keys = kv;
  ht.base = 2;
  auto covers = [&](u64 b) {
    unsigned __int128 r = 1;
    for (u64 i = 0; i < HashTable::kDigits; ++i) {
      r *= b;
      if (r >= bound) return true;
    }
    return r >= bound;
  };
  while (!covers(ht.base)) ++ht.base;
  ht.divisors.resize(HashTable::kDigits);
  unsigned __int128 d = 1;
  for (u64 i = 0; i < HashTable::kDigits; ++i) {
    ht.divisors[HashTable::kDigits - 1 - i] = d;
    d *= ht.base;
  }
  const u64 cap = std::max<u64>(1, ht.n);
  ArrayHandle pos = m.allocate(ht.n);
  for (u64 r = 0; r < HashTable::kDigits; ++r) {
    ArrayHandle grid = m.allocate(cap * ht.base);
    m.step(ht.n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(kv.h, kv.word_of(i, 0))) return;
      const u64 key = s.read(kv.h, kv.word_of(i, 1));
      const u64 digit = static_cast<u64>(
          (static_cast<unsigned __int128>(key) / ht.divisors[r]) %
          static_cast<unsigned __int128>(ht.base));
      s.write(grid, s.read(pos, i) * ht.base + digit, i + 1);
    });
    m.step(ht.n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(kv.h, kv.word_of(i, 0))) return;
      const u64 key = s.read(kv.h, kv.word_of(i, 1));
      const u64 digit = static_cast<u64>(
          (static_cast<unsigned __int128>(key) / ht.divisors[r]) %
          static_cast<unsigned __int128>(ht.base));
      s.write(pos, i, s.read(grid, s.read(pos, i) * ht.base + digit) - 1);
    });
    ht.grids.push_back(grid);
  }
  m.release(pos);
  return ht;
}

// ---------------------------------------------------------------------------
// Sorting a relation array by an attribute list X (remaining attributes
// break ties), via padded sorting of index-tagged characteristic numbers.
// Empty input cells sort to the back and stay empty. Dictionary setting.
// ---------------------------------------------------------------------------
inline RelationArray sort_rel(Machine& m, const Database& db, RelationArray& a,
                              const std::vector<std::string>& X,
                              const Ratio& lambda, const Ratio& eps) {
  detail::require_dictionary(db, "sort_rel");
  const std::vector<std::string> full = detail::order_attrs(a.schema, X);
  const std::vector<u64> cols = detail::cols_of(a.schema, full);
  const u64 n = a.cells.count;
  RelationArray out;
  out.schema = a.schema;
  out.ordered_by = full;
  out.fully_ordered = true;
  out.concise = a.concise;
  if (n == 0) {
    out.cells = CellView{m.allocate(0), 0, rel_stride(a.arity()), 0};
    return out;
  }
  if (!a.concise)
    throw fault(fault_kind::parameter,
                "sort_rel needs a concise input (distinct tuple keys)");
  const u64 kb = key_bound(db, cols.size());  // keys < kb, kb marks "empty"
  // The sort runs in an array of length L exceeding the key base, so the
  // padded-sort exponent equals the column count regardless of the data: the
  // full tuple keys and the empty marker stay below kb + 1 <= L^cols. A fixed
  // exponent keeps the modeled depth a function of (schema, lambda, eps)
  // alone; an order-preserving compaction afterwards restores the
  // (1+lambda)n length. Conciseness makes the keys distinct, so a hash table
  // recovers each sorted key's source cell.
  const u64 base = db.value_bound() + 1;
  const u64 L = std::max<u64>({n, base + 1, 2});
  const u64 c = std::max<u64>(cols.size(), 1);
  CellView kv = tuple_keys(m, db, a, cols);
  HashTable ht = build_hash_table(m, kv, kb);
  ArrayHandle tagged = m.allocate(L);
  m.step(L, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const bool real = i < n && s.read(kv.h, kv.word_of(i, 0));
    s.write(tagged, i, real ? s.read(kv.h, kv.word_of(i, 1)) : kb);
  });
  CellView sorted = padded_sort(m, tagged, lambda, eps, c);
  const u64 stride = rel_stride(a.arity());
  const u64 arity = a.arity();
  RelationArray padded;
  padded.schema = a.schema;
  padded.cells = CellView{m.allocate(sorted.count * stride), sorted.count,
                          stride, 0};
  m.step(sorted.count, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    if (!s.read(sorted.h, sorted.word_of(j, 0))) return;
    const u64 u = s.read(sorted.h, sorted.word_of(j, 1));
    if (u == kb) return;  // source cell was empty (or padding)
    const u64 i = ht.probe(s, u) - 1;
    s.write(padded.cells.h, padded.cells.word_of(j, 0), 1);
    for (u64 f = 0; f < arity; ++f)
      s.write(padded.cells.h, padded.cells.word_of(j, padded.payload(f)),
              s.read(a.cells.h, a.cells.word_of(i, a.payload(f))));
    s.charge(arity);
    s.write(padded.cells.h, padded.cells.word_of(j, padded.link(kRepresentative)),
            i + 1);
  });
  ht.release(m);
  CompactResult cr = approx_compact(m, padded.cells, lambda, eps);
  out.cells = cr.out;
  m.step(out.cells.count, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    if (!s.read(out.cells.h, out.cells.word_of(j, 0))) return;
    const u64 i =
        s.read(out.cells.h, out.cells.word_of(j, out.link(kRepresentative))) - 1;
    s.write(out.cells.h, out.cells.word_of(j, out.link(kRepresentative)), 0);
    s.write(out.cells.h, out.cells.word_of(j, out.link(kPartner)), i + 1);
    s.write(a.cells.h, a.cells.word_of(i, a.link(kPartner)), j + 1);
  });
  m.release(kv.h);
  m.release(tagged);
  m.release(sorted.h);
  m.release(padded.cells.h);
  m.release(cr.fwd);
  m.release(cr.back);
  return out;
}

// ---------------------------------------------------------------------------
// Searching. Each inhabited tuple of A receives, in its partner link slot,
// the index + 1 of some tuple of B agreeing on X (0 if none).
// ---------------------------------------------------------------------------

// Dictionary setting, via a hash table over B's X-keys.
inline void search_tuples_dict(Machine& m, const Database& db,
                               RelationArray& A, const RelationArray& B,
                               const std::vector<std::string>& X) {
  detail::require_dictionary(db, "search_tuples_dict");
  const std::vector<u64> acols = detail::cols_of(A.schema, X);
  const std::vector<u64> bcols = detail::cols_of(B.schema, X);
  CellView bkeys = tuple_keys(m, db, B, bcols);
  CellView akeys = tuple_keys(m, db, A, acols);
  HashTable ht = build_hash_table(m, bkeys, key_bound(db, X.size()));
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(akeys.h, akeys.word_of(i, 0))) return;
    const u64 r = ht.probe(s, s.read(akeys.h, akeys.word_of(i, 1)));
    s.write(A.cells.h, A.cells.word_of(i, A.link(kPartner)), r);
  });
  ht.release(m);
  m.release(bkeys.h);
  m.release(akeys.h);
}

namespace detail {

// Snapped lexicographic comparison against an X-ordered array with gaps:
// an empty cell stands for the nearest inhabited cell before it (or -inf).
// Answers "B[pos(i)] <=_X probe tuple".
template <class ProbeAt>
inline bool snapped_le(Step& s, const Database& db, const RelationArray& B,
                       const std::vector<u64>& bcols, ArrayHandle bpred,
                       u64 i, ProbeAt probe_at) {
  u64 pos = i;
  if (!s.read(B.cells.h, B.cells.word_of(pos, 0))) {
    const u64 pr = s.read(bpred, pos);
    if (pr == 0) return true;  // -inf
    pos = pr - 1;
  }
  for (size_t j = 0; j < bcols.size(); ++j) {
    const word b = s.read(B.cells.h, B.cells.word_of(pos, B.payload(bcols[j])));
    const word a = probe_at(s, j);
    if (db.lt(b, a)) return true;
    if (db.lt(a, b)) return false;
  }
  s.charge(bcols.size());
  return true;  // equal
}

// Resolve a boundary-descent result to an inhabited B index + 1 whose X
// columns equal the probe, else 0.
template <class ProbeAt>
inline u64 snapped_match(Step& s, const Database& db, const RelationArray& B,
                         const std::vector<u64>& bcols, ArrayHandle bpred,
                         u64 res, ProbeAt probe_at) {
  if (res == 0) return 0;
  u64 pos = res - 1;
  if (!s.read(B.cells.h, B.cells.word_of(pos, 0))) {
    const u64 pr = s.read(bpred, pos);
    if (pr == 0) return 0;
    pos = pr - 1;
  }
  for (size_t j = 0; j < bcols.size(); ++j) {
    const word b = s.read(B.cells.h, B.cells.word_of(pos, B.payload(bcols[j])));
    const word a = probe_at(s, j);
    if (db.lt(b, a) || db.lt(a, b)) return 0;
  }
  s.charge(bcols.size());
  return pos + 1;
}

}  // namespace detail

// B is X-ordered; each tuple of A descends into B. Ordered or dictionary.
inline void search_ordered_into_B(Machine& m, const Database& db,
                                  RelationArray& A, const RelationArray& B,
                                  const std::vector<std::string>& X,
                                  const Ratio& eps) {
  if (db.setting() == Setting::general)
    throw fault(fault_kind::setting,
                "ordered search is unavailable in the general setting");
  detail::require_x_ordered(B, X);
  const std::vector<u64> acols = detail::cols_of(A.schema, X);
  const std::vector<u64> bcols = detail::cols_of(B.schema, X);
  ArrayHandle bpred = predecessor_links(m, B.cells, eps);
  ArrayHandle res = m.allocate(A.cells.count);
  auto probe_at = [&](u64 q) {
    return [&, q](Step& s, u64 j) {
      return s.read(A.cells.h, A.cells.word_of(q, A.payload(acols[j])));
    };
  };
  detail::boundary_descent(
      m, A.cells.count, B.cells.count, eps, res,
      [&](Step& s, u64 q) {
        return s.read(A.cells.h, A.cells.word_of(q, 0)) != 0;
      },
      [&](Step& s, u64 q, u64 i) {
        return detail::snapped_le(s, db, B, bcols, bpred, i, probe_at(q));
      });
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 q = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(q, 0))) return;
    const u64 match = detail::snapped_match(s, db, B, bcols, bpred,
                                            s.read(res, q), probe_at(q));
    s.write(A.cells.h, A.cells.word_of(q, A.link(kPartner)), match);
  });
  m.release(bpred);
  m.release(res);
}

// A is X-ordered; tuples of B descend into A and post their index at the
// boundary cell (the last cell of the matching run). Other cells of the run
// adopt the posting through successor links, so every tuple of A with a
// match learns one, and every tuple of B learns its partner in A.
inline void search_ordered_into_A(Machine& m, const Database& db,
                                  RelationArray& A, const RelationArray& B,
                                  const std::vector<std::string>& X,
                                  const Ratio& eps) {
  if (db.setting() == Setting::general)
    throw fault(fault_kind::setting,
                "ordered search is unavailable in the general setting");
  detail::require_arbitrary_winner(m, "search_ordered_into_A");
  detail::require_x_ordered(A, X);
  const std::vector<u64> acols = detail::cols_of(A.schema, X);
  const std::vector<u64> bcols = detail::cols_of(B.schema, X);
  ArrayHandle apred = predecessor_links(m, A.cells, eps);
  ArrayHandle res = m.allocate(B.cells.count);
  auto probe_at = [&](u64 q) {
    return [&, q](Step& s, u64 j) {
      return s.read(B.cells.h, B.cells.word_of(q, B.payload(bcols[j])));
    };
  };
  detail::boundary_descent(
      m, B.cells.count, A.cells.count, eps, res,
      [&](Step& s, u64 q) {
        return s.read(B.cells.h, B.cells.word_of(q, 0)) != 0;
      },
      [&](Step& s, u64 q, u64 i) {
        return detail::snapped_le(s, db, A, acols, apred, i, probe_at(q));
      });
  // clear stale partner links, then post
  m.step(A.cells.count, [&](Step& s, u64 p) {
    s.write(A.cells.h, A.cells.word_of(p - 1, A.link(kPartner)), 0);
  });
  m.step(B.cells.count, [&](Step& s, u64 p) {
    const u64 q = p - 1;
    if (!s.read(B.cells.h, B.cells.word_of(q, 0))) return;
    const u64 match = detail::snapped_match(s, db, A, acols, apred,
                                            s.read(res, q), probe_at(q));
    s.write(B.cells.h, B.cells.word_of(q, B.link(kPartner)), match);
    if (match != 0)
      s.write(A.cells.h, A.cells.word_of(match - 1, A.link(kPartner)), q + 1);
  });
  // cells of a matching run that received no post adopt from the run's end:
  // the next posted cell in X-order, if it agrees on X
  {
    CellView posted{m.allocate(2 * A.cells.count), A.cells.count, 2, 0};
    m.step(A.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (s.read(A.cells.h, A.cells.word_of(i, A.link(kPartner))) != 0)
        s.write(posted.h, posted.word_of(i, 0), 1);
    });
    ArrayHandle nxt = successor_links(m, posted, eps);
    m.step(A.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
      if (s.read(A.cells.h, A.cells.word_of(i, A.link(kPartner))) != 0) return;
      const u64 nx = s.read(nxt, i);
      if (nx == 0) return;
      const u64 j = nx - 1;
      for (size_t f = 0; f < acols.size(); ++f) {
        const word a = s.read(A.cells.h, A.cells.word_of(i, A.payload(acols[f])));
        const word b = s.read(A.cells.h, A.cells.word_of(j, A.payload(acols[f])));
        if (db.lt(a, b) || db.lt(b, a)) return;
      }
      s.charge(acols.size());
      s.write(A.cells.h, A.cells.word_of(i, A.link(kPartner)),
              s.read(A.cells.h, A.cells.word_of(j, A.link(kPartner))));
    });
    m.release(posted.h);
    m.release(nxt);
  }
  m.release(apred);
  m.release(res);
}

// ---------------------------------------------------------------------------
// Deduplication: duplicates are emptied and linked to their representative.
// ---------------------------------------------------------------------------
inline void dedup_dict(Machine& m, const Database& db, RelationArray& a) {
  detail::require_dictionary(db, "dedup_dict");
  detail::require_arbitrary_winner(m, "dedup_dict");
  std::vector<u64> cols(a.arity());
  for (u64 j = 0; j < a.arity(); ++j) cols[j] = j;
  CellView kv = tuple_keys(m, db, a, cols);
  HashTable ht = build_hash_table(m, kv, key_bound(db, a.arity()));
  m.step(a.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(kv.h, kv.word_of(i, 0))) return;
    const u64 r = ht.probe(s, s.read(kv.h, kv.word_of(i, 1)));
    s.write(a.cells.h, a.cells.word_of(i, a.link(kRepresentative)), r);
    if (r != i + 1) s.write(a.cells.h, a.cells.word_of(i, 0), 0);
  });
  ht.release(m);
  m.release(kv.h);
  a.concise = true;
}

inline void dedup_ordered(Machine& m, const Database& db, RelationArray& a,
                          const Ratio& eps) {
  if (db.setting() == Setting::general)
    throw fault(fault_kind::setting,
                "ordered deduplication is unavailable in the general setting");
  if (!a.fully_ordered)
    throw fault(fault_kind::parameter,
                "dedup_ordered needs a fully ordered relation");
  ArrayHandle pred = predecessor_links(m, a.cells, eps);
  const u64 arity = a.arity();
  ArrayHandle start = m.allocate(a.cells.count);  // run start marks
  m.step(a.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(a.cells.h, a.cells.word_of(i, 0))) return;
    const u64 pr = s.read(pred, i);
    bool dup = false;
    if (pr != 0) {
      dup = true;
      for (u64 f = 0; f < arity; ++f) {
        const word x = s.read(a.cells.h, a.cells.word_of(i, a.payload(f)));
        const word y = s.read(a.cells.h, a.cells.word_of(pr - 1, a.payload(f)));
        if (!db.eq(x, y)) {
          dup = false;
          break;
        }
      }
      s.charge(arity);
    }
    if (!dup) s.write(start, i, 1);
  });
  // nearest preceding run start is the representative
  CellView starts{start, a.cells.count, 1, 0};
  ArrayHandle rep = predecessor_links(m, starts, eps);
  m.step(a.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(a.cells.h, a.cells.word_of(i, 0))) return;
    if (s.read(start, i)) {
      s.write(a.cells.h, a.cells.word_of(i, a.link(kRepresentative)), i + 1);
    } else {
      s.write(a.cells.h, a.cells.word_of(i, a.link(kRepresentative)),
              s.read(rep, i));
      s.write(a.cells.h, a.cells.word_of(i, 0), 0);
    }
  });
  m.release(pred);
  m.release(start);
  m.release(rep);
  a.concise = true;
}

// ---------------------------------------------------------------------------
// Machine-resident task scheduling: task cells carry their multiplicity at
// a given word offset; the result holds (flag, task index + 1, lead + 1).
// ---------------------------------------------------------------------------
inline Schedule schedule_cells(Machine& m, const CellView& tv, u64 m_off,
                               const Ratio& lambda, const Ratio& eps) {
  const u64 nt = tv.count;
  ArrayHandle ms = m.allocate(nt);
  m.step(nt, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (s.read(tv.h, tv.word_of(i, tv.flag)))
      s.write(ms, i, s.read(tv.h, tv.word_of(i, m_off)));
  });
  ArrayHandle pref = approx_prefix_sums(m, ms, lambda, eps);
  const u64 total = nt > 0 ? m.host_read(pref, nt - 1) : 0;
  Schedule sched;
  sched.payload_width = 0;
  sched.cells = CellView{m.allocate(total * 3), total, 3, 0};
  const CellView& cells = sched.cells;
  m.step(nt, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(tv.h, tv.word_of(i, tv.flag))) return;
    if (s.read(tv.h, tv.word_of(i, m_off)) == 0) return;
    const u64 startp = i > 0 ? s.read(pref, i - 1) : 0;
    s.write(cells.h, cells.word_of(startp, 0), 1);
    s.write(cells.h, cells.word_of(startp, Schedule::kTask), i + 1);
    s.write(cells.h, cells.word_of(startp, Schedule::kLead), startp + 1);
  });
  ArrayHandle pl = predecessor_links(m, cells, eps);
  m.step(total, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    if (s.read(cells.h, cells.word_of(j, 0))) return;
    const u64 lead = s.read(pl, j);
    if (lead == 0) return;
    const u64 lj = lead - 1;
    const u64 task = s.read(cells.h, cells.word_of(lj, Schedule::kTask));
    if (j - lj >= s.read(tv.h, tv.word_of(task - 1, m_off))) return;
    s.write(cells.h, cells.word_of(j, 0), 1);
    s.write(cells.h, cells.word_of(j, Schedule::kTask), task);
    s.write(cells.h, cells.word_of(j, Schedule::kLead), lead);
  });
  m.release(ms);
  m.release(pref);
  m.release(pl);
  return sched;
}

}  // namespace pramql
