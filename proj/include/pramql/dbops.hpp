// Database operators over relation arrays: selection, projection, semijoin,
// difference, union, and natural join (grouped enumeration over an X-sorted
// side, with hashed, ordered, and naive variants).

#pragma once

#include "array_ops.hpp"

namespace pramql {

enum class JoinVariant { DictionaryHash, OrderedIntoOther, OrderedIntoSelf, Naive };

namespace detail {

inline std::vector<std::string> common_attrs(const Schema& a, const Schema& b) {
  std::vector<std::string> X;
  for (const auto& x : a.attrs)
    if (std::find(b.attrs.begin(), b.attrs.end(), x) != b.attrs.end())
      X.push_back(x);
  return X;
}

inline RelationArray clone_rel(Machine& m, const RelationArray& A) {
  RelationArray out = alloc_relation(m, A.schema, A.cells.count);
  out.ordered_by = A.ordered_by;
  out.fully_ordered = A.fully_ordered;
  out.concise = A.concise;
  const u64 stride = A.cells.stride;
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    for (u64 f = 0; f < stride; ++f)
      s.write(out.cells.h, out.cells.word_of(i, f),
              s.read(A.cells.h, A.cells.word_of(i, f)));
    s.charge(stride);
  });
  return out;
}

// Clone with flags filtered by the partner link (matched or unmatched).
inline RelationArray clone_where_partner(Machine& m, const RelationArray& A,
                                         bool want_match) {
  RelationArray out = alloc_relation(m, A.schema, A.cells.count);
  out.ordered_by = A.ordered_by;
  out.fully_ordered = A.fully_ordered;
  out.concise = A.concise;
  const u64 stride = A.cells.stride;
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    const bool matched =
        s.read(A.cells.h, A.cells.word_of(i, A.link(kPartner))) != 0;
    if (matched != want_match) return;
    for (u64 f = 0; f < stride; ++f)
      s.write(out.cells.h, out.cells.word_of(i, f),
              s.read(A.cells.h, A.cells.word_of(i, f)));
    s.charge(stride);
  });
  return out;
}

// Reorder X so that it matches a prefix of `order`, when possible.
inline std::vector<std::string> align_to_order(
    const std::vector<std::string>& X, const std::vector<std::string>& order) {
  if (X.size() > order.size()) return X;
  std::set<std::string> xs(X.begin(), X.end());
  std::vector<std::string> pre(order.begin(), order.begin() + X.size());
  std::set<std::string> ps(pre.begin(), pre.end());
  return xs == ps ? pre : X;
}

// Dispatching search: fills A's partner links with matches from B on X.
inline void search_partners(Machine& m, const Database& db, RelationArray& A,
                            RelationArray& B, std::vector<std::string> X,
                            const Ratio& eps) {
  if (db.setting() == Setting::dictionary) {
    search_tuples_dict(m, db, A, B, X);
    return;
  }
  {
    auto Xb = align_to_order(X, B.ordered_by);
    if (Xb.size() <= B.ordered_by.size() &&
        std::equal(Xb.begin(), Xb.end(), B.ordered_by.begin())) {
      search_ordered_into_B(m, db, A, B, Xb, eps);
      return;
    }
  }
  auto Xa = align_to_order(X, A.ordered_by);
  if (Xa.size() <= A.ordered_by.size() &&
      std::equal(Xa.begin(), Xa.end(), A.ordered_by.begin())) {
    search_ordered_into_A(m, db, A, B, Xa, eps);
    return;
  }
  throw fault(fault_kind::parameter,
              "no suitable order for searching " + A.schema.name + " against " +
                  B.schema.name);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Selection and projection.
// ---------------------------------------------------------------------------
inline RelationArray selection_const(Machine& m, const Database& db,
                                     const RelationArray& A,
                                     const std::string& attr,
                                     const std::string& lit,
                                     const Ratio& lambda, const Ratio& eps) {
  const u64 col = A.attr_index(attr);
  RelationArray tmp = detail::clone_rel(m, A);
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    const bool keep =
        db.eq_const(s.read(A.cells.h, A.cells.word_of(i, A.payload(col))), lit);
    s.write(tmp.cells.h, tmp.cells.word_of(i, 0), keep ? 1 : 0);
  });
  RelationArray out = compact_rel(m, tmp, lambda, eps);
  m.release(tmp.cells.h);
  return out;
}

inline RelationArray selection_eq(Machine& m, const Database& db,
                                  const RelationArray& A,
                                  const std::string& attr1,
                                  const std::string& attr2,
                                  const Ratio& lambda, const Ratio& eps) {
  const u64 c1 = A.attr_index(attr1), c2 = A.attr_index(attr2);
  RelationArray tmp = detail::clone_rel(m, A);
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    const bool keep = db.eq(s.read(A.cells.h, A.cells.word_of(i, A.payload(c1))),
                            s.read(A.cells.h, A.cells.word_of(i, A.payload(c2))));
    s.write(tmp.cells.h, tmp.cells.word_of(i, 0), keep ? 1 : 0);
  });
  RelationArray out = compact_rel(m, tmp, lambda, eps);
  m.release(tmp.cells.h);
  return out;
}

// Column projection with projection links; optionally deduplicated and
// compacted (dictionary setting, or ordered when the order survives).
inline RelationArray projection(Machine& m, const Database& db,
                                const RelationArray& A,
                                const std::vector<std::string>& attrs,
                                const Ratio& lambda, const Ratio& eps,
                                bool make_concise = true) {
  const std::vector<u64> cols = detail::cols_of(A.schema, attrs);
  Schema schema{A.schema.name, attrs};
  RelationArray out = alloc_relation(m, schema, A.cells.count);
  // order survives when attrs form a prefix of the input order
  if (A.ordered_by.size() >= attrs.size() &&
      std::equal(attrs.begin(), attrs.end(), A.ordered_by.begin())) {
    out.ordered_by = attrs;
    out.fully_ordered = true;
  }
  out.concise = false;
  m.step(A.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    s.write(out.cells.h, out.cells.word_of(i, 0), 1);
    for (u64 j = 0; j < cols.size(); ++j)
      s.write(out.cells.h, out.cells.word_of(i, out.payload(j)),
              s.read(A.cells.h, A.cells.word_of(i, A.payload(cols[j]))));
    s.charge(cols.size());
    s.write(out.cells.h, out.cells.word_of(i, out.link(kProjection)), i + 1);
  });
  if (!make_concise) return out;
  if (db.setting() == Setting::dictionary) {
    dedup_dict(m, db, out);
  } else if (out.fully_ordered && db.setting() == Setting::ordered) {
    dedup_ordered(m, db, out, eps);
  } else {
    throw fault(fault_kind::setting,
                "cannot deduplicate a projection in this setting");
  }
  RelationArray packed = compact_rel(m, out, lambda, eps);
  m.release(out.cells.h);
  return packed;
}

// ---------------------------------------------------------------------------
// Semijoin, difference, union.
// ---------------------------------------------------------------------------
inline RelationArray semijoin(Machine& m, const Database& db, RelationArray& A,
                              RelationArray& B, const Ratio& lambda,
                              const Ratio& eps) {
  detail::search_partners(m, db, A, B,
                          detail::common_attrs(A.schema, B.schema), eps);
  RelationArray kept = detail::clone_where_partner(m, A, true);
  RelationArray out = compact_rel(m, kept, lambda, eps);
  m.release(kept.cells.h);
  return out;
}

inline RelationArray difference(Machine& m, const Database& db,
                                RelationArray& A, RelationArray& B,
                                const Ratio& lambda, const Ratio& eps) {
  if (A.schema.attrs != B.schema.attrs)
    throw fault(fault_kind::schema, "difference needs identical schemas");
  detail::search_partners(m, db, A, B, A.schema.attrs, eps);
  RelationArray kept = detail::clone_where_partner(m, A, false);
  RelationArray out = compact_rel(m, kept, lambda, eps);
  m.release(kept.cells.h);
  return out;
}

inline RelationArray set_union(Machine& m, const Database& db,
                               RelationArray& A, RelationArray& B,
                               const Ratio& lambda, const Ratio& eps) {
  if (A.schema.attrs != B.schema.attrs)
    throw fault(fault_kind::schema, "union needs identical schemas");
  RelationArray diff = difference(m, db, A, B, lambda, eps);
  RelationArray cat = alloc_relation(m, A.schema,
                                     diff.cells.count + B.cells.count);
  cat.concise = diff.concise && B.concise;
  const u64 stride = cat.cells.stride;
  m.step(diff.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(diff.cells.h, diff.cells.word_of(i, 0))) return;
    for (u64 f = 0; f < stride; ++f)
      s.write(cat.cells.h, cat.cells.word_of(i, f),
              s.read(diff.cells.h, diff.cells.word_of(i, f)));
    s.charge(stride);
  });
  m.step(B.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(B.cells.h, B.cells.word_of(i, 0))) return;
    for (u64 f = 0; f < stride; ++f)
      s.write(cat.cells.h, cat.cells.word_of(diff.cells.count + i, f),
              s.read(B.cells.h, B.cells.word_of(i, f)));
    s.charge(stride);
  });
  RelationArray out = compact_rel(m, cat, lambda, eps);
  out.ordered_by.clear();
  out.fully_ordered = false;
  m.release(diff.cells.h);
  m.release(cat.cells.h);
  return out;
}

// ---------------------------------------------------------------------------
// Natural join. The output schema is attrs(A) followed by attrs(B) \ X.
// ---------------------------------------------------------------------------
namespace detail {

inline Schema join_schema(const Schema& a, const Schema& b,
                          const std::vector<std::string>& X) {
  Schema s{a.name + "_" + b.name, a.attrs};
  for (const auto& attr : b.attrs)
    if (std::find(X.begin(), X.end(), attr) == X.end()) s.attrs.push_back(attr);
  return s;
}

inline RelationArray join_naive(Machine& m, const Database& db,
                                const RelationArray& A, const RelationArray& B,
                                const Ratio& lambda, const Ratio& eps) {
  const auto X = common_attrs(A.schema, B.schema);
  const auto acols = cols_of(A.schema, X);
  const auto bcols = cols_of(B.schema, X);
  Schema schema = join_schema(A.schema, B.schema, X);
  std::vector<u64> brest;
  for (u64 j = 0; j < B.arity(); ++j)
    if (std::find(bcols.begin(), bcols.end(), j) == bcols.end())
      brest.push_back(j);
  RelationArray out = alloc_relation(m, schema, A.cells.count * B.cells.count);
  out.concise = A.concise && B.concise;
  m.step(A.cells.count * B.cells.count, [&](Step& s, u64 p) {
    const u64 g = p - 1;
    const u64 i = g / B.cells.count, j = g % B.cells.count;
    if (!s.read(A.cells.h, A.cells.word_of(i, 0))) return;
    if (!s.read(B.cells.h, B.cells.word_of(j, 0))) return;
    for (size_t f = 0; f < acols.size(); ++f) {
      const word a = s.read(A.cells.h, A.cells.word_of(i, A.payload(acols[f])));
      const word b = s.read(B.cells.h, B.cells.word_of(j, B.payload(bcols[f])));
      if (!db.eq(a, b)) return;
    }
    s.charge(acols.size());
    s.write(out.cells.h, out.cells.word_of(g, 0), 1);
    for (u64 f = 0; f < A.arity(); ++f)
      s.write(out.cells.h, out.cells.word_of(g, out.payload(f)),
              s.read(A.cells.h, A.cells.word_of(i, A.payload(f))));
    for (size_t f = 0; f < brest.size(); ++f)
      s.write(out.cells.h, out.cells.word_of(g, out.payload(A.arity() + f)),
              s.read(B.cells.h, B.cells.word_of(j, B.payload(brest[f]))));
    s.charge(A.arity() + brest.size());
  });
  RelationArray packed = compact_rel(m, out, lambda, eps);
  m.release(out.cells.h);
  return packed;
}

}  // namespace detail

inline RelationArray join(Machine& m, const Database& db, RelationArray& A,
                          RelationArray& B, JoinVariant variant,
                          const Ratio& lambda, const Ratio& eps) {
  if (variant == JoinVariant::Naive)
    return detail::join_naive(m, db, A, B, lambda, eps);
  std::vector<std::string> X = detail::common_attrs(A.schema, B.schema);

  // 1. semijoin both ways to restrict to participating tuples
  switch (variant) {
    case JoinVariant::DictionaryHash:
      detail::require_dictionary(db, "join (hash variant)");
      search_tuples_dict(m, db, A, B, X);
      search_tuples_dict(m, db, B, A, X);
      break;
    case JoinVariant::OrderedIntoOther:
      X = detail::align_to_order(X, B.ordered_by);
      search_ordered_into_B(m, db, A, B, X, eps);
      search_ordered_into_B(m, db, B, A,
                            detail::align_to_order(X, A.ordered_by), eps);
      break;
    case JoinVariant::OrderedIntoSelf:
      X = detail::align_to_order(X, B.ordered_by);
      search_ordered_into_A(m, db, B, A, X, eps);  // fills both sides
      break;
    case JoinVariant::Naive:
      break;
  }
  RelationArray a1tmp = detail::clone_where_partner(m, A, true);
  RelationArray A1 = compact_rel(m, a1tmp, lambda, eps);
  m.release(a1tmp.cells.h);
  RelationArray b1tmp = detail::clone_where_partner(m, B, true);

  // 2. B1: the surviving B tuples, X-ordered with equal-X groups contiguous.
  // The sort runs on the uncompacted clone: its length is the input size, so
  // the sort's range exponent does not depend on intermediate cardinalities.
  RelationArray B1;
  if (variant == JoinVariant::DictionaryHash) {
    B1 = sort_rel(m, db, b1tmp, X, lambda, eps);
    m.release(b1tmp.cells.h);
  } else {
    detail::require_x_ordered(B, X);  // inherited by the clone
    B1 = b1tmp;  // gaps are fine, the group logic links across them
  }
  const auto b1x = detail::cols_of(B1.schema, X);

  // 3. group boundaries within B1, stored in every inhabited cell
  {
    ArrayHandle pred = predecessor_links(m, B1.cells, eps);
    ArrayHandle succ = successor_links(m, B1.cells, eps);
    ArrayHandle startm = m.allocate(B1.cells.count);
    ArrayHandle endm = m.allocate(B1.cells.count);
    auto xeq = [&](Step& s, u64 i, u64 j) {
      for (u64 c : b1x) {
        const word x = s.read(B1.cells.h, B1.cells.word_of(i, B1.payload(c)));
        const word y = s.read(B1.cells.h, B1.cells.word_of(j, B1.payload(c)));
        if (!db.eq(x, y)) return false;
      }
      s.charge(b1x.size());
      return true;
    };
    m.step(B1.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(B1.cells.h, B1.cells.word_of(i, 0))) return;
      const u64 pr = s.read(pred, i);
      if (pr == 0 || !xeq(s, i, pr - 1)) s.write(startm, i, 1);
      const u64 su = s.read(succ, i);
      if (su == 0 || !xeq(s, i, su - 1)) s.write(endm, i, 1);
    });
    CellView sv{startm, B1.cells.count, 1, 0};
    CellView ev{endm, B1.cells.count, 1, 0};
    ArrayHandle lo = predecessor_links(m, sv, eps);
    ArrayHandle hi = successor_links(m, ev, eps);
    m.step(B1.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(B1.cells.h, B1.cells.word_of(i, 0))) return;
      const u64 glo = s.read(startm, i) ? i + 1 : s.read(lo, i);
      const u64 ghi = s.read(endm, i) ? i + 1 : s.read(hi, i);
      s.write(B1.cells.h, B1.cells.word_of(i, B1.link(kGroupLo)), glo);
      s.write(B1.cells.h, B1.cells.word_of(i, B1.link(kGroupHi)), ghi);
    });
    // B2: one cell per distinct X value (the run starts), boundaries included
    m.release(pred);
    m.release(succ);
    m.release(lo);
    m.release(hi);
    // keep startm for the B2 clone below
    m.release(endm);
    // stash run-start marks into the partner slot temporarily? no: build B2
    // from a flag-filtered clone right here
    RelationArray b2tmp = alloc_relation(m, B1.schema, B1.cells.count);
    b2tmp.ordered_by = B1.ordered_by;
    b2tmp.fully_ordered = B1.fully_ordered;
    const u64 stride = B1.cells.stride;
    m.step(B1.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(B1.cells.h, B1.cells.word_of(i, 0))) return;
      if (!s.read(startm, i)) return;
      for (u64 f = 0; f < stride; ++f)
        s.write(b2tmp.cells.h, b2tmp.cells.word_of(i, f),
                s.read(B1.cells.h, B1.cells.word_of(i, f)));
      s.charge(stride);
    });
    m.release(startm);
    RelationArray B2 = compact_rel(m, b2tmp, lambda, eps);
    m.release(b2tmp.cells.h);

    // 4. each A1 tuple locates its group through B2
    if (db.setting() == Setting::dictionary) {
      search_tuples_dict(m, db, A1, B2, X);
    } else {
      search_ordered_into_B(m, db, A1, B2, X, eps);
    }
    m.step(A1.cells.count, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (!s.read(A1.cells.h, A1.cells.word_of(i, 0))) return;
      const u64 part = s.read(A1.cells.h, A1.cells.word_of(i, A1.link(kPartner)));
      u64 glo = 0, ghi = 0;
      if (part != 0) {
        glo = s.read(B2.cells.h, B2.cells.word_of(part - 1, B2.link(kGroupLo)));
        ghi = s.read(B2.cells.h, B2.cells.word_of(part - 1, B2.link(kGroupHi)));
      }
      s.write(A1.cells.h, A1.cells.word_of(i, A1.link(kGroupLo)), glo);
      s.write(A1.cells.h, A1.cells.word_of(i, A1.link(kGroupHi)), ghi);
    });
    m.release(B2.cells.h);
  }

  // 5. rank the inhabited cells of B1 (one global scan)
  ArrayHandle flags = m.allocate(B1.cells.count);
  m.step(B1.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (s.read(B1.cells.h, B1.cells.word_of(i, 0))) s.write(flags, i, 1);
  });
  ArrayHandle rank = approx_prefix_sums(m, flags, lambda, eps);
  const u64 b1_total =
      B1.cells.count > 0 ? m.host_read(rank, B1.cells.count - 1) : 0;
  ArrayHandle inv = m.allocate(b1_total);
  m.step(B1.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(B1.cells.h, B1.cells.word_of(i, 0))) return;
    s.write(inv, s.read(rank, i) - 1, i);
  });

  // 6. task multiplicities: the size of each A1 tuple's group
  CellView tasks{m.allocate(3 * A1.cells.count), A1.cells.count, 3, 0};
  m.step(A1.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(A1.cells.h, A1.cells.word_of(i, 0))) return;
    const u64 glo = s.read(A1.cells.h, A1.cells.word_of(i, A1.link(kGroupLo)));
    const u64 ghi = s.read(A1.cells.h, A1.cells.word_of(i, A1.link(kGroupHi)));
    s.write(tasks.h, tasks.word_of(i, 0), 1);
    if (glo == 0 || ghi == 0) {
      s.write(tasks.h, tasks.word_of(i, 1), 0);
      return;
    }
    const u64 base = glo > 1 ? s.read(rank, glo - 2) : 0;
    s.write(tasks.h, tasks.word_of(i, 1), s.read(rank, ghi - 1) - base);
    s.write(tasks.h, tasks.word_of(i, 2), base);
  });

  // 7. one output cell per (A1 tuple, group member) pair
  Schedule sched = schedule_cells(m, tasks, 1, lambda, eps);

  // 8. fill the output
  Schema schema = detail::join_schema(A.schema, B.schema, X);
  const auto bcols = detail::cols_of(B1.schema, X);
  std::vector<u64> brest;
  for (u64 j = 0; j < B1.arity(); ++j)
    if (std::find(bcols.begin(), bcols.end(), j) == bcols.end())
      brest.push_back(j);
  RelationArray out;
  out.schema = schema;
  out.cells = CellView{m.allocate(sched.cells.count * rel_stride(schema.arity())),
                       sched.cells.count, rel_stride(schema.arity()), 0};
  out.concise = A.concise && B.concise;
  m.step(sched.cells.count, [&](Step& s, u64 p) {
    const u64 j = p - 1;
    if (!s.read(sched.cells.h, sched.cells.word_of(j, 0))) return;
    const u64 t = s.read(sched.cells.h, sched.cells.word_of(j, Schedule::kTask)) - 1;
    const u64 lead =
        s.read(sched.cells.h, sched.cells.word_of(j, Schedule::kLead)) - 1;
    const u64 r = j - lead;
    const u64 base = s.read(tasks.h, tasks.word_of(t, 2));
    const u64 bi = s.read(inv, base + r);
    s.write(out.cells.h, out.cells.word_of(j, 0), 1);
    for (u64 f = 0; f < A.arity(); ++f)
      s.write(out.cells.h, out.cells.word_of(j, out.payload(f)),
              s.read(A1.cells.h, A1.cells.word_of(t, A1.payload(f))));
    for (size_t f = 0; f < brest.size(); ++f)
      s.write(out.cells.h, out.cells.word_of(j, out.payload(A.arity() + f)),
              s.read(B1.cells.h, B1.cells.word_of(bi, B1.payload(brest[f]))));
    s.charge(A.arity() + brest.size());
  });

  m.release(flags);
  m.release(rank);
  m.release(inv);
  m.release(tasks.h);
  m.release(sched.cells.h);
  m.release(A1.cells.h);
  m.release(B1.cells.h);
  return out;
}

}  // namespace pramql
