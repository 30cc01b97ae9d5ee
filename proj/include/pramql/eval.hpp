// Query-level evaluation over relation arrays: atom materialization, full
// reduction along join trees, Yannakakis-style evaluation of acyclic and
// free-connex queries, decomposition-guided evaluation, semijoin-algebra
// plans, and a worst-case optimal multiway join.

#pragma once

#include <limits>
#include <map>

#include "agm.hpp"
#include "dbops.hpp"

namespace pramql {

struct EvalOptions {
  Ratio lambda = ratio(1, 2);
  Ratio eps = ratio(1, 2);
  JoinVariant variant = JoinVariant::DictionaryHash;
};

struct EvalResult {
  RelationArray out;
  u64 output_count = 0;
  std::vector<u64> intermediate_sizes;  // every materialized operator result
  std::vector<u64> enumeration_sizes;   // the post-reduction phase only
  std::vector<u64> level_sizes;         // per-variable frontiers (wcoj only)
  std::vector<u64> level_lengths;       // frontier array lengths (wcoj only)
  bool size_discipline_ok = true;       // all checked sizes within size_bound
  u64 size_bound = 0;                   // the bound the evaluator promises
};

inline u64 count_rows(const Machine& m, const RelationArray& a) {
  u64 n = 0;
  for (u64 i = 0; i < a.cells.count; ++i)
    if (m.host_read(a.cells.h, a.cells.word_of(i, 0))) ++n;
  return n;
}

namespace detail {

inline bool has_attr(const Schema& s, const std::string& a) {
  return std::find(s.attrs.begin(), s.attrs.end(), a) != s.attrs.end();
}

inline u64 sat_mul(u64 a, u64 b) {
  if (a != 0 && b > std::numeric_limits<u64>::max() / a)
    return std::numeric_limits<u64>::max();
  return a * b;
}

inline u64 sat_pow(u64 a, u64 e) {
  u64 r = 1;
  for (u64 i = 0; i < e; ++i) r = sat_mul(r, a);
  return r;
}

inline bool all_within(const std::vector<u64>& sizes, u64 bound) {
  return std::all_of(sizes.begin(), sizes.end(),
                     [&](u64 s) { return s <= bound; });
}

}  // namespace detail

// Materialize an atom as an array whose attributes are the atom's distinct
// variables; a repeated variable acts as an equality selection.
inline RelationArray materialize_atom(Machine& m, const Database& db,
                                      const Atom& atom, const Ratio& lambda,
                                      const Ratio& eps) {
  const u64 id = db.relation_id(atom.rel);
  const HostRelation& hr = db.relation(id);
  if (hr.schema.arity() != atom.args.size())
    throw fault(fault_kind::schema,
                "atom " + atom.rel + " has arity " +
                    std::to_string(atom.args.size()) + ", relation has " +
                    std::to_string(hr.schema.arity()));
  RelationArray a = make_array(m, db, id);

  std::vector<std::string> vars;
  std::vector<u64> first;
  for (size_t i = 0; i < atom.args.size(); ++i)
    if (std::find(vars.begin(), vars.end(), atom.args[i]) == vars.end()) {
      vars.push_back(atom.args[i]);
      first.push_back(i);
    }
  const bool repeats = vars.size() != atom.args.size();
  if (repeats)
    for (size_t i = 0; i < atom.args.size(); ++i)
      for (size_t j = i + 1; j < atom.args.size(); ++j)
        if (atom.args[i] == atom.args[j] &&
            std::find(atom.args.begin(), atom.args.begin() + j,
                      atom.args[j]) == atom.args.begin() + i) {
          RelationArray sel = selection_eq(m, db, a, hr.schema.attrs[i],
                                           hr.schema.attrs[j], lambda, eps);
          m.release(a.cells.h);
          a = sel;
        }

  // declared order, renamed to variables (dropping repeated occurrences
  // keeps it valid: a duplicated column never affects lexicographic order)
  std::vector<std::string> order;
  for (const auto& oa : a.ordered_by) {
    auto it = std::find(hr.schema.attrs.begin(), hr.schema.attrs.end(), oa);
    const std::string v = atom.args[it - hr.schema.attrs.begin()];
    if (std::find(order.begin(), order.end(), v) == order.end())
      order.push_back(v);
  }
  Schema schema{atom.rel, vars};
  if (!repeats) {
    a.schema = schema;
    a.ordered_by = order;
    return a;
  }
  RelationArray out = alloc_relation(m, schema, a.cells.count);
  out.ordered_by = order;
  out.fully_ordered = a.fully_ordered;
  out.concise = a.concise;  // dropped columns equal kept ones
  m.step(a.cells.count, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(a.cells.h, a.cells.word_of(i, 0))) return;
    s.write(out.cells.h, out.cells.word_of(i, 0), 1);
    for (size_t j = 0; j < first.size(); ++j)
      s.write(out.cells.h, out.cells.word_of(i, out.payload(j)),
              s.read(a.cells.h, a.cells.word_of(i, a.payload(first[j]))));
    s.charge(first.size());
  });
  m.release(a.cells.h);
  return out;
}

namespace detail {

inline std::vector<int> bfs_order(const JoinTree& t) {
  std::vector<int> order{t.root};
  for (size_t k = 0; k < order.size(); ++k)
    for (int w : t.children[order[k]]) order.push_back(w);
  return order;
}

// One bottom-up and one top-down semijoin pass along the tree; afterwards
// every tuple of every relation takes part in some solution of the full join.
inline void reduce_tree(Machine& m, const Database& db,
                        std::vector<RelationArray>& rels, const JoinTree& t,
                        const EvalOptions& o, std::vector<u64>* sizes) {
  const std::vector<int> order = bfs_order(t);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int w : t.children[*it]) {
      RelationArray r = semijoin(m, db, rels[*it], rels[w], o.lambda, o.eps);
      m.release(rels[*it].cells.h);
      rels[*it] = r;
      if (sizes) sizes->push_back(count_rows(m, rels[*it]));
    }
  for (int v : order)
    for (int w : t.children[v]) {
      RelationArray r = semijoin(m, db, rels[w], rels[v], o.lambda, o.eps);
      m.release(rels[w].cells.h);
      rels[w] = r;
      if (sizes) sizes->push_back(count_rows(m, rels[w]));
    }
}

// Merge a child into its parent: semijoin when the child brings no new free
// variables, otherwise join and project to the parent's attributes plus the
// child's free ones. Consumes the child.
inline void merge_into(Machine& m, const Database& db, RelationArray& v,
                       RelationArray& w, const std::set<std::string>& free,
                       const EvalOptions& o, std::vector<u64>& sizes) {
  std::vector<std::string> extras;
  for (const auto& a : w.schema.attrs)
    if (free.count(a) && !has_attr(v.schema, a)) extras.push_back(a);
  if (extras.empty()) {
    RelationArray r = semijoin(m, db, v, w, o.lambda, o.eps);
    m.release(v.cells.h);
    v = r;
  } else {
    RelationArray j = join(m, db, v, w, o.variant, o.lambda, o.eps);
    std::vector<std::string> target = v.schema.attrs;
    target.insert(target.end(), extras.begin(), extras.end());
    m.release(v.cells.h);
    if (target.size() == j.schema.attrs.size()) {
      v = j;  // every surviving column is wanted, in this order already
    } else {
      sizes.push_back(count_rows(m, j));
      v = projection(m, db, j, target, o.lambda, o.eps, true);
      m.release(j.cells.h);
    }
  }
  sizes.push_back(count_rows(m, v));
  m.release(w.cells.h);
}

// Collapse the whole tree into its root, children first.
inline RelationArray collapse_tree(Machine& m, const Database& db,
                                   std::vector<RelationArray>& rels,
                                   const JoinTree& t,
                                   const std::set<std::string>& free,
                                   const EvalOptions& o,
                                   std::vector<u64>& sizes) {
  const std::vector<int> order = bfs_order(t);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int w : t.children[*it])
      merge_into(m, db, rels[*it], rels[w], free, o, sizes);
  return rels[t.root];
}

// Join a family of relations: along their own join tree when the attribute
// hypergraph is acyclic (merges then stay connected and small), otherwise
// by a plain left-to-right fold. Consumes the inputs.
inline RelationArray join_all(Machine& m, const Database& db,
                              std::vector<RelationArray>& rels,
                              const EvalOptions& o, std::vector<u64>& sizes) {
  if (rels.size() == 1) return rels[0];
  std::vector<std::set<std::string>> vs;
  std::set<std::string> all;
  for (const auto& r : rels) {
    vs.emplace_back(r.schema.attrs.begin(), r.schema.attrs.end());
    all.insert(r.schema.attrs.begin(), r.schema.attrs.end());
  }
  if (auto t = gyo(vs)) {
    reduce_tree(m, db, rels, *t, o, &sizes);
    return collapse_tree(m, db, rels, *t, all, o, sizes);
  }
  RelationArray cur = rels[0];
  for (size_t i = 1; i < rels.size(); ++i) {
    RelationArray nxt = join(m, db, cur, rels[i], o.variant, o.lambda, o.eps);
    m.release(cur.cells.h);
    m.release(rels[i].cells.h);
    cur = nxt;
    sizes.push_back(count_rows(m, cur));
  }
  return cur;
}

// Enumeration along a tree whose extra root node (index rels.size()) stands
// for the free variables: collapse every subtree below it, project each to
// its free variables, and join the parts along their own tree. Consumes the
// relations; every recorded size is bounded by the output size.
inline RelationArray connex_enumerate(Machine& m, const Database& db,
                                      std::vector<RelationArray>& rels,
                                      const JoinTree& at,
                                      const std::vector<std::string>& freev,
                                      const EvalOptions& o,
                                      std::vector<u64>& sizes) {
  const int head = static_cast<int>(rels.size());
  const std::set<std::string> free(freev.begin(), freev.end());
  const std::vector<int> order = bfs_order(at);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (*it == head) continue;
    for (int w : at.children[*it])
      merge_into(m, db, rels[*it], rels[w], free, o, sizes);
  }
  std::vector<RelationArray> parts;
  for (int c : at.children[head]) {
    std::vector<std::string> fc;
    for (const auto& a : freev)
      if (has_attr(rels[c].schema, a)) fc.push_back(a);
    RelationArray p = projection(m, db, rels[c], fc, o.lambda, o.eps, true);
    m.release(rels[c].cells.h);
    sizes.push_back(count_rows(m, p));
    parts.push_back(p);
  }
  if (parts.empty()) {
    // no subtree below the head: the query is boolean over an empty body,
    // which the parsers exclude; guard anyway
    throw fault(fault_kind::decomposition, "enumeration tree has no parts");
  }
  RelationArray joined = join_all(m, db, parts, o, sizes);
  RelationArray out = projection(m, db, joined, freev, o.lambda, o.eps, true);
  m.release(joined.cells.h);
  sizes.push_back(count_rows(m, out));
  return out;
}

}  // namespace detail

// Full reduction: materialized atoms with exactly the tuples that take part
// in some solution of the full join.
inline std::vector<RelationArray> full_reduction(Machine& m, const Database& db,
                                                 const Query& q,
                                                 const EvalOptions& o = {}) {
  auto t = gyo_join_tree(q);
  if (!t)
    throw fault(fault_kind::decomposition,
                "full reduction needs an acyclic query");
  std::vector<RelationArray> rels;
  for (const auto& a : q.atoms)
    rels.push_back(materialize_atom(m, db, a, o.lambda, o.eps));
  detail::reduce_tree(m, db, rels, *t, o, nullptr);
  return rels;
}

// ---------------------------------------------------------------------------
// Acyclic queries: full reduction, then bottom-up merges along the join tree.
// ---------------------------------------------------------------------------
inline EvalResult eval_acyclic(Machine& m, const Database& db, const Query& q,
                               const EvalOptions& o = {}) {
  auto t = gyo_join_tree(q);
  if (!t)
    throw fault(fault_kind::decomposition, "query " + q.head + " is cyclic");
  EvalResult res;
  std::vector<RelationArray> rels;
  u64 in = 0;
  for (const auto& a : q.atoms) {
    rels.push_back(materialize_atom(m, db, a, o.lambda, o.eps));
    res.intermediate_sizes.push_back(count_rows(m, rels.back()));
    in += res.intermediate_sizes.back();
  }
  detail::reduce_tree(m, db, rels, *t, o, &res.intermediate_sizes);
  const std::set<std::string> free(q.free.begin(), q.free.end());
  RelationArray root =
      detail::collapse_tree(m, db, rels, *t, free, o, res.intermediate_sizes);
  res.out = projection(m, db, root, q.free, o.lambda, o.eps, true);
  m.release(root.cells.h);
  res.output_count = count_rows(m, res.out);
  res.intermediate_sizes.push_back(res.output_count);
  // every intermediate must fit within the input-output product
  res.size_bound = detail::sat_mul(in, std::max<u64>(res.output_count, 1));
  res.size_discipline_ok =
      detail::all_within(res.intermediate_sizes, res.size_bound);
  return res;
}

// ---------------------------------------------------------------------------
// Free-connex queries: after full reduction, the subtrees hanging below the
// head bag collapse independently; their projections to the free variables
// join along their own tree, so every intermediate stays within the output.
// ---------------------------------------------------------------------------
inline EvalResult eval_free_connex(Machine& m, const Database& db,
                                   const Query& q, const EvalOptions& o = {}) {
  auto pt = gyo_join_tree(q);
  auto at = gyo_join_tree_with_head(q);
  if (!pt || !at)
    throw fault(fault_kind::decomposition,
                "query " + q.head + " is not free-connex");
  EvalResult res;
  std::vector<RelationArray> rels;
  for (const auto& a : q.atoms) {
    rels.push_back(materialize_atom(m, db, a, o.lambda, o.eps));
    res.intermediate_sizes.push_back(count_rows(m, rels.back()));
  }
  detail::reduce_tree(m, db, rels, *pt, o, &res.intermediate_sizes);
  res.out = detail::connex_enumerate(m, db, rels, *at, q.free, o,
                                     res.enumeration_sizes);
  res.output_count = count_rows(m, res.out);
  res.intermediate_sizes.insert(res.intermediate_sizes.end(),
                                res.enumeration_sizes.begin(),
                                res.enumeration_sizes.end());
  // every enumeration-phase intermediate must fit within the output
  res.size_bound = res.output_count;
  res.size_discipline_ok =
      detail::all_within(res.enumeration_sizes, res.size_bound);
  return res;
}

// ---------------------------------------------------------------------------
// Decomposition-guided evaluation: one relation per bag (join of its atoms,
// projected to the bag), then acyclic evaluation along the decomposition tree.
// ---------------------------------------------------------------------------
namespace detail {

inline JoinTree ghd_tree(const GHD& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : g.edges) {
    const int ia = g.index_of(a), ib = g.index_of(b);
    adj[ia].push_back(ib);
    adj[ib].push_back(ia);
  }
  JoinTree t;
  t.parent.assign(n, -1);
  t.children.assign(n, {});
  t.root = g.index_of(g.root);
  std::vector<int> stack{t.root};
  std::vector<bool> seen(n, false);
  seen[t.root] = true;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        t.parent[w] = v;
        t.children[v].push_back(w);
        stack.push_back(w);
      }
  }
  return t;
}

}  // namespace detail

inline EvalResult eval_ghd(Machine& m, const Database& db, const Query& q,
                           const GHD& g, const EvalOptions& o = {}) {
  verify_ghd(g, q);
  EvalResult res;
  std::vector<RelationArray> mats;
  u64 in = 0;
  for (const auto& a : q.atoms) {
    mats.push_back(materialize_atom(m, db, a, o.lambda, o.eps));
    res.intermediate_sizes.push_back(count_rows(m, mats.back()));
    in += res.intermediate_sizes.back();
  }
  // each bag joins its mu atoms; every atom additionally joins in some bag
  // that covers it, so no constraint is lost to a projection
  std::vector<std::vector<int>> bag_atoms(g.nodes.size());
  for (size_t v = 0; v < g.nodes.size(); ++v) bag_atoms[v] = g.nodes[v].mu;
  for (size_t ai = 0; ai < q.atoms.size(); ++ai) {
    const auto av = q.atoms[ai].vars();
    for (size_t v = 0; v < g.nodes.size(); ++v) {
      std::set<std::string> bag(g.nodes[v].chi.begin(), g.nodes[v].chi.end());
      if (!std::includes(bag.begin(), bag.end(), av.begin(), av.end()))
        continue;
      if (std::find(bag_atoms[v].begin(), bag_atoms[v].end(),
                    static_cast<int>(ai)) == bag_atoms[v].end())
        bag_atoms[v].push_back(static_cast<int>(ai));
      break;
    }
  }
  u64 width = 1;
  for (const auto& atoms : bag_atoms)
    width = std::max<u64>(width, atoms.size());
  std::vector<u64> bag_sizes;
  std::vector<RelationArray> bags;
  for (size_t v = 0; v < g.nodes.size(); ++v) {
    const auto& atoms = bag_atoms[v];
    if (atoms.empty())
      throw fault(fault_kind::decomposition, "bag with no atoms");
    RelationArray bag;
    if (atoms.size() == 1) {
      bag = projection(m, db, mats[atoms[0]], g.nodes[v].chi, o.lambda, o.eps,
                       true);
    } else {
      RelationArray acc = join(m, db, mats[atoms[0]], mats[atoms[1]],
                               o.variant, o.lambda, o.eps);
      bag_sizes.push_back(count_rows(m, acc));
      for (size_t i = 2; i < atoms.size(); ++i) {
        RelationArray nxt =
            join(m, db, acc, mats[atoms[i]], o.variant, o.lambda, o.eps);
        m.release(acc.cells.h);
        acc = nxt;
        bag_sizes.push_back(count_rows(m, acc));
      }
      bag = projection(m, db, acc, g.nodes[v].chi, o.lambda, o.eps, true);
      m.release(acc.cells.h);
    }
    bag_sizes.push_back(count_rows(m, bag));
    bags.push_back(bag);
  }
  for (auto& a : mats) m.release(a.cells.h);
  res.intermediate_sizes.insert(res.intermediate_sizes.end(),
                                bag_sizes.begin(), bag_sizes.end());
  // bag-phase intermediates must fit within the width-fold input product
  res.size_bound = detail::sat_pow(in, width);
  res.size_discipline_ok = detail::all_within(bag_sizes, res.size_bound);

  const JoinTree t = detail::ghd_tree(g);
  detail::reduce_tree(m, db, bags, t, o, &res.intermediate_sizes);

  // when the bag hypergraph stays acyclic with a bag over the free variables
  // added, enumerate connex-style so the tree phase stays within the output
  std::vector<std::set<std::string>> vs;
  for (const auto& node : g.nodes)
    vs.emplace_back(node.chi.begin(), node.chi.end());
  vs.emplace_back(q.free.begin(), q.free.end());
  auto at = detail::gyo(vs);
  const JoinTree rooted =
      at ? detail::reroot(*at, static_cast<int>(bags.size())) : JoinTree{};
  if (at && !rooted.children[bags.size()].empty()) {
    res.out = detail::connex_enumerate(m, db, bags, rooted, q.free, o,
                                       res.enumeration_sizes);
    res.output_count = count_rows(m, res.out);
    res.intermediate_sizes.insert(res.intermediate_sizes.end(),
                                  res.enumeration_sizes.begin(),
                                  res.enumeration_sizes.end());
    res.size_discipline_ok =
        res.size_discipline_ok &&
        detail::all_within(res.enumeration_sizes, res.output_count);
    return res;
  }
  const std::set<std::string> free(q.free.begin(), q.free.end());
  RelationArray root =
      detail::collapse_tree(m, db, bags, t, free, o, res.intermediate_sizes);
  res.out = projection(m, db, root, q.free, o.lambda, o.eps, true);
  m.release(root.cells.h);
  res.output_count = count_rows(m, res.out);
  res.intermediate_sizes.push_back(res.output_count);
  return res;
}

// ---------------------------------------------------------------------------
// Semijoin-algebra plans.
// ---------------------------------------------------------------------------
namespace detail {

inline RelationArray eval_plan_node(Machine& m, const Database& db,
                                    const Plan& p, const EvalOptions& o,
                                    std::vector<u64>& sizes) {
  if (p.kind == Plan::Kind::relation) {
    RelationArray a = make_array(m, db, db.relation_id(p.name));
    sizes.push_back(count_rows(m, a));
    return a;
  }
  RelationArray l = eval_plan_node(m, db, p.kids[0], o, sizes);
  RelationArray out;
  switch (p.kind) {
    case Plan::Kind::project:
      out = projection(m, db, l, p.args, o.lambda, o.eps, true);
      m.release(l.cells.h);
      break;
    case Plan::Kind::select:
      out = selection_const(m, db, l, p.args[0], p.args[1], o.lambda, o.eps);
      m.release(l.cells.h);
      break;
    case Plan::Kind::seleq:
      out = selection_eq(m, db, l, p.args[0], p.args[1], o.lambda, o.eps);
      m.release(l.cells.h);
      break;
    case Plan::Kind::rename: {
      out = l;  // same cells, one attribute relabeled
      auto it = std::find(out.schema.attrs.begin(), out.schema.attrs.end(),
                          p.args[0]);
      if (it == out.schema.attrs.end())
        throw fault(fault_kind::schema,
                    "rename: no attribute " + p.args[0]);
      if (has_attr(out.schema, p.args[1]))
        throw fault(fault_kind::schema,
                    "rename: attribute " + p.args[1] + " already present");
      *it = p.args[1];
      for (auto& a : out.ordered_by)
        if (a == p.args[0]) a = p.args[1];
      break;
    }
    default: {
      RelationArray r = eval_plan_node(m, db, p.kids[1], o, sizes);
      if (p.kind == Plan::Kind::sjoin)
        out = semijoin(m, db, l, r, o.lambda, o.eps);
      else if (p.kind == Plan::Kind::diff)
        out = difference(m, db, l, r, o.lambda, o.eps);
      else
        out = set_union(m, db, l, r, o.lambda, o.eps);
      m.release(l.cells.h);
      m.release(r.cells.h);
      break;
    }
  }
  sizes.push_back(count_rows(m, out));
  return out;
}

}  // namespace detail

inline EvalResult eval_semijoin_plan(Machine& m, const Database& db,
                                     const Plan& p,
                                     const EvalOptions& o = {}) {
  EvalResult res;
  res.out = detail::eval_plan_node(m, db, p, o, res.intermediate_sizes);
  res.output_count = count_rows(m, res.out);
  return res;
}

// ---------------------------------------------------------------------------
// Worst-case optimal join: variables are bound one at a time; each frontier
// tuple draws candidates from its smallest group among the relations that
// contain the new variable, then every such relation filters the candidates.
// ---------------------------------------------------------------------------
namespace detail {

struct LevelGroup {
  const RelationArray* prel = nullptr;  // the sorted prefix projection
  u64 acol = 0;                         // column of the new variable in it
  ArrayHandle glo{}, ghi{};             // per frontier tuple, bounds (index+1)
  ArrayHandle rank{};                   // prefix ranks over its cells
  ArrayHandle inv{};                    // rank-1 -> cell index
};

// Group the cells of P by its key columns K (runs are contiguous, possibly
// with gaps), then give every frontier tuple of L its group bounds in P.
inline LevelGroup build_group_index(Machine& m, const Database& db,
                                    RelationArray& P,
                                    const std::vector<std::string>& K,
                                    RelationArray& L, const EvalOptions& o) {
  LevelGroup lg;
  lg.prel = &P;
  const auto kcols = cols_of(P.schema, K);
  const u64 n = P.cells.count;
  ArrayHandle pred = predecessor_links(m, P.cells, o.eps);
  ArrayHandle succ = successor_links(m, P.cells, o.eps);
  ArrayHandle startm = m.allocate(n);
  ArrayHandle endm = m.allocate(n);
  auto keq = [&](Step& s, u64 i, u64 j) {
    for (u64 c : kcols) {
      const word x = s.read(P.cells.h, P.cells.word_of(i, P.payload(c)));
      const word y = s.read(P.cells.h, P.cells.word_of(j, P.payload(c)));
      if (!db.eq(x, y)) return false;
    }
    s.charge(kcols.size());
    return true;
  };
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(P.cells.h, P.cells.word_of(i, 0))) return;
    const u64 pr = s.read(pred, i);
    if (pr == 0 || !keq(s, i, pr - 1)) s.write(startm, i, 1);
    const u64 su = s.read(succ, i);
    if (su == 0 || !keq(s, i, su - 1)) s.write(endm, i, 1);
  });
  CellView sv{startm, n, 1, 0};
  CellView ev{endm, n, 1, 0};
  ArrayHandle lo = predecessor_links(m, sv, o.eps);
  ArrayHandle hi = successor_links(m, ev, o.eps);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(P.cells.h, P.cells.word_of(i, 0))) return;
    s.write(P.cells.h, P.cells.word_of(i, P.link(kGroupLo)),
            s.read(startm, i) ? i + 1 : s.read(lo, i));
    s.write(P.cells.h, P.cells.word_of(i, P.link(kGroupHi)),
            s.read(endm, i) ? i + 1 : s.read(hi, i));
  });
  m.release(pred);
  m.release(succ);
  m.release(lo);
  m.release(hi);
  // one representative cell per group, boundaries carried along
  RelationArray p2tmp = alloc_relation(m, P.schema, n);
  const u64 stride = P.cells.stride;
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(P.cells.h, P.cells.word_of(i, 0))) return;
    if (!s.read(startm, i)) return;
    for (u64 f = 0; f < stride; ++f)
      s.write(p2tmp.cells.h, p2tmp.cells.word_of(i, f),
              s.read(P.cells.h, P.cells.word_of(i, f)));
    s.charge(stride);
  });
  m.release(startm);
  m.release(endm);
  RelationArray P2 = compact_rel(m, p2tmp, o.lambda, o.eps);
  m.release(p2tmp.cells.h);

  search_tuples_dict(m, db, L, P2, K);
  lg.glo = m.allocate(L.cells.count);
  lg.ghi = m.allocate(L.cells.count);
  m.step(L.cells.count, [&](Step& s, u64 p) {
    const u64 t = p - 1;
    if (!s.read(L.cells.h, L.cells.word_of(t, 0))) return;
    const u64 part = s.read(L.cells.h, L.cells.word_of(t, L.link(kPartner)));
    if (part != 0) {
      s.write(lg.glo, t,
              s.read(P2.cells.h, P2.cells.word_of(part - 1, P2.link(kGroupLo))));
      s.write(lg.ghi, t,
              s.read(P2.cells.h, P2.cells.word_of(part - 1, P2.link(kGroupHi))));
    }
  });
  m.release(P2.cells.h);

  ArrayHandle flags = m.allocate(n);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (s.read(P.cells.h, P.cells.word_of(i, 0))) s.write(flags, i, 1);
  });
  lg.rank = approx_prefix_sums(m, flags, o.lambda, o.eps);
  const u64 total = n > 0 ? m.host_read(lg.rank, n - 1) : 0;
  lg.inv = m.allocate(total);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    if (!s.read(P.cells.h, P.cells.word_of(i, 0))) return;
    s.write(lg.inv, s.read(lg.rank, i) - 1, i);
  });
  m.release(flags);
  return lg;
}

}  // namespace detail

inline EvalResult wcoj(Machine& m, const Database& db, const Query& q,
                       std::vector<std::string> attr_order = {},
                       const EvalOptions& o = {}) {
  detail::require_dictionary(db, "wcoj");
  const std::set<std::string> allv = q.all_vars();
  if (std::set<std::string>(q.free.begin(), q.free.end()) != allv)
    throw fault(fault_kind::parameter,
                "wcoj requires every body variable to be free");
  if (attr_order.empty())
    for (const auto& a : q.atoms)
      for (const auto& v : a.args)
        if (std::find(attr_order.begin(), attr_order.end(), v) ==
            attr_order.end())
          attr_order.push_back(v);
  if (std::set<std::string>(attr_order.begin(), attr_order.end()) != allv ||
      attr_order.size() != allv.size())
    throw fault(fault_kind::parameter,
                "wcoj needs an ordering of exactly the body variables");
  const size_t k = attr_order.size();

  EvalResult res;
  std::vector<RelationArray> mats;
  for (const auto& a : q.atoms) {
    mats.push_back(materialize_atom(m, db, a, o.lambda, o.eps));
    res.intermediate_sizes.push_back(count_rows(m, mats.back()));
  }

  // sorted prefix projections, per (atom, level) where the variable occurs
  std::map<std::pair<size_t, size_t>, RelationArray> P;
  for (size_t j = 1; j <= k; ++j)
    for (size_t i = 0; i < q.atoms.size(); ++i) {
      if (!detail::has_attr(mats[i].schema, attr_order[j - 1])) continue;
      std::vector<std::string> Y;
      for (size_t l = 0; l < j; ++l)
        if (detail::has_attr(mats[i].schema, attr_order[l]))
          Y.push_back(attr_order[l]);
      RelationArray proj = projection(m, db, mats[i], Y, o.lambda, o.eps, true);
      P.emplace(std::make_pair(i, j),
                sort_rel(m, db, proj, Y, o.lambda, o.eps));
      m.release(proj.cells.h);
    }
  for (auto& a : mats) m.release(a.cells.h);

  auto rels_at = [&](size_t j) {
    std::vector<size_t> out;
    for (size_t i = 0; i < q.atoms.size(); ++i)
      if (q.atoms[i].vars().count(attr_order[j - 1])) out.push_back(i);
    return out;
  };

  // level 1: values of the first variable present in every relation holding it
  const std::vector<size_t> r1 = rels_at(1);
  RelationArray L = detail::clone_rel(m, P.at({r1[0], 1}));
  for (size_t idx = 1; idx < r1.size(); ++idx) {
    RelationArray r = semijoin(m, db, L, P.at({r1[idx], 1}), o.lambda, o.eps);
    m.release(L.cells.h);
    L = r;
  }
  res.level_sizes.push_back(count_rows(m, L));
  res.level_lengths.push_back(L.cells.count);
  res.intermediate_sizes.push_back(res.level_sizes.back());

  for (size_t j = 2; j <= k; ++j) {
    const std::vector<size_t> rj = rels_at(j);
    std::vector<detail::LevelGroup> gis;
    for (size_t i : rj) {
      RelationArray& Pi = P.at({i, j});
      std::vector<std::string> K = Pi.schema.attrs;
      K.pop_back();  // the new variable sorts last within the prefix
      gis.push_back(detail::build_group_index(m, db, Pi, K, L, o));
    }
    // each frontier tuple takes its smallest group as candidate source
    const u64 nL = L.cells.count;
    CellView tasks{m.allocate(3 * nL), nL, 3, 0};
    ArrayHandle chosen = m.allocate(nL);
    m.step(nL, [&](Step& s, u64 p) {
      const u64 t = p - 1;
      if (!s.read(L.cells.h, L.cells.word_of(t, 0))) return;
      u64 best = std::numeric_limits<u64>::max(), bi = 0;
      for (size_t gx = 0; gx < gis.size(); ++gx) {
        const u64 glo = s.read(gis[gx].glo, t), ghi = s.read(gis[gx].ghi, t);
        u64 sz = 0;
        if (glo != 0 && ghi != 0) {
          const u64 base = glo > 1 ? s.read(gis[gx].rank, glo - 2) : 0;
          sz = s.read(gis[gx].rank, ghi - 1) - base;
        }
        if (sz < best) {
          best = sz;
          bi = gx;
        }
      }
      s.charge(gis.size());
      s.write(tasks.h, tasks.word_of(t, 0), 1);
      s.write(tasks.h, tasks.word_of(t, 1), best);
      s.write(chosen, t, bi);
    });
    Schedule sched = schedule_cells(m, tasks, 1, o.lambda, o.eps);

    std::vector<std::string> prefix(attr_order.begin(),
                                    attr_order.begin() + j);
    Schema cs{"frontier" + std::to_string(j), prefix};
    RelationArray C;
    C.schema = cs;
    C.cells = CellView{m.allocate(sched.cells.count * rel_stride(cs.arity())),
                       sched.cells.count, rel_stride(cs.arity()), 0};
    m.step(sched.cells.count, [&](Step& s, u64 p) {
      const u64 c = p - 1;
      if (!s.read(sched.cells.h, sched.cells.word_of(c, 0))) return;
      const u64 t =
          s.read(sched.cells.h, sched.cells.word_of(c, Schedule::kTask)) - 1;
      const u64 lead =
          s.read(sched.cells.h, sched.cells.word_of(c, Schedule::kLead)) - 1;
      const u64 r = c - lead;
      const detail::LevelGroup& gi = gis[s.read(chosen, t)];
      const u64 glo = s.read(gi.glo, t);
      const u64 base = glo > 1 ? s.read(gi.rank, glo - 2) : 0;
      const u64 pcell = s.read(gi.inv, base + r);
      const RelationArray& Pi = *gi.prel;
      s.write(C.cells.h, C.cells.word_of(c, 0), 1);
      for (size_t f = 0; f + 1 < j; ++f)
        s.write(C.cells.h, C.cells.word_of(c, C.payload(f)),
                s.read(L.cells.h, L.cells.word_of(t, L.payload(f))));
      s.write(C.cells.h, C.cells.word_of(c, C.payload(j - 1)),
              s.read(Pi.cells.h,
                     Pi.cells.word_of(pcell, Pi.payload(Pi.arity() - 1))));
      s.charge(j);
    });
    m.release(tasks.h);
    m.release(sched.cells.h);
    m.release(chosen);
    for (auto& gi : gis) {
      m.release(gi.glo);
      m.release(gi.ghi);
      m.release(gi.rank);
      m.release(gi.inv);
    }

    // every relation holding the new variable filters the candidates
    for (size_t i : rj) {
      RelationArray r = semijoin(m, db, C, P.at({i, j}), o.lambda, o.eps);
      m.release(C.cells.h);
      C = r;
    }
    m.release(L.cells.h);
    L = C;
    res.level_sizes.push_back(count_rows(m, L));
    res.level_lengths.push_back(L.cells.count);
    res.intermediate_sizes.push_back(res.level_sizes.back());
  }
  for (auto& [key, arr] : P) m.release(arr.cells.h);

  res.out = projection(m, db, L, q.free, o.lambda, o.eps, true);
  m.release(L.cells.h);
  res.output_count = count_rows(m, res.out);
  res.intermediate_sizes.push_back(res.output_count);
  // every frontier must fit within the padded worst-case output bound
  const std::vector<u64> atom_sizes(res.intermediate_sizes.begin(),
                                    res.intermediate_sizes.begin() +
                                        static_cast<long>(q.atoms.size()));
  const u64 agm = agm_bound(q, atom_sizes);
  const u64 den = static_cast<u64>(o.lambda.den);
  const u64 pad =
      (detail::sat_mul(agm, static_cast<u64>(o.lambda.num)) + den - 1) / den;
  res.size_bound =
      agm > std::numeric_limits<u64>::max() - pad ? agm : agm + pad;
  res.size_discipline_ok =
      detail::all_within(res.level_sizes, res.size_bound) &&
      detail::all_within(res.level_lengths, res.size_bound);
  return res;
}

}  // namespace pramql
