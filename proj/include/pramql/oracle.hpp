// Sequential reference implementations over host-side rows, used to check
// the machine-level operators and evaluators on small instances. Everything
// here is deliberately simple: std::set rows, backtracking evaluation.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "query.hpp"
#include "relstore.hpp"

namespace pramql::oracle {

using Row = std::vector<std::string>;

struct PlainRelation {
  std::vector<std::string> attrs;
  std::set<Row> rows;
};

inline PlainRelation from_db(const Database& db, const std::string& name) {
  const HostRelation& r = db.relation(db.relation_id(name));
  PlainRelation p;
  p.attrs = r.schema.attrs;
  p.rows.insert(r.rows.begin(), r.rows.end());
  return p;
}

inline std::vector<size_t> positions(const PlainRelation& r,
                                     const std::vector<std::string>& attrs) {
  std::vector<size_t> pos;
  for (const auto& a : attrs) {
    auto it = std::find(r.attrs.begin(), r.attrs.end(), a);
    if (it == r.attrs.end())
      throw fault(fault_kind::schema, "oracle: unknown attribute " + a);
    pos.push_back(it - r.attrs.begin());
  }
  return pos;
}

inline PlainRelation project(const PlainRelation& r,
                             const std::vector<std::string>& attrs) {
  PlainRelation out;
  out.attrs = attrs;
  auto pos = positions(r, attrs);
  for (const auto& row : r.rows) {
    Row nr;
    for (size_t p : pos) nr.push_back(row[p]);
    out.rows.insert(std::move(nr));
  }
  return out;
}

inline PlainRelation select_const(const PlainRelation& r,
                                  const std::string& attr,
                                  const std::string& lit) {
  PlainRelation out;
  out.attrs = r.attrs;
  size_t p = positions(r, {attr})[0];
  for (const auto& row : r.rows)
    if (row[p] == lit) out.rows.insert(row);
  return out;
}

inline PlainRelation select_eq(const PlainRelation& r, const std::string& a,
                               const std::string& b) {
  PlainRelation out;
  out.attrs = r.attrs;
  size_t pa = positions(r, {a})[0], pb = positions(r, {b})[0];
  for (const auto& row : r.rows)
    if (row[pa] == row[pb]) out.rows.insert(row);
  return out;
}

inline std::vector<std::string> common_attrs(const PlainRelation& a,
                                             const PlainRelation& b) {
  std::vector<std::string> c;
  for (const auto& x : a.attrs)
    if (std::find(b.attrs.begin(), b.attrs.end(), x) != b.attrs.end())
      c.push_back(x);
  return c;
}

inline PlainRelation natural_join(const PlainRelation& a,
                                  const PlainRelation& b) {
  auto X = common_attrs(a, b);
  auto pa = positions(a, X);
  auto pb = positions(b, X);
  PlainRelation out;
  out.attrs = a.attrs;
  std::vector<size_t> brest;
  for (size_t i = 0; i < b.attrs.size(); ++i)
    if (std::find(X.begin(), X.end(), b.attrs[i]) == X.end()) {
      out.attrs.push_back(b.attrs[i]);
      brest.push_back(i);
    }
  std::map<Row, std::vector<const Row*>> index;
  for (const auto& row : b.rows) {
    Row key;
    for (size_t p : pb) key.push_back(row[p]);
    index[key].push_back(&row);
  }
  for (const auto& row : a.rows) {
    Row key;
    for (size_t p : pa) key.push_back(row[p]);
    auto it = index.find(key);
    if (it == index.end()) continue;
    for (const Row* bm : it->second) {
      Row nr = row;
      for (size_t p : brest) nr.push_back((*bm)[p]);
      out.rows.insert(std::move(nr));
    }
  }
  return out;
}

inline PlainRelation semijoin(const PlainRelation& a, const PlainRelation& b) {
  auto X = common_attrs(a, b);
  auto pa = positions(a, X);
  auto pb = positions(b, X);
  std::set<Row> keys;
  for (const auto& row : b.rows) {
    Row key;
    for (size_t p : pb) key.push_back(row[p]);
    keys.insert(std::move(key));
  }
  PlainRelation out;
  out.attrs = a.attrs;
  for (const auto& row : a.rows) {
    Row key;
    for (size_t p : pa) key.push_back(row[p]);
    if (keys.count(key)) out.rows.insert(row);
  }
  return out;
}

inline void require_same_schema(const PlainRelation& a,
                                const PlainRelation& b) {
  if (a.attrs != b.attrs)
    throw fault(fault_kind::schema,
                "oracle: set operation on mismatched schemas");
}

inline PlainRelation difference(const PlainRelation& a,
                                const PlainRelation& b) {
  require_same_schema(a, b);
  PlainRelation out;
  out.attrs = a.attrs;
  for (const auto& row : a.rows)
    if (!b.rows.count(row)) out.rows.insert(row);
  return out;
}

inline PlainRelation set_union(const PlainRelation& a, const PlainRelation& b) {
  require_same_schema(a, b);
  PlainRelation out;
  out.attrs = a.attrs;
  out.rows = a.rows;
  out.rows.insert(b.rows.begin(), b.rows.end());
  return out;
}

// Materialize an atom: attributes renamed to its variables; a repeated
// variable within the atom acts as an equality selection.
inline PlainRelation materialize_atom(const Database& db, const Atom& atom) {
  const HostRelation& r = db.relation(db.relation_id(atom.rel));
  if (r.schema.arity() != atom.args.size())
    throw fault(fault_kind::schema,
                "atom " + atom.rel + " has arity " +
                    std::to_string(atom.args.size()) + ", relation has " +
                    std::to_string(r.schema.arity()));
  std::vector<std::string> vars;
  std::vector<size_t> first_pos;
  for (size_t i = 0; i < atom.args.size(); ++i)
    if (std::find(vars.begin(), vars.end(), atom.args[i]) == vars.end()) {
      vars.push_back(atom.args[i]);
      first_pos.push_back(i);
    }
  PlainRelation out;
  out.attrs = vars;
  for (const auto& row : r.rows) {
    bool ok = true;
    for (size_t i = 0; i < atom.args.size() && ok; ++i)
      for (size_t j = i + 1; j < atom.args.size() && ok; ++j)
        if (atom.args[i] == atom.args[j] && row[i] != row[j]) ok = false;
    if (!ok) continue;
    Row nr;
    for (size_t p : first_pos) nr.push_back(row[p]);
    out.rows.insert(std::move(nr));
  }
  return out;
}

namespace detail {

using Assignment = std::map<std::string, std::string>;

inline void backtrack(const std::vector<PlainRelation>& mats,
                      std::vector<bool>& used, Assignment& asg,
                      const std::vector<std::string>& free,
                      std::set<Row>& out) {
  // pick the unused atom with the most bound variables
  int best = -1;
  size_t best_bound = 0;
  for (size_t i = 0; i < mats.size(); ++i) {
    if (used[i]) continue;
    size_t bound = 0;
    for (const auto& v : mats[i].attrs)
      if (asg.count(v)) ++bound;
    if (best < 0 || bound > best_bound) {
      best = static_cast<int>(i);
      best_bound = bound;
    }
  }
  if (best < 0) {
    Row r;
    for (const auto& v : free) r.push_back(asg.at(v));
    out.insert(std::move(r));
    return;
  }
  used[best] = true;
  const PlainRelation& m = mats[best];
  for (const auto& row : m.rows) {
    bool ok = true;
    std::vector<std::string> added;
    for (size_t i = 0; i < m.attrs.size() && ok; ++i) {
      auto it = asg.find(m.attrs[i]);
      if (it == asg.end()) {
        asg[m.attrs[i]] = row[i];
        added.push_back(m.attrs[i]);
      } else if (it->second != row[i]) {
        ok = false;
      }
    }
    if (ok) backtrack(mats, used, asg, free, out);
    for (const auto& v : added) asg.erase(v);
  }
  used[best] = false;
}

}  // namespace detail

inline PlainRelation eval_query(const Database& db, const Query& q) {
  std::vector<PlainRelation> mats;
  for (const auto& a : q.atoms) mats.push_back(materialize_atom(db, a));
  PlainRelation out;
  out.attrs = q.free;
  std::vector<bool> used(mats.size(), false);
  detail::Assignment asg;
  detail::backtrack(mats, used, asg, q.free, out.rows);
  return out;
}

inline PlainRelation rename(const PlainRelation& r, const std::string& from,
                            const std::string& to) {
  PlainRelation out = r;
  auto it = std::find(out.attrs.begin(), out.attrs.end(), from);
  if (it == out.attrs.end())
    throw fault(fault_kind::schema, "rename: no attribute " + from);
  if (std::find(out.attrs.begin(), out.attrs.end(), to) != out.attrs.end())
    throw fault(fault_kind::schema, "rename: attribute " + to +
                                        " already present");
  *it = to;
  return out;
}

inline PlainRelation eval_plan(const Database& db, const Plan& p) {
  switch (p.kind) {
    case Plan::Kind::relation:
      return from_db(db, p.name);
    case Plan::Kind::sjoin:
      return semijoin(eval_plan(db, p.kids[0]), eval_plan(db, p.kids[1]));
    case Plan::Kind::diff:
      return difference(eval_plan(db, p.kids[0]), eval_plan(db, p.kids[1]));
    case Plan::Kind::set_union:
      return set_union(eval_plan(db, p.kids[0]), eval_plan(db, p.kids[1]));
    case Plan::Kind::project:
      return project(eval_plan(db, p.kids[0]), p.args);
    case Plan::Kind::select:
      return select_const(eval_plan(db, p.kids[0]), p.args[0], p.args[1]);
    case Plan::Kind::seleq:
      return select_eq(eval_plan(db, p.kids[0]), p.args[0], p.args[1]);
    case Plan::Kind::rename:
      return rename(eval_plan(db, p.kids[0]), p.args[0], p.args[1]);
  }
  throw fault(fault_kind::parse, "oracle: malformed plan");
}

// Fully reduced atom materializations: the tuples of each atom that take
// part in at least one solution of the full join (all variables free).
inline std::vector<PlainRelation> reduce(const Database& db, const Query& q) {
  Query full = q;
  const std::set<std::string> vars = q.all_vars();
  full.free.assign(vars.begin(), vars.end());
  PlainRelation sols = eval_query(db, full);
  std::vector<PlainRelation> out;
  for (const auto& a : q.atoms) {
    PlainRelation mat = materialize_atom(db, a);
    out.push_back(semijoin(mat, sols));
  }
  return out;
}

}  // namespace pramql::oracle
