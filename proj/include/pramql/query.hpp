// Conjunctive queries, semijoin-algebra plans, join trees (GYO ear
// removal), the free-connex test, and generalized hypertree decompositions.

#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kernel.hpp"

namespace pramql {

struct Atom {
  std::string rel;                 // relation name in the database
  std::vector<std::string> args;   // variable names, positional

  std::set<std::string> vars() const { return {args.begin(), args.end()}; }
};

struct Query {
  std::string head;
  std::vector<std::string> free;  // head variables, in output order
  std::vector<Atom> atoms;

  std::set<std::string> all_vars() const {
    std::set<std::string> v;
    for (const auto& a : atoms) v.insert(a.args.begin(), a.args.end());
    return v;
  }
};

// --- datalog-style parser ----------------------------------------------------

namespace detail {

struct QueryLexer {
  std::string s;
  size_t i = 0;
  void skip() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eat(char c) {
    skip();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c))
      throw fault(fault_kind::parse,
                  std::string("expected '") + c + "' at position " +
                      std::to_string(i) + " in query");
  }
  std::string ident() {
    skip();
    size_t start = i;
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
            s[i] == '\''))
      ++i;
    if (i == start)
      throw fault(fault_kind::parse,
                  "expected identifier at position " + std::to_string(i) +
                      " in query");
    return s.substr(start, i - start);
  }
  bool done() {
    skip();
    return i >= s.size();
  }
};

inline std::vector<std::string> parse_arglist(QueryLexer& lx) {
  std::vector<std::string> args;
  lx.expect('(');
  if (lx.eat(')')) return args;
  args.push_back(lx.ident());
  while (lx.eat(',')) args.push_back(lx.ident());
  lx.expect(')');
  return args;
}

}  // namespace detail

// Parses "q(x,y) :- E(x,z), F(z,y)." (the trailing dot is optional).
inline Query parse_query(const std::string& text) {
  detail::QueryLexer lx{text};
  Query q;
  q.head = lx.ident();
  q.free = detail::parse_arglist(lx);
  lx.expect(':');
  lx.expect('-');
  do {
    Atom a;
    a.rel = lx.ident();
    a.args = detail::parse_arglist(lx);
    if (a.args.empty())
      throw fault(fault_kind::parse, "atom " + a.rel + " has no arguments");
    q.atoms.push_back(std::move(a));
  } while (lx.eat(','));
  lx.eat('.');
  if (!lx.done())
    throw fault(fault_kind::parse, "trailing input after query");
  if (q.atoms.empty())
    throw fault(fault_kind::parse, "query has no body atoms");
  std::set<std::string> body = q.all_vars();
  std::set<std::string> seen;
  for (const auto& v : q.free) {
    if (!body.count(v))
      throw fault(fault_kind::parse, "head variable " + v +
                                         " does not occur in the body");
    if (!seen.insert(v).second)
      throw fault(fault_kind::parse, "head variable " + v + " repeats");
  }
  return q;
}

// --- semijoin-algebra plans --------------------------------------------------

struct Plan {
  enum class Kind {
    relation,
    sjoin,
    diff,
    set_union,
    project,
    select,  // constant selection: attribute = literal
    seleq,   // equality selection: attribute = attribute
    rename,  // one attribute renamed
  };
  Kind kind = Kind::relation;
  std::string name;               // for Kind::relation
  std::vector<Plan> kids;         // two for binary operators, one otherwise
  std::vector<std::string> args;  // attribute list / selection / rename args
};

namespace detail {

inline Plan parse_plan_expr(QueryLexer& lx) {
  lx.skip();
  if (lx.eat('(')) {
    std::string op = lx.ident();
    Plan p;
    if (op == "sjoin" || op == "diff" || op == "union") {
      p.kind = op == "sjoin" ? Plan::Kind::sjoin
                             : (op == "diff" ? Plan::Kind::diff
                                             : Plan::Kind::set_union);
      p.kids.push_back(parse_plan_expr(lx));
      p.kids.push_back(parse_plan_expr(lx));
      lx.expect(')');
      return p;
    }
    if (op == "project") {
      p.kind = Plan::Kind::project;
      p.kids.push_back(parse_plan_expr(lx));
      while (!lx.eat(')')) p.args.push_back(lx.ident());
      return p;
    }
    if (op == "select" || op == "seleq" || op == "rename") {
      p.kind = op == "select" ? Plan::Kind::select
                              : (op == "seleq" ? Plan::Kind::seleq
                                               : Plan::Kind::rename);
      p.kids.push_back(parse_plan_expr(lx));
      p.args.push_back(lx.ident());
      p.args.push_back(lx.ident());
      lx.expect(')');
      return p;
    }
    throw fault(fault_kind::parse, "unknown plan operator " + op);
  }
  Plan p;
  p.kind = Plan::Kind::relation;
  p.name = lx.ident();
  return p;
}

}  // namespace detail

inline Plan parse_plan(const std::string& text) {
  detail::QueryLexer lx{text};
  Plan p = detail::parse_plan_expr(lx);
  if (!lx.done()) throw fault(fault_kind::parse, "trailing input after plan");
  return p;
}

// --- join trees via GYO ear removal ------------------------------------------

struct JoinTree {
  // Nodes are atom indices into the query (plus possibly one extra node for
  // an added head atom). parent[root] == -1.
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  int root = -1;
};

namespace detail {

// Deterministic GYO: in each round, the lowest-index ear is removed, with
// the lowest-index witness. Returns parent links, or nothing if cyclic.
inline std::optional<JoinTree> gyo(const std::vector<std::set<std::string>>& vs) {
  const int n = static_cast<int>(vs.size());
  std::vector<bool> alive(n, true);
  JoinTree t;
  t.parent.assign(n, -1);
  t.children.assign(n, {});
  int alive_count = n;
  while (alive_count > 1) {
    int ear = -1, witness = -1;
    for (int i = 0; i < n && ear < 0; ++i) {
      if (!alive[i]) continue;
      // variables of i shared with some other alive atom
      std::set<std::string> shared;
      for (const auto& v : vs[i])
        for (int j = 0; j < n; ++j)
          if (j != i && alive[j] && vs[j].count(v)) {
            shared.insert(v);
            break;
          }
      for (int j = 0; j < n; ++j) {
        if (j == i || !alive[j]) continue;
        bool contains = true;
        for (const auto& v : shared)
          if (!vs[j].count(v)) {
            contains = false;
            break;
          }
        if (contains) {
          ear = i;
          witness = j;
          break;
        }
      }
    }
    if (ear < 0) return std::nullopt;  // cyclic
    alive[ear] = false;
    --alive_count;
    t.parent[ear] = witness;
    t.children[witness].push_back(ear);
  }
  for (int i = 0; i < n; ++i)
    if (alive[i]) t.root = i;
  return t;
}

// Re-root an (undirected) join tree at a given node.
inline JoinTree reroot(const JoinTree& t, int new_root) {
  const int n = static_cast<int>(t.parent.size());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    if (t.parent[i] >= 0) {
      adj[i].push_back(t.parent[i]);
      adj[t.parent[i]].push_back(i);
    }
  JoinTree r;
  r.parent.assign(n, -1);
  r.children.assign(n, {});
  r.root = new_root;
  std::vector<int> stack{new_root};
  std::vector<bool> seen(n, false);
  seen[new_root] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        r.parent[w] = v;
        r.children[v].push_back(w);
        stack.push_back(w);
      }
  }
  return r;
}

}  // namespace detail

inline std::optional<JoinTree> gyo_join_tree(const Query& q) {
  std::vector<std::set<std::string>> vs;
  for (const auto& a : q.atoms) vs.push_back(a.vars());
  return detail::gyo(vs);
}

// Join tree of the query augmented by a head atom over the free variables,
// re-rooted at that head atom (its index is q.atoms.size()). Empty when the
// augmented query is cyclic, i.e. the query is not free-connex.
inline std::optional<JoinTree> gyo_join_tree_with_head(const Query& q) {
  std::vector<std::set<std::string>> vs;
  for (const auto& a : q.atoms) vs.push_back(a.vars());
  vs.emplace_back(q.free.begin(), q.free.end());
  auto t = detail::gyo(vs);
  if (!t) return std::nullopt;
  return detail::reroot(*t, static_cast<int>(q.atoms.size()));
}

inline bool check_free_connex(const Query& q) {
  return gyo_join_tree(q).has_value() && gyo_join_tree_with_head(q).has_value();
}

// --- generalized hypertree decompositions ------------------------------------

struct GHD {
  struct Node {
    int id = 0;
    std::vector<std::string> chi;  // covered variables
    std::vector<int> mu;           // atom indices whose join covers chi
  };
  std::vector<Node> nodes;                // indexed by position
  std::vector<std::pair<int, int>> edges; // by node id
  int root = 0;

  int index_of(int id) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    throw fault(fault_kind::decomposition,
                "unknown node id " + std::to_string(id));
  }
};

inline GHD parse_ghd(const nlohmann::json& j) {
  GHD g;
  try {
    for (const auto& nj : j.at("nodes")) {
      GHD::Node n;
      n.id = nj.at("id").get<int>();
      n.chi = nj.at("chi").get<std::vector<std::string>>();
      n.mu = nj.at("mu").get<std::vector<int>>();
      g.nodes.push_back(std::move(n));
    }
    for (const auto& ej : j.at("edges"))
      g.edges.emplace_back(ej.at(0).get<int>(), ej.at(1).get<int>());
    g.root = j.at("root").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw fault(fault_kind::parse, std::string("decomposition: ") + e.what());
  }
  return g;
}

// Checks the decomposition properties against the query: every atom's
// variables inside some bag, bags covered by their own mu atoms, and
// connectedness of each variable's occurrence set in the (tree-shaped) graph.
inline void verify_ghd(const GHD& g, const Query& q) {
  const int n = static_cast<int>(g.nodes.size());
  if (n == 0) throw fault(fault_kind::decomposition, "empty decomposition");
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : g.edges) {
    int ia = g.index_of(a), ib = g.index_of(b);
    adj[ia].push_back(ib);
    adj[ib].push_back(ia);
  }
  if (g.edges.size() + 1 != static_cast<size_t>(n))
    throw fault(fault_kind::decomposition, "decomposition graph is not a tree");
  // connectivity
  {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{g.index_of(g.root)};
    seen[stack[0]] = true;
    int cnt = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = true;
          ++cnt;
          stack.push_back(w);
        }
    }
    if (cnt != n)
      throw fault(fault_kind::decomposition, "decomposition graph is not connected");
  }
  // atom coverage and mu validity
  for (size_t ai = 0; ai < q.atoms.size(); ++ai) {
    const auto av = q.atoms[ai].vars();
    bool covered = false;
    for (const auto& node : g.nodes) {
      std::set<std::string> bag(node.chi.begin(), node.chi.end());
      bool all = true;
      for (const auto& v : av)
        if (!bag.count(v)) {
          all = false;
          break;
        }
      if (all) {
        covered = true;
        break;
      }
    }
    if (!covered)
      throw fault(fault_kind::decomposition,
                  "atom " + q.atoms[ai].rel + " is covered by no bag");
  }
  for (const auto& node : g.nodes) {
    std::set<std::string> muvars;
    for (int ai : node.mu) {
      if (ai < 0 || ai >= static_cast<int>(q.atoms.size()))
        throw fault(fault_kind::decomposition, "mu names a nonexistent atom");
      auto av = q.atoms[ai].vars();
      muvars.insert(av.begin(), av.end());
    }
    for (const auto& v : node.chi)
      if (!muvars.count(v))
        throw fault(fault_kind::decomposition,
                    "bag variable " + v + " is not covered by its mu atoms");
  }
  // running intersection: nodes containing each variable form a subtree
  std::set<std::string> vars = q.all_vars();
  for (const auto& v : vars) {
    std::vector<int> holders;
    for (int i = 0; i < n; ++i) {
      const auto& chi = g.nodes[i].chi;
      if (std::find(chi.begin(), chi.end(), v) != chi.end()) holders.push_back(i);
    }
    if (holders.empty()) continue;
    std::set<int> hs(holders.begin(), holders.end());
    std::vector<bool> seen(n, false);
    std::vector<int> stack{holders[0]};
    seen[holders[0]] = true;
    int cnt = 1;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      for (int w : adj[x])
        if (!seen[w] && hs.count(w)) {
          seen[w] = true;
          ++cnt;
          stack.push_back(w);
        }
    }
    if (cnt != static_cast<int>(hs.size()))
      throw fault(fault_kind::decomposition,
                  "variable " + v + " violates the running intersection property");
  }
}

}  // namespace pramql
