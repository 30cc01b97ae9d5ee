// Relation/array data model: the three access settings (general, ordered,
// dictionary), token representation, elemental operations, machine-resident
// relation arrays with named link slots, and dictionary construction.
//
// Discipline: general-setting values are opaque byte strings that cells can
// never hold directly; cells store tokens (relation, row, column) and all
// comparisons go through the elemental operations. Dictionary-setting cells
// hold the natural values themselves.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kernel.hpp"
#include "primitives.hpp"

namespace pramql {

enum class Setting { general, ordered, dictionary };

inline std::string setting_name(Setting s) {
  switch (s) {
    case Setting::general: return "general";
    case Setting::ordered: return "ordered";
    case Setting::dictionary: return "dictionary";
  }
  return "?";
}

struct Schema {
  std::string name;
  std::vector<std::string> attrs;
  u64 arity() const { return attrs.size(); }
};

// Token representation: a value is referred to by its position in the input.
struct Token {
  u64 rel = 0;
  u64 row = 0;
  u64 col = 0;
};

inline word pack_token(const Token& t) {
  return (t.rel << 48) | (t.col << 32) | t.row;
}
inline Token unpack_token(word w) {
  return Token{w >> 48, w & 0xffffffffULL, (w >> 32) & 0xffffULL};
}

struct HostRelation {
  Schema schema;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> ordered_by;  // declared input order, verified at load
};

class Database {
 public:
  explicit Database(Setting s) : setting_(s) {}

  Setting setting() const { return setting_; }

  u64 add_relation(HostRelation rel) {
    if (rel.schema.attrs.empty())
      throw fault(fault_kind::schema, "relation needs at least one attribute");
    {
      std::set<std::string> uniq(rel.schema.attrs.begin(), rel.schema.attrs.end());
      if (uniq.size() != rel.schema.attrs.size())
        throw fault(fault_kind::schema,
                    "duplicate attribute name in relation " + rel.schema.name);
    }
    std::set<std::vector<std::string>> seen;
    for (const auto& row : rel.rows) {
      if (row.size() != rel.schema.arity())
        throw fault(fault_kind::schema,
                    "arity mismatch in relation " + rel.schema.name);
      if (!seen.insert(row).second)
        throw fault(fault_kind::parse,
                    "duplicate row in relation " + rel.schema.name +
                        " (inputs must be concise)");
    }
    if (setting_ == Setting::dictionary) {
      std::vector<std::vector<u64>> nat;
      for (const auto& row : rel.rows) {
        std::vector<u64> r;
        for (const auto& f : row) r.push_back(parse_natural(f, rel.schema.name));
        nat.push_back(std::move(r));
      }
      nat_rows_.push_back(std::move(nat));
    } else {
      nat_rows_.emplace_back();
    }
    if (!rel.ordered_by.empty()) verify_order(rel);
    u64 id = relations_.size();
    by_name_[rel.schema.name] = id;
    relations_.push_back(std::move(rel));
    return id;
  }

  // Dictionary range validation (c_val * |D|), run once all relations are in.
  void validate_dictionary_range() const {
    if (setting_ != Setting::dictionary) return;
    u64 bound = value_bound();
    for (u64 r = 0; r < relations_.size(); ++r)
      for (const auto& row : nat_rows_[r])
        for (u64 v : row)
          if (v < 1 || v > bound)
            throw fault(fault_kind::parameter,
                        "dictionary value " + std::to_string(v) +
                            " outside [1, " + std::to_string(bound) + "]");
  }

  u64 relation_count() const { return relations_.size(); }
  const HostRelation& relation(u64 id) const { return relations_.at(id); }
  const std::vector<std::vector<u64>>& nat_rows(u64 id) const {
    return nat_rows_.at(id);
  }
  u64 relation_id(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw fault(fault_kind::schema, "unknown relation " + name);
    return it->second;
  }
  bool has_relation(const std::string& name) const {
    return by_name_.count(name) != 0;
  }

  u64 num_tuples(u64 id) const { return relations_.at(id).rows.size(); }
  u64 total_tuples() const {
    u64 n = 0;
    for (const auto& r : relations_) n += r.rows.size();
    return n;
  }
  u64 c_val() const {
    u64 c = 0;
    for (const auto& r : relations_) c += r.schema.arity();
    return c;
  }
  u64 value_bound() const { return std::max<u64>(1, c_val() * total_tuples()); }

  const std::string& token_value(const Token& t) const {
    return relations_.at(t.rel).rows.at(t.row).at(t.col);
  }

  // --- elemental operations -------------------------------------------------
  // In the dictionary setting payload words are the values themselves; in the
  // general and ordered settings they are packed tokens. Each call models one
  // constant-work elemental operation.
  bool eq(word a, word b) const {
    if (setting_ == Setting::dictionary) return a == b;
    if (a == b) return true;
    return token_value(unpack_token(a)) == token_value(unpack_token(b));
  }
  bool eq_const(word a, const std::string& lit) const {
    if (setting_ == Setting::dictionary) return std::to_string(a) == lit;
    return token_value(unpack_token(a)) == lit;
  }
  bool lt(word a, word b) const {
    if (setting_ == Setting::general)
      throw fault(fault_kind::setting,
                  "LessThan is not available in the general setting");
    if (setting_ == Setting::dictionary) return a < b;
    return token_value(unpack_token(a)) < token_value(unpack_token(b));
  }
  bool leq(word a, word b) const { return eq(a, b) || lt(a, b); }

 private:
  static u64 parse_natural(const std::string& s, const std::string& rel) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw fault(fault_kind::parse, "dictionary setting requires natural "
                                     "number values; got '" + s + "' in " + rel);
    return std::stoull(s);
  }

  void verify_order(const HostRelation& rel) const {
    std::vector<u64> cols;
    for (const auto& a : rel.ordered_by) {
      auto it = std::find(rel.schema.attrs.begin(), rel.schema.attrs.end(), a);
      if (it == rel.schema.attrs.end())
        throw fault(fault_kind::schema, "ordered_by names unknown attribute " + a);
      cols.push_back(it - rel.schema.attrs.begin());
    }
    auto key = [&](const std::vector<std::string>& row) {
      std::vector<std::string> k;
      for (u64 c : cols) k.push_back(row[c]);
      return k;
    };
    auto lt_row = [&](const std::vector<std::string>& x,
                      const std::vector<std::string>& y) {
      if (setting_ == Setting::dictionary) {
        for (u64 c : cols) {
          u64 a = std::stoull(x[c]), b = std::stoull(y[c]);
          if (a != b) return a < b;
        }
        return false;
      }
      return key(x) < key(y);
    };
    for (size_t i = 1; i < rel.rows.size(); ++i)
      if (lt_row(rel.rows[i], rel.rows[i - 1]))
        throw fault(fault_kind::parse, "relation " + rel.schema.name +
                                           " is not ordered as declared");
  }

  Setting setting_;
  std::vector<HostRelation> relations_;
  std::vector<std::vector<std::vector<u64>>> nat_rows_;
  std::map<std::string, u64> by_name_;
};

// --- machine-resident relation arrays ---------------------------------------

// Named link slots, constant per cell.
enum LinkSlot : u64 {
  kPartner = 0,
  kRepresentative = 1,
  kProjection = 2,
  kGroupLo = 3,
  kGroupHi = 4,
  kPred = 5,
  kSucc = 6,
};
constexpr u64 kLinkCount = 7;

struct RelationArray {
  Schema schema;
  CellView cells;  // stride = 1 + arity + kLinkCount, flag at offset 0
  std::vector<std::string> ordered_by;  // X such that the array is X-ordered
  bool fully_ordered = false;           // ordered by all attributes
  bool fully_linked = false;            // pred/succ slots populated
  bool concise = true;

  u64 arity() const { return schema.arity(); }
  u64 payload(u64 j) const { return 1 + j; }
  u64 link(LinkSlot s) const { return 1 + arity() + s; }
  u64 attr_index(const std::string& a) const {
    for (u64 j = 0; j < schema.attrs.size(); ++j)
      if (schema.attrs[j] == a) return j;
    throw fault(fault_kind::schema, "unknown attribute " + a);
  }
};

inline u64 rel_stride(u64 arity) { return 1 + arity + kLinkCount; }

inline RelationArray alloc_relation(Machine& m, const Schema& schema, u64 count) {
  RelationArray a;
  a.schema = schema;
  a.cells = CellView{m.allocate(count * rel_stride(schema.arity())), count,
                     rel_stride(schema.arity()), 0};
  return a;
}

// Materialize one database relation as a concise array.
inline RelationArray make_array(Machine& m, const Database& db, u64 rel_id) {
  const HostRelation& r = db.relation(rel_id);
  RelationArray a = alloc_relation(m, r.schema, r.rows.size());
  for (u64 i = 0; i < r.rows.size(); ++i) {
    m.host_write(a.cells.h, a.cells.word_of(i, 0), 1);
    for (u64 j = 0; j < r.schema.arity(); ++j) {
      word v = db.setting() == Setting::dictionary
                   ? db.nat_rows(rel_id)[i][j]
                   : pack_token(Token{rel_id, i, j});
      m.host_write(a.cells.h, a.cells.word_of(i, a.payload(j)), v);
    }
  }
  a.ordered_by = r.ordered_by;
  a.fully_ordered =
      !r.ordered_by.empty() && r.ordered_by.size() == r.schema.arity();
  return a;
}

// Populate pred/succ link slots over inhabited cells.
inline void fully_link(Machine& m, RelationArray& a, const Ratio& eps) {
  ArrayHandle p = predecessor_links(m, a.cells, eps);
  ArrayHandle s = successor_links(m, a.cells, eps);
  const RelationArray& A = a;
  m.step(a.cells.count, [&](Step& st, u64 q) {
    const u64 i = q - 1;
    st.write(A.cells.h, A.cells.word_of(i, A.link(kPred)), st.read(p, i));
    st.write(A.cells.h, A.cells.word_of(i, A.link(kSucc)), st.read(s, i));
  });
  m.release(p);
  m.release(s);
  a.fully_linked = true;
}

// Extract the tuple set of an array back to host rows (output staging).
inline std::vector<std::vector<std::string>> to_output(const Machine& m,
                                                       const Database& db,
                                                       const RelationArray& a) {
  std::vector<std::vector<std::string>> rows;
  for (u64 i = 0; i < a.cells.count; ++i) {
    if (!m.host_read(a.cells.h, a.cells.word_of(i, 0))) continue;
    std::vector<std::string> row;
    for (u64 j = 0; j < a.arity(); ++j) {
      word v = m.host_read(a.cells.h, a.cells.word_of(i, a.payload(j)));
      row.push_back(db.setting() == Setting::dictionary
                        ? std::to_string(v)
                        : db.token_value(unpack_token(v)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- CSV / manifest loading --------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
  if (line.find('"') != std::string::npos)
    throw fault(fault_kind::parse, "CSV quoting is not supported");
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline HostRelation load_relation_csv(const std::string& path,
                                      const std::string& name) {
  std::ifstream in(path);
  if (!in) throw fault(fault_kind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw fault(fault_kind::parse, "empty relation file " + path +
                                       " (header row required)");
  HostRelation rel;
  rel.schema.name = name;
  rel.schema.attrs = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != rel.schema.arity())
      throw fault(fault_kind::parse,
                  "row with " + std::to_string(fields.size()) +
                      " fields in " + path + ", expected " +
                      std::to_string(rel.schema.arity()));
    rel.rows.push_back(std::move(fields));
  }
  return rel;
}

inline Database load_database(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw fault(fault_kind::io, "cannot open " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw fault(fault_kind::parse, std::string("manifest: ") + e.what());
  }
  std::string s = j.at("setting").get<std::string>();
  Setting setting;
  if (s == "general") setting = Setting::general;
  else if (s == "ordered") setting = Setting::ordered;
  else if (s == "dictionary") setting = Setting::dictionary;
  else throw fault(fault_kind::parse, "unknown setting '" + s + "'");
  Database db(setting);
  std::string dir = manifest_path.substr(0, manifest_path.find_last_of('/') + 1);
  for (const auto& r : j.at("relations")) {
    std::string file = r.at("file").get<std::string>();
    if (!file.empty() && file[0] != '/') file = dir + file;
    HostRelation rel = load_relation_csv(file, r.at("name").get<std::string>());
    if (r.contains("ordered_by") && !r.at("ordered_by").is_null())
      rel.ordered_by = r.at("ordered_by").get<std::vector<std::string>>();
    db.add_relation(std::move(rel));
  }
  db.validate_dictionary_range();
  return db;
}

// --- dictionaries -------------------------------------------------------------

struct Dictionary {
  std::vector<word> tokens;               // concatenated token array
  std::vector<u64> key;                   // per token position, 1-based
  std::unordered_map<word, u64> by_token; // packed token -> position
  u64 key_bound = 0;                      // c_val * |D|

  u64 key_of(const Token& t) const {
    auto it = by_token.find(pack_token(t));
    if (it == by_token.end())
      throw fault(fault_kind::parameter, "unknown token in key_of");
    return key[it->second];
  }
  Token representative(u64 k) const {
    if (k == 0 || k > tokens.size())
      throw fault(fault_kind::parameter, "unknown key in key_output");
    return unpack_token(tokens[k - 1]);
  }
};

// key_output: emit the value the key stands for (via its representative token).
inline const std::string& key_output(const Database& db, const Dictionary& d,
                                     u64 k) {
  return db.token_value(d.representative(k));
}

namespace detail {

// d-ary descent over a sorted range. For every active query q, computes
// 1 + max{ i < len : value(i) <= probe(q) }, or 0 if no such i, into res[q].
// le_at(step, q, i) answers value(i) <= probe(q). Constant round count,
// work O(nq * len^eps) per round.
template <class ActFn, class LeFn>
inline void boundary_descent(Machine& m, u64 nq, u64 len, const Ratio& eps,
                             ArrayHandle res, ActFn active, LeFn le_at) {
  const u64 rounds = static_cast<u64>(std::ceil(1.0 / eps.value() - 1e-9)) + 2;
  if (len == 0) {
    m.step(nq, [&](Step& s, u64 p) {
      if (active(s, p - 1)) s.write(res, p - 1, 0);
    });
    for (u64 r = 0; r < rounds + 1; ++r) m.step(0, [](Step&, u64) {});
    return;
  }
  const u64 f = std::max<u64>(2, ceil_pow(len, eps.value()));
  ArrayHandle lo = m.allocate(nq);
  ArrayHandle hi = m.allocate(nq);
  m.step(nq, [&](Step& s, u64 p) {
    const u64 q = p - 1;
    if (!active(s, q)) return;
    s.write(lo, q, 0);
    s.write(hi, q, len - 1);
  });
  for (u64 r = 0; r < rounds; ++r) {
    m.step(nq * f, [&](Step& s, u64 p) {
      const u64 g = p - 1;
      const u64 q = g / f, part = g % f;
      if (!active(s, q)) return;
      const u64 l = s.read(lo, q), h = s.read(hi, q);
      if (l >= h) return;
      const u64 width = (h - l) / f + 1;
      const u64 start = l + width * part;
      if (start > h) return;
      const u64 end = std::min(h, start + width - 1);
      const bool le = le_at(s, q, end);
      if (part == 0 && !le) {
        // boundary lies strictly before this part's end (or not at all)
        if (end > l) s.write(hi, q, end - 1);
        else s.write(hi, q, l);
        if (end <= l) s.write(lo, q, l);
        return;
      }
      // values ascend, so le holds on a prefix of parts; the last le part
      // brackets the boundary between its end and the next part's end
      const u64 nstart = l + width * (part + 1);
      bool next_le = false;
      u64 nend = end;
      if (nstart <= h) {
        nend = std::min(h, nstart + width - 1);
        next_le = le_at(s, q, nend);
      }
      if (le && !next_le) {
        s.write(lo, q, end);
        s.write(hi, q, nend == end ? end : nend - 1);
      }
    });
  }
  m.step(nq, [&](Step& s, u64 p) {
    const u64 q = p - 1;
    if (!active(s, q)) return;
    const u64 l = s.read(lo, q);
    s.write(res, q, le_at(s, q, l) ? l + 1 : 0);
  });
  m.release(lo);
  m.release(hi);
}

inline std::vector<word> all_tokens(const Database& db) {
  std::vector<word> toks;
  for (u64 r = 0; r < db.relation_count(); ++r) {
    const auto& rel = db.relation(r);
    for (u64 i = 0; i < rel.rows.size(); ++i)
      for (u64 j = 0; j < rel.schema.arity(); ++j)
        toks.push_back(pack_token(Token{r, i, j}));
  }
  return toks;
}

}  // namespace detail

// Pairwise duplicate detection over the concatenated token array, then
// representative links; key = representative position + 1. Work O(|D|^2).
inline Dictionary build_dictionary_general(Machine& m, const Database& db) {
  Dictionary d;
  d.tokens = detail::all_tokens(db);
  const u64 n = d.tokens.size();
  d.key_bound = db.value_bound();
  ArrayHandle toks = m.allocate(n);
  for (u64 i = 0; i < n; ++i) m.host_write(toks, i, d.tokens[i]);
  ArrayHandle notfirst = m.allocate(n);
  m.step(n * n, [&](Step& s, u64 p) {
    const u64 g = p - 1;
    const u64 i = g / n, j = g % n;
    if (j >= i) return;
    if (db.eq(s.read(toks, i), s.read(toks, j))) s.write(notfirst, i, 1);
  });
  ArrayHandle rep = m.allocate(n);
  m.step(n * n, [&](Step& s, u64 p) {
    const u64 g = p - 1;
    const u64 i = g / n, j = g % n;
    if (j > i) return;
    if (s.read(notfirst, j) == 0 && db.eq(s.read(toks, i), s.read(toks, j)))
      s.write(rep, i, j + 1);
  });
  d.key.resize(n);
  for (u64 i = 0; i < n; ++i) {
    d.key[i] = m.host_read(rep, i);
    d.by_token[d.tokens[i]] = i;
  }
  m.release(toks);
  m.release(notfirst);
  m.release(rep);
  return d;
}

// Attribute-wise ordered construction: the caller supplies, for every
// (relation, attribute), a row permutation sorting the relation by that
// attribute. Tokens form a piecewise-ordered array; each piece deduplicates
// by adjacent comparison, pieces cross-match by d-ary descent with LessThan.
using OrderIndex = std::map<std::pair<u64, u64>, std::vector<u64>>;

inline Dictionary build_dictionary_aordered(Machine& m, const Database& db,
                                            const OrderIndex& order,
                                            const Ratio& eps) {
  if (db.setting() == Setting::general)
    throw fault(fault_kind::setting,
                "a-ordered dictionary construction needs an ordered setting");
  Dictionary d;
  d.key_bound = db.value_bound();

  struct Piece { u64 begin = 0, len = 0; };
  std::vector<Piece> pieces;
  for (u64 r = 0; r < db.relation_count(); ++r) {
    const auto& rel = db.relation(r);
    for (u64 j = 0; j < rel.schema.arity(); ++j) {
      auto it = order.find({r, j});
      if (it == order.end())
        throw fault(fault_kind::parameter,
                    "missing order index for " + rel.schema.name +
                        " attribute " + rel.schema.attrs[j]);
      if (it->second.size() != rel.rows.size())
        throw fault(fault_kind::parameter, "order index has wrong length");
      Piece p{d.tokens.size(), rel.rows.size()};
      for (u64 row : it->second)
        d.tokens.push_back(pack_token(Token{r, row, j}));
      pieces.push_back(p);
    }
  }
  const u64 n = d.tokens.size();
  ArrayHandle toks = m.allocate(n);
  for (u64 i = 0; i < n; ++i) {
    m.host_write(toks, i, d.tokens[i]);
    d.by_token[d.tokens[i]] = i;
  }
  // verify piece order (elemental comparisons, one parallel round)
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    for (const auto& pc : pieces)
      if (i > pc.begin && i < pc.begin + pc.len)
        if (db.lt(s.read(toks, i), s.read(toks, i - 1)))
          throw fault(fault_kind::parameter, "order index is not sorted");
  });
  // in-piece representatives: first of each equal run
  ArrayHandle prep = m.allocate(n);  // in-piece representative, position + 1
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    s.write(prep, i, i + 1);
  });
  for (const auto& pc : pieces) {
    m.step(pc.len, [&](Step& s, u64 p) {
      const u64 i = pc.begin + p - 1;
      if (p == 1) return;
      if (db.eq(s.read(toks, i), s.read(toks, i - 1)))
        s.write(prep, i, 0);  // not a run start; resolved below
    });
  }
  // propagate run starts: pred-link pass over run starts within each piece
  {
    // run starts marked, fill the rest by predecessor links over starts
    CellView starts{m.allocate(2 * n), n, 2, 0};
    m.step(n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (s.read(prep, i) != 0) {
        s.write(starts.h, 2 * i, 1);
        s.write(starts.h, 2 * i + 1, i + 1);
      }
    });
    ArrayHandle pl = predecessor_links(m, starts, eps);
    m.step(n, [&](Step& s, u64 p) {
      const u64 i = p - 1;
      if (s.read(prep, i) != 0) return;
      const u64 q = s.read(pl, i);
      s.write(prep, i, s.read(starts.h, 2 * (q - 1) + 1));
    });
    m.release(pl);
    m.release(starts.h);
  }
  // cross-piece matching: each in-piece representative searches all earlier
  // pieces; the global representative is the match in the least piece.
  ArrayHandle grep = m.allocate(n);
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    s.write(grep, i, s.read(prep, i));
  });
  for (size_t b = 1; b < pieces.size(); ++b) {
    for (size_t a = 0; a < b; ++a) {
      const Piece& pa = pieces[a];
      const Piece& pb = pieces[b];
      if (pb.len == 0) continue;
      ArrayHandle res = m.allocate(pb.len);
      detail::boundary_descent(
          m, pb.len, pa.len, eps, res,
          [&](Step& s, u64 q) {
            const u64 ti = pb.begin + q;
            return s.read(prep, ti) == ti + 1;  // only run starts search
          },
          [&](Step& s, u64 q, u64 i) {
            return !db.lt(s.read(toks, pb.begin + q),
                          s.read(toks, pa.begin + i));
          });
      m.step(pb.len, [&](Step& s, u64 p) {
        const u64 q = p - 1;
        const u64 ti = pb.begin + q;
        if (s.read(prep, ti) != ti + 1) return;
        const u64 r = s.read(res, q);
        if (r == 0) return;
        const u64 pos = pa.begin + r - 1;
        if (db.eq(s.read(toks, ti), s.read(toks, pos))) {
          // match in an earlier piece: adopt its in-piece representative,
          // unless an even smaller piece matched already
          if (s.read(grep, ti) == ti + 1 ||
              s.read(grep, ti) > s.read(prep, pos))
            s.write(grep, ti, s.read(prep, pos));
        }
      });
      m.release(res);
    }
  }
  // non-representatives adopt their run start's global representative
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    const u64 rs = s.read(prep, i);
    if (rs != i + 1) s.write(grep, i, s.read(grep, rs - 1));
  });
  // and one more pass: run starts that matched an earlier piece's run start
  // whose own representative is still earlier
  m.step(n, [&](Step& s, u64 p) {
    const u64 i = p - 1;
    u64 g = s.read(grep, i);
    s.write(grep, i, s.read(grep, g - 1));
  });
  d.key.resize(n);
  for (u64 i = 0; i < n; ++i) d.key[i] = m.host_read(grep, i);
  m.release(toks);
  m.release(prep);
  m.release(grep);
  return d;
}

// Rewrite a database into the dictionary setting using a dictionary's keys.
inline Database to_dictionary(const Database& db, const Dictionary& dict) {
  Database out(Setting::dictionary);
  for (u64 r = 0; r < db.relation_count(); ++r) {
    const auto& rel = db.relation(r);
    HostRelation hr;
    hr.schema = rel.schema;
    for (u64 i = 0; i < rel.rows.size(); ++i) {
      std::vector<std::string> row;
      for (u64 j = 0; j < rel.schema.arity(); ++j)
        row.push_back(std::to_string(dict.key_of(Token{r, i, j})));
      hr.rows.push_back(std::move(row));
    }
    out.add_relation(std::move(hr));
  }
  return out;
}

}  // namespace pramql
