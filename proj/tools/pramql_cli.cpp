// Command-line front door: evaluate queries and plans from manifests, run
// benchmark families with work/depth/space tables, and check primitive
// invariants at a chosen size.

#include <CLI11.hpp>

#include <pramql/eval.hpp>
#include <pramql/oracle.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pramql;
using ojson = nlohmann::ordered_json;

namespace {

Ratio parse_ratio(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos)
    return ratio(std::stoll(text.substr(0, slash)),
                 std::stoll(text.substr(slash + 1)));
  const auto dot = text.find('.');
  if (dot != std::string::npos) {
    const std::string frac = text.substr(dot + 1);
    i64 den = 1;
    for (size_t i = 0; i < frac.size(); ++i) den *= 10;
    const i64 whole = dot == 0 ? 0 : std::stoll(text.substr(0, dot));
    return ratio(whole * den + (frac.empty() ? 0 : std::stoll(frac)), den);
  }
  return ratio(std::stoll(text), 1);
}

WriteMode parse_mode(const std::string& s) {
  if (s == "common") return WriteMode::Common;
  if (s == "arbitrary") return WriteMode::Arbitrary;
  if (s == "priority") return WriteMode::Priority;
  throw fault(fault_kind::parameter, "unknown write mode '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fault(fault_kind::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path_stem(const std::string& path) {
  const auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw fault(fault_kind::io, "cannot write " + path);
  out << text;
}

ojson ratio_json(const Ratio& r) {
  return ojson{{"num", r.num}, {"den", r.den}};
}

std::string join_row(const std::vector<std::string>& row) {
  std::string out;
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += row[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalSetup {
  std::string manifest, query_file;
  std::string setting, mode = "arbitrary";
  std::string epsilon = "1/2", lambda = "1/2";
  std::string attr_order, ghd_file, out_path, result_path;
  u64 seed = 0;
  bool verify = false;
};

// Constant-selection literals refer to original values; after dictionary
// conversion they must refer to keys instead. Unknown literals map to key 0,
// which no cell carries.
Plan rewrite_literals(const Plan& p, const Database& orig,
                      const Dictionary& dict) {
  Plan out = p;
  for (auto& k : out.kids) k = rewrite_literals(k, orig, dict);
  if (out.kind == Plan::Kind::select) {
    std::string repl = "0";
    for (u64 r = 0; r < orig.relation_count() && repl == "0"; ++r) {
      const auto& rel = orig.relation(r);
      for (u64 i = 0; i < rel.rows.size() && repl == "0"; ++i)
        for (u64 j = 0; j < rel.schema.arity(); ++j)
          if (rel.rows[i][j] == out.args[1]) {
            repl = std::to_string(dict.key_of(Token{r, i, j}));
            break;
          }
    }
    out.args[1] = repl;
  }
  return out;
}

int run_eval(const EvalSetup& cfg) {
  Database db = load_database(cfg.manifest);
  if (!cfg.setting.empty() && cfg.setting != setting_name(db.setting()))
    throw fault(fault_kind::setting,
                "manifest declares the " + setting_name(db.setting()) +
                    " setting, not " + cfg.setting);
  EvalOptions o;
  o.lambda = parse_ratio(cfg.lambda);
  o.eps = parse_ratio(cfg.epsilon);
  MachineConfig mc;
  mc.write_mode = parse_mode(cfg.mode);
  mc.arbitrary_seed = cfg.seed;
  Machine m(mc);

  const std::string text = read_file(cfg.query_file);
  const size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
    throw fault(fault_kind::parse, cfg.query_file + " is empty");
  const bool is_plan = text[first] == '(';

  // the evaluators work over dictionary values; other settings go through a
  // machine-built dictionary first and map their results back at the end
  Database dbd(Setting::dictionary);
  Dictionary dict;
  const bool converted = db.setting() != Setting::dictionary;
  if (converted) {
    m.begin_phase("dictionary");
    if (db.setting() == Setting::general) {
      dict = build_dictionary_general(m, db);
    } else {
      OrderIndex order;
      for (u64 r = 0; r < db.relation_count(); ++r) {
        const auto& rel = db.relation(r);
        for (u64 c = 0; c < rel.schema.arity(); ++c) {
          std::vector<u64> idx(rel.rows.size());
          std::iota(idx.begin(), idx.end(), 0);
          std::stable_sort(idx.begin(), idx.end(), [&](u64 a, u64 b) {
            return rel.rows[a][c] < rel.rows[b][c];
          });
          order[{r, c}] = idx;
        }
      }
      dict = build_dictionary_aordered(m, db, order, o.eps);
    }
    dbd = to_dictionary(db, dict);
    m.end_phase();
  }
  const Database& dbe = converted ? dbd : db;

  EvalResult res;
  std::string evaluator, query_id = path_stem(cfg.query_file);
  std::vector<std::string> header;
  std::set<oracle::Row> want;
  bool has_want = false;
  if (is_plan) {
    const Plan plan = parse_plan(text);
    const Plan run = converted ? rewrite_literals(plan, db, dict) : plan;
    evaluator = "plan";
    m.begin_phase("evaluate");
    res = eval_semijoin_plan(m, dbe, run, o);
    m.end_phase();
    header = res.out.schema.attrs;
    if (cfg.verify) {
      want = oracle::eval_plan(db, plan).rows;
      has_want = true;
    }
  } else {
    const Query q = parse_query(text);
    query_id = q.head;
    header = q.free;
    m.begin_phase("evaluate");
    if (!cfg.ghd_file.empty()) {
      const GHD g = parse_ghd(nlohmann::json::parse(read_file(cfg.ghd_file)));
      res = eval_ghd(m, dbe, q, g, o);
      evaluator = "ghd";
    } else if (!cfg.attr_order.empty()) {
      res = wcoj(m, dbe, q, split_list(cfg.attr_order), o);
      evaluator = "wcoj";
    } else if (check_free_connex(q)) {
      res = eval_free_connex(m, dbe, q, o);
      evaluator = "free-connex";
    } else if (gyo_join_tree(q)) {
      res = eval_acyclic(m, dbe, q, o);
      evaluator = "acyclic";
    } else {
      res = wcoj(m, dbe, q, {}, o);
      evaluator = "wcoj";
    }
    m.end_phase();
    if (cfg.verify) {
      want = oracle::eval_query(db, q).rows;
      has_want = true;
    }
  }

  std::vector<std::vector<std::string>> rows = to_output(m, dbe, res.out);
  if (converted)
    for (auto& row : rows)
      for (auto& v : row) v = key_output(db, dict, std::stoull(v));
  std::sort(rows.begin(), rows.end());

  const bool match =
      !has_want ||
      std::set<oracle::Row>(rows.begin(), rows.end()) == want;

  std::string csv = join_row(header) + "\n";
  for (const auto& row : rows) csv += join_row(row) + "\n";
  write_text(cfg.result_path, csv);

  const Metrics& met = m.metrics();
  ojson rep;
  rep["report_version"] = 1;
  rep["query"] = query_id;
  rep["evaluator"] = evaluator;
  rep["setting"] = setting_name(db.setting());
  rep["parameters"] = ojson{{"epsilon", ratio_json(o.eps)},
                            {"lambda", ratio_json(o.lambda)},
                            {"mode", cfg.mode},
                            {"seed", cfg.seed}};
  rep["result_cardinality"] = rows.size();
  rep["oracle_match"] = has_want ? ojson(match) : ojson(nullptr);
  rep["assertions"] = ojson{{"size_discipline_ok", res.size_discipline_ok},
                            {"size_bound", res.size_bound},
                            {"intermediate_sizes", res.intermediate_sizes},
                            {"enumeration_sizes", res.enumeration_sizes},
                            {"level_sizes", res.level_sizes}};
  rep["metrics"] = ojson{
      {"work", met.work}, {"depth", met.depth}, {"space", met.space}};
  ojson phases = ojson::array();
  for (const auto& ph : met.phases)
    phases.push_back(ojson{{"label", ph.label},
                           {"work", ph.work},
                           {"depth", ph.depth},
                           {"space", ph.space}});
  rep["phases"] = phases;
  write_text(cfg.out_path, rep.dump(2) + "\n");

  return (!match || !res.size_discipline_ok) ? 2 : 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchSetup {
  std::string family = "uniform";
  std::string sizes = "256,512,1024,2048";
  std::string epsilon = "1/2", lambda = "1/2";
  std::string json_path;
  u64 reps = 3;
  u64 seed = 0;
};

HostRelation host_rel(std::string name, std::vector<std::string> attrs,
                      std::vector<std::vector<std::string>> rows) {
  HostRelation r;
  r.schema.name = std::move(name);
  r.schema.attrs = std::move(attrs);
  r.rows = std::move(rows);
  return r;
}

std::vector<std::vector<std::string>> distinct_rows(std::mt19937_64& rng,
                                                    u64 n, u64 arity,
                                                    u64 domain) {
  std::set<std::vector<std::string>> used;
  while (used.size() < n) {
    std::vector<std::string> row;
    for (u64 j = 0; j < arity; ++j)
      row.push_back(std::to_string(1 + rng() % domain));
    used.insert(row);
  }
  return {used.begin(), used.end()};
}

struct BenchPoint {
  u64 n = 0, rep = 0, work = 0, depth = 0, space = 0, output = 0;
};

BenchPoint bench_once(const std::string& family, u64 n, u64 rep, u64 seed,
                      const EvalOptions& o) {
  std::mt19937_64 rng(seed * 1000003ULL + n * 97ULL + rep);
  BenchPoint pt;
  pt.n = n;
  pt.rep = rep;
  Machine m;
  if (family == "uniform" || family == "evens-vs-odds") {
    Database db(Setting::dictionary);
    std::vector<std::vector<std::string>> r, s;
    if (family == "uniform") {
      r = distinct_rows(rng, n, 1, 2 * n);
      s = distinct_rows(rng, n, 1, 2 * n);
    } else {
      for (u64 i = 1; i <= n; ++i) {
        r.push_back({std::to_string(2 * i)});
        s.push_back({std::to_string(2 * i - 1)});
      }
    }
    db.add_relation(host_rel("R", {"a"}, r));
    db.add_relation(host_rel("S", {"a"}, s));
    const Plan plan = parse_plan("(sjoin R S)");
    EvalResult res = eval_semijoin_plan(m, db, plan, o);
    pt.output = res.output_count;
  } else if (family == "skewed-join") {
    Database db(Setting::dictionary);
    const u64 heavy = static_cast<u64>(std::sqrt(static_cast<double>(n)));
    auto gen = [&](const char* name, std::vector<std::string> attrs,
                   bool heavy_first) {
      std::set<std::vector<std::string>> used;
      while (used.size() < n) {
        const bool h = used.size() < heavy;
        std::string key = h ? "1" : std::to_string(2 + rng() % n);
        std::string other = std::to_string(1 + rng() % (2 * n));
        used.insert(heavy_first ? std::vector<std::string>{key, other}
                                : std::vector<std::string>{other, key});
      }
      db.add_relation(host_rel(
          name, std::move(attrs),
          std::vector<std::vector<std::string>>(used.begin(), used.end())));
    };
    gen("R", {"a", "b"}, false);  // R(a,b) with skewed b
    gen("S", {"b", "c"}, true);   // S(b,c) with skewed b
    RelationArray A = make_array(m, db, db.relation_id("R"));
    RelationArray B = make_array(m, db, db.relation_id("S"));
    RelationArray J =
        join(m, db, A, B, JoinVariant::DictionaryHash, o.lambda, o.eps);
    pt.output = count_rows(m, J);
  } else if (family == "path") {
    Database db(Setting::dictionary);
    std::vector<std::vector<std::string>> e;
    for (u64 i = 1; i < n; ++i)
      e.push_back({std::to_string(i), std::to_string(i + 1)});
    db.add_relation(host_rel("E", {"a", "b"}, e));
    const Query q = parse_query("q(x,z) :- E(x,y), E(y,z).");
    EvalResult res = eval_acyclic(m, db, q, o);
    pt.output = res.output_count;
  } else {
    throw fault(fault_kind::parameter, "unknown family '" + family + "'");
  }
  pt.work = m.metrics().work;
  pt.depth = m.metrics().depth;
  pt.space = m.metrics().space;
  return pt;
}

int run_bench(const BenchSetup& cfg) {
  EvalOptions o;
  o.lambda = parse_ratio(cfg.lambda);
  o.eps = parse_ratio(cfg.epsilon);
  std::vector<u64> sizes;
  for (const auto& s : split_list(cfg.sizes)) sizes.push_back(std::stoull(s));
  if (sizes.empty())
    throw fault(fault_kind::parameter, "bench needs at least one size");

  std::vector<BenchPoint> points;
  std::cout << "family,n,rep,work,depth,space,output\n";
  for (u64 n : sizes)
    for (u64 rep = 0; rep < cfg.reps; ++rep) {
      BenchPoint pt = bench_once(cfg.family, n, rep, cfg.seed, o);
      points.push_back(pt);
      std::cout << cfg.family << ',' << pt.n << ',' << pt.rep << ','
                << pt.work << ',' << pt.depth << ',' << pt.space << ','
                << pt.output << "\n";
    }

  // least-squares log-log slope of mean work against n
  double slope = 0.0;
  if (sizes.size() >= 2) {
    std::vector<double> xs, ys;
    for (u64 n : sizes) {
      double mean = 0.0;
      u64 cnt = 0;
      for (const auto& pt : points)
        if (pt.n == n) {
          mean += static_cast<double>(pt.work);
          ++cnt;
        }
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(mean / static_cast<double>(cnt)));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      num += (xs[i] - mx) * (ys[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    slope = num / den;
  }
  std::cout << "slope," << slope << "\n";

  if (!cfg.json_path.empty()) {
    ojson rep;
    rep["family"] = cfg.family;
    rep["seed"] = cfg.seed;
    ojson table = ojson::array();
    for (const auto& pt : points)
      table.push_back(ojson{{"n", pt.n},
                            {"rep", pt.rep},
                            {"work", pt.work},
                            {"depth", pt.depth},
                            {"space", pt.space},
                            {"output", pt.output}});
    rep["table"] = table;
    rep["slope"] = slope;
    write_text(cfg.json_path, rep.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

struct PrimSetup {
  std::string name;
  std::string epsilon = "1/2", lambda = "1/2";
  u64 n = 1024;
  u64 seed = 0;
};

struct Checker {
  bool ok = true;
  void check(bool cond, const std::string& what,
             const std::string& counterexample) {
    if (cond) {
      std::cout << "pass: " << what << "\n";
    } else {
      std::cout << "FAIL: " << what << " (" << counterexample << ")\n";
      ok = false;
    }
  }
};

int run_primitives(const PrimSetup& cfg) {
  const Ratio lambda = parse_ratio(cfg.lambda);
  const Ratio eps = parse_ratio(cfg.epsilon);
  const u64 n = cfg.n;
  std::mt19937_64 rng(cfg.seed);
  Machine m;
  Checker c;

  if (cfg.name == "prefix-sums") {
    ArrayHandle A = m.allocate(n);
    std::vector<u64> a(n);
    for (u64 i = 0; i < n; ++i) {
      a[i] = rng() % 100;
      m.host_write(A, i, a[i]);
    }
    ArrayHandle B = approx_prefix_sums(m, A, lambda, eps);
    u64 sum = 0, prev = 0;
    bool lower = true, upper = true, diff = true;
    std::string ce_lower, ce_upper, ce_diff;
    for (u64 i = 0; i < n; ++i) {
      sum += a[i];
      const u64 b = m.host_read(B, i);
      if (lower && b < sum) {
        lower = false;
        ce_lower = "i=" + std::to_string(i) + " B=" + std::to_string(b) +
                   " sum=" + std::to_string(sum);
      }
      if (upper && b * static_cast<u64>(lambda.den) >
                       sum * static_cast<u64>(lambda.den + lambda.num)) {
        upper = false;
        ce_upper = "i=" + std::to_string(i) + " B=" + std::to_string(b) +
                   " sum=" + std::to_string(sum);
      }
      if (diff && i > 0 && b - prev < a[i]) {
        diff = false;
        ce_diff = "i=" + std::to_string(i) + " B[i]-B[i-1]=" +
                  std::to_string(b - prev) + " A[i]=" + std::to_string(a[i]);
      }
      prev = b;
    }
    c.check(lower, "prefix sums dominate the exact sums", ce_lower);
    c.check(upper, "prefix sums within the (1+lambda) factor", ce_upper);
    c.check(diff, "consecutive differences dominate the inputs", ce_diff);
  } else if (cfg.name == "compact") {
    CellView A{m.allocate(2 * n), n, 2, 0};
    std::vector<u64> kept;
    for (u64 i = 0; i < n; ++i)
      if (rng() % 2) {
        m.host_write(A.h, A.word_of(i, 0), 1);
        m.host_write(A.h, A.word_of(i, 1), i + 1);
        kept.push_back(i + 1);
      }
    CompactResult r = approx_compact(m, A, lambda, eps);
    c.check(r.out.count * static_cast<u64>(lambda.den) <=
                kept.size() * static_cast<u64>(lambda.den + lambda.num),
            "output length within (1+lambda)k",
            "length=" + std::to_string(r.out.count) +
                " k=" + std::to_string(kept.size()));
    std::vector<u64> got;
    for (u64 i = 0; i < r.out.count; ++i)
      if (m.host_read(r.out.h, r.out.word_of(i, 0)))
        got.push_back(m.host_read(r.out.h, r.out.word_of(i, 1)));
    c.check(got == kept, "order and multiset preserved",
            "got " + std::to_string(got.size()) + " values, expected " +
                std::to_string(kept.size()));
  } else if (cfg.name == "padded-sort") {
    ArrayHandle A = m.allocate(n);
    std::vector<u64> vals(n);
    const u64 bound = n > 1 ? n * n : 1;
    for (u64 i = 0; i < n; ++i) {
      vals[i] = rng() % bound;
      m.host_write(A, i, vals[i]);
    }
    CellView out = padded_sort(m, A, lambda, eps, 2);
    c.check(out.count * static_cast<u64>(lambda.den) <=
                n * static_cast<u64>(lambda.den + lambda.num),
            "output length within (1+lambda)n",
            "length=" + std::to_string(out.count) + " n=" + std::to_string(n));
    std::vector<u64> got;
    for (u64 i = 0; i < out.count; ++i)
      if (m.host_read(out.h, out.word_of(i, 0)))
        got.push_back(m.host_read(out.h, out.word_of(i, 1)));
    const bool sorted = std::is_sorted(got.begin(), got.end());
    c.check(sorted, "inhabited cells sorted", "");
    std::sort(vals.begin(), vals.end());
    c.check(got == vals, "multiset preserved",
            "got " + std::to_string(got.size()) + " values of " +
                std::to_string(n));
  } else if (cfg.name == "links") {
    CellView A{m.allocate(n), n, 1, 0};
    std::vector<bool> inh(n, false);
    for (u64 i = 0; i < n; ++i)
      if (rng() % 3) {
        inh[i] = true;
        m.host_write(A.h, i, 1);
      }
    ArrayHandle pred = predecessor_links(m, A, eps);
    ArrayHandle succ = successor_links(m, A, eps);
    bool pok = true, sok = true;
    std::string ce_p, ce_s;
    u64 last = 0;
    for (u64 i = 0; i < n; ++i) {
      if (inh[i]) {
        const u64 got = m.host_read(pred, i);
        if (pok && got != last) {
          pok = false;
          ce_p = "i=" + std::to_string(i) + " got=" + std::to_string(got) +
                 " want=" + std::to_string(last);
        }
        last = i + 1;
      }
    }
    u64 next = 0;
    for (u64 i = n; i-- > 0;) {
      if (inh[i]) {
        const u64 got = m.host_read(succ, i);
        if (sok && got != next) {
          sok = false;
          ce_s = "i=" + std::to_string(i) + " got=" + std::to_string(got) +
                 " want=" + std::to_string(next);
        }
        next = i + 1;
      }
    }
    c.check(pok, "predecessor links point at the previous inhabited cell",
            ce_p);
    c.check(sok, "successor links point at the next inhabited cell", ce_s);
  } else if (cfg.name == "schedule") {
    std::vector<TaskDescription> tasks(n);
    u64 total = 0;
    for (u64 i = 0; i < n; ++i) {
      tasks[i].m = rng() % 5;
      tasks[i].payload = {i + 1};
      total += tasks[i].m;
    }
    Schedule s = schedule_tasks(m, tasks, lambda, eps);
    c.check(s.cells.count * static_cast<u64>(lambda.den) <=
                total * static_cast<u64>(lambda.den + lambda.num),
            "schedule length within (1+lambda) of the total demand",
            "length=" + std::to_string(s.cells.count) +
                " demand=" + std::to_string(total));
    std::vector<u64> per_task(n, 0);
    bool structure = true;
    std::string ce;
    for (u64 j = 0; j < s.cells.count; ++j) {
      if (!m.host_read(s.cells.h, s.cells.word_of(j, 0))) continue;
      const u64 t = m.host_read(s.cells.h, s.cells.word_of(j, Schedule::kTask));
      const u64 l = m.host_read(s.cells.h, s.cells.word_of(j, Schedule::kLead));
      const u64 pay =
          m.host_read(s.cells.h, s.cells.word_of(j, Schedule::kPayload));
      if (t == 0 || t > n || l == 0 || l > j + 1 || pay != t) {
        structure = false;
        ce = "cell " + std::to_string(j);
        break;
      }
      const u64 lt =
          m.host_read(s.cells.h, s.cells.word_of(l - 1, Schedule::kTask));
      if (lt != t) {
        structure = false;
        ce = "cell " + std::to_string(j) + " lead mismatch";
        break;
      }
      ++per_task[t - 1];
    }
    for (u64 i = 0; i < n && structure; ++i)
      if (per_task[i] != tasks[i].m) {
        structure = false;
        ce = "task " + std::to_string(i) + " got " +
             std::to_string(per_task[i]) + " cells, wanted " +
             std::to_string(tasks[i].m);
      }
    c.check(structure,
            "every task owns exactly its block, linked to its lead cell", ce);
  } else {
    throw fault(fault_kind::parameter, "unknown primitive '" + cfg.name + "'");
  }
  return c.ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulated-PRAM query evaluation"};
  app.require_subcommand(1);

  EvalSetup ev;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a query or plan from a manifest");
  eval_cmd->add_option("manifest", ev.manifest, "database manifest (JSON)")
      ->required();
  eval_cmd->add_option("query", ev.query_file, "query (datalog) or plan file")
      ->required();
  eval_cmd->add_option("--setting", ev.setting,
                       "assert the manifest's setting");
  eval_cmd->add_option("--epsilon", ev.epsilon, "depth/work tradeoff (p/q)");
  eval_cmd->add_option("--lambda", ev.lambda, "padding accuracy (p/q)");
  eval_cmd->add_option("--mode", ev.mode,
                       "write mode: common | arbitrary | priority");
  eval_cmd->add_option("--seed", ev.seed, "arbitration seed");
  eval_cmd->add_option("--attr-order", ev.attr_order,
                       "variable order, forces the worst-case optimal join");
  eval_cmd->add_option("--ghd", ev.ghd_file, "decomposition file (JSON)");
  eval_cmd->add_flag("--verify", ev.verify, "compare against the oracle");
  eval_cmd->add_option("--out", ev.out_path, "report path (default stdout)");
  eval_cmd->add_option("--result", ev.result_path,
                       "result CSV path (default stdout)");

  BenchSetup be;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "scaling tables over built-in families");
  bench_cmd->add_option("--family", be.family,
                        "uniform | skewed-join | evens-vs-odds | path");
  bench_cmd->add_option("--sizes", be.sizes, "comma-separated sizes");
  bench_cmd->add_option("--reps", be.reps, "repetitions per size");
  bench_cmd->add_option("--seed", be.seed, "generator seed");
  bench_cmd->add_option("--epsilon", be.epsilon, "depth/work tradeoff (p/q)");
  bench_cmd->add_option("--lambda", be.lambda, "padding accuracy (p/q)");
  bench_cmd->add_option("--json", be.json_path, "also write a JSON table");

  PrimSetup pr;
  CLI::App* prim_cmd =
      app.add_subcommand("primitives", "check one primitive's invariants");
  prim_cmd
      ->add_option("name", pr.name,
                   "prefix-sums | compact | padded-sort | links | schedule")
      ->required();
  prim_cmd->add_option("-n,--size", pr.n, "input size");
  prim_cmd->add_option("--seed", pr.seed, "generator seed");
  prim_cmd->add_option("--epsilon", pr.epsilon, "depth/work tradeoff (p/q)");
  prim_cmd->add_option("--lambda", pr.lambda, "padding accuracy (p/q)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (eval_cmd->parsed()) return run_eval(ev);
    if (bench_cmd->parsed()) return run_bench(be);
    return run_primitives(pr);
  } catch (const fault& f) {
    std::cerr << "fault: " << f.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
