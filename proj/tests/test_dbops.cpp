#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pramql/dbops.hpp>
#include <pramql/oracle.hpp>

#include <algorithm>
#include <random>
#include <set>

using namespace pramql;
using oracle::PlainRelation;
using oracle::Row;

namespace {

const Ratio kHalf = ratio(1, 2);

HostRelation srel(std::string name, std::vector<std::string> attrs,
                  std::vector<Row> rows,
                  std::vector<std::string> ordered_by = {}) {
  HostRelation r;
  r.schema.name = std::move(name);
  r.schema.attrs = std::move(attrs);
  r.rows = std::move(rows);
  r.ordered_by = std::move(ordered_by);
  return r;
}

std::set<Row> out_rows(const Machine& m, const Database& db,
                       const RelationArray& a) {
  auto rows = to_output(m, db, a);
  return {rows.begin(), rows.end()};
}

// number of inhabited output rows including duplicates
u64 out_count(const Machine& m, const RelationArray& a) {
  u64 c = 0;
  for (u64 i = 0; i < a.cells.count; ++i)
    if (m.host_read(a.cells.h, a.cells.word_of(i, 0))) ++c;
  return c;
}

std::vector<Row> random_rows(std::mt19937_64& rng, u64 n, u64 arity,
                             u64 domain) {
  std::set<Row> used;
  while (used.size() < n) {
    Row r;
    for (u64 j = 0; j < arity; ++j)
      r.push_back(std::to_string(1 + rng() % domain));
    used.insert(r);
  }
  return {used.begin(), used.end()};
}

struct NumLess {
  bool operator()(const Row& a, const Row& b) const {
    for (size_t i = 0; i < a.size(); ++i) {
      u64 x = std::stoull(a[i]), y = std::stoull(b[i]);
      if (x != y) return x < y;
    }
    return false;
  }
};

}  // namespace

TEST_CASE("selection matches the oracle (general setting)") {
  Database db(Setting::general);
  db.add_relation(srel("R", {"a", "b"},
                       {{"u", "v"}, {"u", "u"}, {"w", "w"}, {"v", "u"}}));
  Machine m;
  RelationArray A = make_array(m, db, 0);
  RelationArray c = selection_const(m, db, A, "a", "u", kHalf, kHalf);
  PlainRelation pr = oracle::from_db(db, "R");
  CHECK(out_rows(m, db, c) == oracle::select_const(pr, "a", "u").rows);

  RelationArray e = selection_eq(m, db, A, "a", "b", kHalf, kHalf);
  CHECK(out_rows(m, db, e) == oracle::select_eq(pr, "a", "b").rows);
}

TEST_CASE("projection deduplicates (dictionary setting)") {
  Database db(Setting::dictionary);
  db.add_relation(srel("R", {"a", "b"}, {{"1", "2"}, {"1", "3"}, {"4", "2"}}));
  Machine m;
  RelationArray A = make_array(m, db, 0);
  RelationArray p = projection(m, db, A, {"b"}, kHalf, kHalf);
  PlainRelation pr = oracle::from_db(db, "R");
  CHECK(out_rows(m, db, p) == oracle::project(pr, {"b"}).rows);
  CHECK(out_count(m, p) == 2);  // concise
}

TEST_CASE("projection in the ordered setting needs a surviving prefix") {
  Database db(Setting::ordered);
  db.add_relation(srel("R", {"a", "b"},
                       {{"p", "2"}, {"p", "3"}, {"q", "1"}}, {"a", "b"}));
  Machine m;
  RelationArray A = make_array(m, db, 0);
  RelationArray p = projection(m, db, A, {"a"}, kHalf, kHalf);
  CHECK(out_rows(m, db, p) == std::set<Row>{{"p"}, {"q"}});
  CHECK_THROWS_AS(projection(m, db, A, {"b"}, kHalf, kHalf), fault);
}

TEST_CASE("semijoin, difference, union match the oracle (dictionary)") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    Database db(Setting::dictionary);
    db.add_relation(srel("R", {"x", "y"}, random_rows(rng, 30, 2, 12)));
    db.add_relation(srel("S", {"y", "z"}, random_rows(rng, 25, 2, 12)));
    db.add_relation(srel("T", {"x", "y"}, random_rows(rng, 20, 2, 12)));
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    RelationArray T = make_array(m, db, 2);
    PlainRelation pr = oracle::from_db(db, "R");
    PlainRelation ps = oracle::from_db(db, "S");
    PlainRelation pt = oracle::from_db(db, "T");
    pr.attrs = {"x", "y"};
    ps.attrs = {"y", "z"};
    pt.attrs = {"x", "y"};

    RelationArray sj = semijoin(m, db, R, S, kHalf, kHalf);
    CHECK(out_rows(m, db, sj) == oracle::semijoin(pr, ps).rows);

    RelationArray df = difference(m, db, R, T, kHalf, kHalf);
    CHECK(out_rows(m, db, df) == oracle::difference(pr, pt).rows);

    RelationArray un = set_union(m, db, R, T, kHalf, kHalf);
    CHECK(out_rows(m, db, un) == oracle::set_union(pr, pt).rows);
    CHECK(out_count(m, un) == oracle::set_union(pr, pt).rows.size());
  }
}

TEST_CASE("ordered semijoin dispatches on the available order") {
  std::mt19937_64 rng(47);
  Database db(Setting::ordered);
  auto rr = random_rows(rng, 25, 2, 10);
  auto ss = random_rows(rng, 20, 2, 10);
  std::sort(ss.begin(), ss.end());
  std::sort(rr.begin(), rr.end());
  db.add_relation(srel("R", {"x", "y"}, rr, {"x", "y"}));
  db.add_relation(srel("S", {"x", "z"}, ss, {"x", "z"}));
  PlainRelation pr = oracle::from_db(db, "R");
  PlainRelation ps = oracle::from_db(db, "S");

  // B ordered: descent into S
  {
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    RelationArray sj = semijoin(m, db, R, S, kHalf, kHalf);
    CHECK(out_rows(m, db, sj) == oracle::semijoin(pr, ps).rows);
  }
  // B unordered but A ordered: posting into R
  {
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    S.ordered_by.clear();
    RelationArray sj = semijoin(m, db, R, S, kHalf, kHalf);
    CHECK(out_rows(m, db, sj) == oracle::semijoin(pr, ps).rows);
  }
  // neither order usable
  {
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    R.ordered_by.clear();
    S.ordered_by.clear();
    CHECK_THROWS_AS(semijoin(m, db, R, S, kHalf, kHalf), fault);
  }
}

TEST_CASE("hash join matches the oracle") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 6; ++trial) {
    Database db(Setting::dictionary);
    db.add_relation(srel("R", {"x", "y"}, random_rows(rng, 40, 2, 10)));
    db.add_relation(srel("S", {"y", "z"}, random_rows(rng, 35, 2, 10)));
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    RelationArray j = join(m, db, R, S, JoinVariant::DictionaryHash, kHalf,
                           kHalf);
    CHECK(j.schema.attrs == std::vector<std::string>{"x", "y", "z"});
    PlainRelation pr = oracle::from_db(db, "R");
    PlainRelation ps = oracle::from_db(db, "S");
    pr.attrs = {"x", "y"};
    ps.attrs = {"y", "z"};
    auto want = oracle::natural_join(pr, ps).rows;
    CHECK(out_rows(m, db, j) == want);
    CHECK(out_count(m, j) == want.size());            // concise output
    CHECK(j.cells.count <= (want.size() * 3) / 2 + 1);  // within (1+lambda)
  }
}

TEST_CASE("ordered join variants match the oracle") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 4; ++trial) {
    Database db(Setting::dictionary);
    auto rr = random_rows(rng, 30, 2, 8);
    auto ss = random_rows(rng, 25, 2, 8);
    std::sort(rr.begin(), rr.end(), NumLess{});
    std::sort(ss.begin(), ss.end(), NumLess{});
    db.add_relation(srel("R", {"y", "x"}, rr, {"y", "x"}));
    db.add_relation(srel("S", {"y", "z"}, ss, {"y", "z"}));
    PlainRelation pr = oracle::from_db(db, "R");
    PlainRelation ps = oracle::from_db(db, "S");
    pr.attrs = {"y", "x"};
    ps.attrs = {"y", "z"};
    auto want = oracle::natural_join(pr, ps).rows;

    for (JoinVariant v :
         {JoinVariant::OrderedIntoOther, JoinVariant::OrderedIntoSelf}) {
      Machine m;
      RelationArray R = make_array(m, db, 0);
      RelationArray S = make_array(m, db, 1);
      RelationArray j = join(m, db, R, S, v, kHalf, kHalf);
      CHECK(out_rows(m, db, j) == want);
      CHECK(out_count(m, j) == want.size());
    }
  }
}

TEST_CASE("naive join matches the oracle in the general setting") {
  std::mt19937_64 rng(61);
  Database db(Setting::general);
  db.add_relation(srel("R", {"x", "y"}, random_rows(rng, 20, 2, 6)));
  db.add_relation(srel("S", {"y", "z"}, random_rows(rng, 18, 2, 6)));
  Machine m;
  RelationArray R = make_array(m, db, 0);
  RelationArray S = make_array(m, db, 1);
  RelationArray j = join(m, db, R, S, JoinVariant::Naive, kHalf, kHalf);
  PlainRelation pr = oracle::from_db(db, "R");
  PlainRelation ps = oracle::from_db(db, "S");
  pr.attrs = {"x", "y"};
  ps.attrs = {"y", "z"};
  CHECK(out_rows(m, db, j) == oracle::natural_join(pr, ps).rows);

  // hash variant refuses the general setting
  CHECK_THROWS_AS(join(m, db, R, S, JoinVariant::DictionaryHash, kHalf, kHalf),
                  fault);
}

TEST_CASE("join with no common attributes is a cross product") {
  Database db(Setting::dictionary);
  db.add_relation(srel("R", {"x"}, {{"1"}, {"2"}}));
  db.add_relation(srel("S", {"z"}, {{"3"}, {"4"}, {"5"}}));
  Machine m;
  RelationArray R = make_array(m, db, 0);
  RelationArray S = make_array(m, db, 1);
  RelationArray j = join(m, db, R, S, JoinVariant::DictionaryHash, kHalf,
                         kHalf);
  CHECK(out_rows(m, db, j).size() == 6);
  CHECK(out_count(m, j) == 6);
}

TEST_CASE("empty inputs") {
  Database db(Setting::dictionary);
  db.add_relation(srel("R", {"x", "y"}, {}));
  db.add_relation(srel("S", {"y", "z"}, {{"1", "2"}}));
  Machine m;
  RelationArray R = make_array(m, db, 0);
  RelationArray S = make_array(m, db, 1);
  RelationArray j = join(m, db, R, S, JoinVariant::DictionaryHash, kHalf,
                         kHalf);
  CHECK(out_count(m, j) == 0);
  RelationArray sj = semijoin(m, db, S, R, kHalf, kHalf);
  CHECK(out_count(m, sj) == 0);
}

TEST_CASE("join depth is input-size independent") {
  auto depth_at = [&](u64 n) {
    std::mt19937_64 rng(71);
    Database db(Setting::dictionary);
    db.add_relation(srel("R", {"x", "y"}, random_rows(rng, n, 2, 2 * n)));
    db.add_relation(srel("S", {"y", "z"}, random_rows(rng, n, 2, 2 * n)));
    Machine m;
    RelationArray R = make_array(m, db, 0);
    RelationArray S = make_array(m, db, 1);
    const u64 before = m.metrics().depth;
    RelationArray j =
        join(m, db, R, S, JoinVariant::DictionaryHash, kHalf, kHalf);
    (void)j;
    return m.metrics().depth - before;
  };
  CHECK(depth_at(128) == depth_at(2048));
}
