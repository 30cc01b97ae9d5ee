#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pramql/oracle.hpp>

#include <random>

using namespace pramql;
using oracle::PlainRelation;
using oracle::Row;

namespace {

Database graph_db(const std::vector<std::pair<std::string, std::string>>& e,
                  const std::vector<std::pair<std::string, std::string>>& f) {
  Database db(Setting::general);
  HostRelation E;
  E.schema = {"E", {"a", "b"}};
  for (auto& [x, y] : e) E.rows.push_back({x, y});
  db.add_relation(std::move(E));
  HostRelation F;
  F.schema = {"F", {"a", "b"}};
  for (auto& [x, y] : f) F.rows.push_back({x, y});
  db.add_relation(std::move(F));
  return db;
}

}  // namespace

TEST_CASE("relational algebra basics") {
  PlainRelation r{{"a", "b"}, {{"1", "2"}, {"1", "3"}, {"4", "2"}}};
  PlainRelation s{{"b", "c"}, {{"2", "x"}, {"5", "y"}}};

  CHECK(oracle::project(r, {"a"}).rows == std::set<Row>{{"1"}, {"4"}});
  CHECK(oracle::select_const(r, "a", "1").rows ==
        std::set<Row>{{"1", "2"}, {"1", "3"}});
  PlainRelation rr{{"a", "b"}, {{"1", "1"}, {"1", "2"}}};
  CHECK(oracle::select_eq(rr, "a", "b").rows == std::set<Row>{{"1", "1"}});

  PlainRelation j = oracle::natural_join(r, s);
  CHECK(j.attrs == std::vector<std::string>{"a", "b", "c"});
  CHECK(j.rows == std::set<Row>{{"1", "2", "x"}, {"4", "2", "x"}});

  CHECK(oracle::semijoin(r, s).rows == std::set<Row>{{"1", "2"}, {"4", "2"}});

  PlainRelation t{{"a", "b"}, {{"1", "2"}, {"9", "9"}}};
  CHECK(oracle::difference(r, t).rows == std::set<Row>{{"1", "3"}, {"4", "2"}});
  CHECK(oracle::set_union(r, t).rows.size() == 4);
  PlainRelation wrong{{"x", "y"}, {}};
  CHECK_THROWS_AS(oracle::difference(r, wrong), fault);
}

TEST_CASE("query evaluation on a small graph") {
  Database db = graph_db({{"1", "2"}, {"2", "3"}, {"3", "4"}},
                         {{"3", "7"}, {"4", "8"}});
  Query q = parse_query("q(x,y) :- E(x,y), F(y,z).");
  PlainRelation out = oracle::eval_query(db, q);
  CHECK(out.rows == std::set<Row>{{"2", "3"}, {"3", "4"}});

  // projection away from a join variable
  Query p = parse_query("q(x) :- E(x,y), F(y,z).");
  CHECK(oracle::eval_query(db, p).rows == std::set<Row>{{"2"}, {"3"}});

  // boolean query
  Query b = parse_query("q() :- E(x,y), F(y,z).");
  CHECK(oracle::eval_query(db, b).rows == std::set<Row>{{}});
  Database empty = graph_db({{"1", "2"}}, {});
  CHECK(oracle::eval_query(empty, b).rows.empty());
}

TEST_CASE("repeated variables act as selections") {
  Database db = graph_db({{"1", "1"}, {"1", "2"}, {"3", "3"}}, {});
  Query q = parse_query("q(x) :- E(x,x).");
  CHECK(oracle::eval_query(db, q).rows == std::set<Row>{{"1"}, {"3"}});
}

TEST_CASE("plan evaluation") {
  Database db(Setting::general);
  for (const char* n : {"R", "S", "T", "U"}) {
    HostRelation h;
    h.schema = {n, {"a"}};
    db.add_relation(std::move(h));
  }
  Database db2(Setting::general);
  auto add = [&](const char* n, std::vector<std::string> vals) {
    HostRelation h;
    h.schema = {n, {"a"}};
    for (auto& v : vals) h.rows.push_back({v});
    db2.add_relation(std::move(h));
  };
  add("R", {"1", "2", "3"});
  add("S", {"2", "3", "4"});
  add("T", {"3"});
  add("U", {"9"});
  Plan p = parse_plan("(union (diff (sjoin R S) T) U)");
  CHECK(oracle::eval_plan(db2, p).rows == std::set<Row>{{"2"}, {"9"}});
}

TEST_CASE("reduction keeps exactly the participating tuples") {
  Database db = graph_db({{"1", "2"}, {"2", "3"}, {"5", "6"}},
                         {{"3", "7"}, {"6", "8"}, {"9", "9"}});
  Query q = parse_query("q(x,z) :- E(x,y), F(y,z).");
  auto red = oracle::reduce(db, q);
  REQUIRE(red.size() == 2);
  CHECK(red[0].rows == std::set<Row>{{"2", "3"}, {"5", "6"}});
  CHECK(red[1].rows == std::set<Row>{{"3", "7"}, {"6", "8"}});
}

TEST_CASE("backtracking agrees with join-then-project") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::set<std::pair<std::string, std::string>> es, fs;
    for (int i = 0; i < 15; ++i) {
      es.insert({std::to_string(rng() % 6), std::to_string(rng() % 6)});
      fs.insert({std::to_string(rng() % 6), std::to_string(rng() % 6)});
    }
    Database db = graph_db({es.begin(), es.end()}, {fs.begin(), fs.end()});
    Query q = parse_query("q(x,y,w) :- E(x,y), F(y,z), E(z,w).");
    PlainRelation got = oracle::eval_query(db, q);

    PlainRelation e1 = oracle::materialize_atom(db, q.atoms[0]);
    PlainRelation f = oracle::materialize_atom(db, q.atoms[1]);
    PlainRelation e2 = oracle::materialize_atom(db, q.atoms[2]);
    PlainRelation want = oracle::project(
        oracle::natural_join(oracle::natural_join(e1, f), e2), {"x", "y", "w"});
    CHECK(got.rows == want.rows);
  }
}
