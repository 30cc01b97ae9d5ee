#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pramql/array_ops.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace pramql;

namespace {

using Row = std::vector<u64>;

HostRelation nrel(std::string name, std::vector<std::string> attrs,
                  const std::vector<Row>& rows) {
  HostRelation r;
  r.schema.name = std::move(name);
  r.schema.attrs = std::move(attrs);
  for (const auto& row : rows) {
    std::vector<std::string> sr;
    for (u64 v : row) sr.push_back(std::to_string(v));
    r.rows.push_back(std::move(sr));
  }
  return r;
}

std::vector<Row> host_rows(const Machine& m, const RelationArray& a) {
  std::vector<Row> rows;
  for (u64 i = 0; i < a.cells.count; ++i) {
    if (!m.host_read(a.cells.h, a.cells.word_of(i, 0))) continue;
    Row r;
    for (u64 j = 0; j < a.arity(); ++j)
      r.push_back(m.host_read(a.cells.h, a.cells.word_of(i, a.payload(j))));
    rows.push_back(std::move(r));
  }
  return rows;
}

Row row_at(const Machine& m, const RelationArray& a, u64 i) {
  Row r;
  for (u64 j = 0; j < a.arity(); ++j)
    r.push_back(m.host_read(a.cells.h, a.cells.word_of(i, a.payload(j))));
  return r;
}

u64 link_at(const Machine& m, const RelationArray& a, u64 i, LinkSlot s) {
  return m.host_read(a.cells.h, a.cells.word_of(i, a.link(s)));
}

std::vector<Row> distinct_rows(std::mt19937_64& rng, u64 n, u64 arity,
                               u64 domain) {
  std::set<Row> used;
  while (used.size() < n) {
    Row r;
    for (u64 j = 0; j < arity; ++j) r.push_back(1 + rng() % domain);
    used.insert(r);
  }
  return {used.begin(), used.end()};
}

}  // namespace

TEST_CASE("tuple keys respect lexicographic order") {
  Database db(Setting::dictionary);
  db.add_relation(nrel("R", {"a", "b"}, {{1, 5}, {2, 1}, {1, 2}}));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  CellView kv = tuple_keys(m, db, a, {0, 1});
  u64 k0 = m.host_read(kv.h, kv.word_of(0, 1));
  u64 k1 = m.host_read(kv.h, kv.word_of(1, 1));
  u64 k2 = m.host_read(kv.h, kv.word_of(2, 1));
  CHECK(k2 < k0);  // (1,2) < (1,5)
  CHECK(k0 < k1);  // (1,5) < (2,1)
}

TEST_CASE("compact_rel preserves order and links partners") {
  Database db(Setting::dictionary);
  db.add_relation(nrel("R", {"a"}, {{5}, {6}, {7}, {8}}));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  m.host_write(a.cells.h, a.cells.word_of(1, 0), 0);  // clear {6}
  RelationArray c = compact_rel(m, a, ratio(1, 2), ratio(1, 2));
  CHECK(host_rows(m, c) == std::vector<Row>{{5}, {7}, {8}});
  // mutual partner links
  for (u64 i : {u64{0}, u64{2}, u64{3}}) {
    u64 f = link_at(m, a, i, kPartner);
    REQUIRE(f != 0);
    CHECK(link_at(m, c, f - 1, kPartner) == i + 1);
    CHECK(row_at(m, c, f - 1) == row_at(m, a, i));
  }
  CHECK(link_at(m, a, 1, kPartner) == 0);
}

TEST_CASE("sort_rel orders by X then remaining attributes") {
  std::mt19937_64 rng(5);
  Database db(Setting::dictionary);
  auto rows = distinct_rows(rng, 200, 2, 50);
  std::shuffle(rows.begin(), rows.end(), rng);
  db.add_relation(nrel("R", {"a", "b"}, rows));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  // clear a few cells; sorting must skip them
  for (u64 i : {u64{3}, u64{77}, u64{140}})
    m.host_write(a.cells.h, a.cells.word_of(i, 0), 0);
  RelationArray s = sort_rel(m, db, a, {"b"}, ratio(1, 2), ratio(1, 2));
  CHECK(s.fully_ordered);
  CHECK(s.ordered_by == std::vector<std::string>{"b", "a"});

  std::vector<Row> expect;
  for (u64 i = 0; i < rows.size(); ++i)
    if (i != 3 && i != 77 && i != 140) expect.push_back(rows[i]);
  std::sort(expect.begin(), expect.end(), [](const Row& x, const Row& y) {
    return std::make_pair(x[1], x[0]) < std::make_pair(y[1], y[0]);
  });
  CHECK(host_rows(m, s) == expect);
  CHECK(s.cells.count <= (rows.size() * 3) / 2 + 1);

  // partner links connect input and output cells carrying the same tuple
  u64 checked = 0;
  for (u64 i = 0; i < a.cells.count; ++i) {
    if (!m.host_read(a.cells.h, a.cells.word_of(i, 0))) continue;
    u64 f = link_at(m, a, i, kPartner);
    REQUIRE(f != 0);
    CHECK(row_at(m, s, f - 1) == row_at(m, a, i));
    CHECK(link_at(m, s, f - 1, kPartner) == i + 1);
    ++checked;
  }
  CHECK(checked == 197);
}

TEST_CASE("hash table probing") {
  Machine m;
  const u64 n = 64;
  CellView kv{m.allocate(2 * n), n, 2, 0};
  std::mt19937_64 rng(9);
  std::set<u64> keyset;
  while (keyset.size() < n) keyset.insert(rng() % 100000);
  std::vector<u64> keys(keyset.begin(), keyset.end());
  std::shuffle(keys.begin(), keys.end(), rng);
  for (u64 i = 0; i < n; ++i) {
    m.host_write(kv.h, kv.word_of(i, 0), 1);
    m.host_write(kv.h, kv.word_of(i, 1), keys[i]);
  }
  HashTable ht = build_hash_table(m, kv, 100000);
  ArrayHandle res = m.allocate(2 * n);
  m.step(2 * n, [&](Step& s, u64 p) {
    const u64 q = p - 1;
    const u64 probe = q < n ? keys[q] : 100000 + q;  // absent for q >= n
    s.write(res, q, ht.probe(s, probe));
  });
  for (u64 q = 0; q < n; ++q) CHECK(m.host_read(res, q) == q + 1);
  for (u64 q = n; q < 2 * n; ++q) CHECK(m.host_read(res, q) == 0);

  // duplicate keys resolve to one shared representative
  CellView dup{m.allocate(6), 3, 2, 0};
  for (u64 i = 0; i < 3; ++i) {
    m.host_write(dup.h, dup.word_of(i, 0), 1);
    m.host_write(dup.h, dup.word_of(i, 1), 42);
  }
  HashTable ht2 = build_hash_table(m, dup, 100);
  ArrayHandle r2 = m.allocate(3);
  m.step(3, [&](Step& s, u64 p) { s.write(r2, p - 1, ht2.probe(s, 42)); });
  u64 w = m.host_read(r2, 0);
  CHECK(w >= 1);
  CHECK(m.host_read(r2, 1) == w);
  CHECK(m.host_read(r2, 2) == w);

  Machine common(MachineConfig{WriteMode::Common});
  CellView kc{common.allocate(2), 1, 2, 0};
  CHECK_THROWS_AS(build_hash_table(common, kc, 10), fault);
}

TEST_CASE("search_tuples_dict finds partners on X") {
  std::mt19937_64 rng(13);
  Database db(Setting::dictionary);
  auto ar = distinct_rows(rng, 60, 2, 30);
  auto br = distinct_rows(rng, 40, 2, 30);
  db.add_relation(nrel("A", {"x", "y"}, ar));
  db.add_relation(nrel("B", {"y", "z"}, br));
  Machine m;
  RelationArray A = make_array(m, db, 0);
  RelationArray B = make_array(m, db, 1);
  search_tuples_dict(m, db, A, B, {"y"});
  std::set<u64> bvals;
  for (const auto& r : br) bvals.insert(r[0]);
  for (u64 i = 0; i < A.cells.count; ++i) {
    u64 part = link_at(m, A, i, kPartner);
    if (bvals.count(ar[i][1])) {
      REQUIRE(part != 0);
      CHECK(row_at(m, B, part - 1)[0] == ar[i][1]);
    } else {
      CHECK(part == 0);
    }
  }
}

TEST_CASE("search_ordered_into_B descends into a gapped ordered array") {
  std::mt19937_64 rng(17);
  for (Setting st : {Setting::dictionary, Setting::ordered}) {
    Database db(st);
    auto br = distinct_rows(rng, 80, 2, 25);
    std::sort(br.begin(), br.end());
    auto ar = distinct_rows(rng, 50, 2, 25);
    db.add_relation(nrel("A", {"x", "y"}, ar));
    auto bh = nrel("B", {"x", "w"}, br);
    if (st == Setting::ordered) {
      // byte-wise order differs from numeric; re-sort the string rows
      std::sort(bh.rows.begin(), bh.rows.end());
    }
    bh.ordered_by = {"x", "w"};
    db.add_relation(std::move(bh));
    Machine m;
    RelationArray A = make_array(m, db, 0);
    RelationArray B = make_array(m, db, 1);
    // punch gaps into B
    std::set<u64> gaps;
    for (int g = 0; g < 15; ++g) gaps.insert(rng() % B.cells.count);
    for (u64 g : gaps) m.host_write(B.cells.h, B.cells.word_of(g, 0), 0);
    search_ordered_into_B(m, db, A, B, {"x"}, ratio(1, 2));

    std::set<std::string> bx;
    for (u64 i = 0; i < B.cells.count; ++i)
      if (m.host_read(B.cells.h, B.cells.word_of(i, 0)))
        bx.insert(db.relation(1).rows[i][0]);
    for (u64 i = 0; i < A.cells.count; ++i) {
      u64 part = link_at(m, A, i, kPartner);
      const std::string& want = db.relation(0).rows[i][0];
      if (bx.count(want)) {
        REQUIRE(part != 0);
        CHECK(db.relation(1).rows[part - 1][0] == want);
        CHECK(m.host_read(B.cells.h, B.cells.word_of(part - 1, 0)) == 1);
      } else {
        CHECK(part == 0);
      }
    }
  }
}

TEST_CASE("search_ordered_into_A posts partners into the ordered side") {
  std::mt19937_64 rng(21);
  Database db(Setting::dictionary);
  auto ar = distinct_rows(rng, 70, 2, 12);  // many duplicate x values
  std::sort(ar.begin(), ar.end());
  auto ah = nrel("A", {"x", "y"}, ar);
  ah.ordered_by = {"x", "y"};
  db.add_relation(std::move(ah));
  auto br = distinct_rows(rng, 30, 2, 12);
  db.add_relation(nrel("B", {"x", "z"}, br));
  Machine m;
  RelationArray A = make_array(m, db, 0);
  A.fully_ordered = true;
  RelationArray B = make_array(m, db, 1);
  search_ordered_into_A(m, db, A, B, {"x"}, ratio(1, 2));
  std::set<u64> bx;
  for (const auto& r : br) bx.insert(r[0]);
  for (u64 i = 0; i < A.cells.count; ++i) {
    u64 part = link_at(m, A, i, kPartner);
    if (bx.count(ar[i][0])) {
      REQUIRE(part != 0);
      CHECK(br[part - 1][0] == ar[i][0]);
    } else {
      CHECK(part == 0);
    }
  }
  std::set<u64> ax;
  for (const auto& r : ar) ax.insert(r[0]);
  for (u64 i = 0; i < B.cells.count; ++i) {
    u64 part = link_at(m, B, i, kPartner);
    if (ax.count(br[i][0])) {
      REQUIRE(part != 0);
      CHECK(ar[part - 1][0] == br[i][0]);
    } else {
      CHECK(part == 0);
    }
  }
}

TEST_CASE("dedup_dict empties duplicates and links representatives") {
  Database db(Setting::dictionary);
  db.add_relation(nrel("R", {"a", "b"},
                       {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {2, 1}}));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  // forge duplicates by overwriting payloads (intermediates can repeat)
  for (u64 i : {u64{1}, u64{3}}) {
    m.host_write(a.cells.h, a.cells.word_of(i, a.payload(0)), 1);
    m.host_write(a.cells.h, a.cells.word_of(i, a.payload(1)), 2);
  }
  dedup_dict(m, db, a);
  auto rows = host_rows(m, a);
  std::sort(rows.begin(), rows.end());
  CHECK(rows == std::vector<Row>{{1, 2}, {2, 1}, {5, 6}});
  // the three equal tuples share one representative
  std::set<u64> reps;
  for (u64 i : {u64{0}, u64{1}, u64{3}}) {
    u64 r = link_at(m, a, i, kRepresentative);
    REQUIRE(r != 0);
    reps.insert(r);
    CHECK(row_at(m, a, r - 1) == Row{1, 2});
  }
  CHECK(reps.size() == 1);
}

TEST_CASE("dedup_ordered keeps run starts") {
  Database db(Setting::dictionary);
  db.add_relation(nrel("R", {"a"}, {{2}, {4}, {5}, {7}, {9}}));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  a.ordered_by = {"a"};
  a.fully_ordered = true;
  for (u64 i : {u64{2}, u64{3}})
    m.host_write(a.cells.h, a.cells.word_of(i, a.payload(0)), 4);
  m.host_write(a.cells.h, a.cells.word_of(4, 0), 0);  // a gap inside
  dedup_ordered(m, db, a, ratio(1, 2));
  CHECK(host_rows(m, a) == std::vector<Row>{{2}, {4}});
  CHECK(link_at(m, a, 2, kRepresentative) == 2);
  CHECK(link_at(m, a, 3, kRepresentative) == 2);
  CHECK(link_at(m, a, 1, kRepresentative) == 2);
  CHECK(link_at(m, a, 0, kRepresentative) == 1);
}

TEST_CASE("schedule_cells mirrors host scheduling") {
  Machine m;
  // task cells: (flag, multiplicity)
  CellView tv{m.allocate(8), 4, 2, 0};
  u64 ms[4] = {2, 0, 3, 1};
  for (u64 i = 0; i < 4; ++i) {
    if (i == 1) continue;  // leave one cell empty
    m.host_write(tv.h, tv.word_of(i, 0), 1);
    m.host_write(tv.h, tv.word_of(i, 1), ms[i]);
  }
  Schedule s = schedule_cells(m, tv, 1, ratio(1, 2), ratio(1, 2));
  std::map<u64, u64> per_task;
  std::map<u64, std::set<u64>> leads;
  for (u64 j = 0; j < s.cells.count; ++j) {
    if (!m.host_read(s.cells.h, s.cells.word_of(j, 0))) continue;
    u64 task = m.host_read(s.cells.h, s.cells.word_of(j, Schedule::kTask));
    u64 lead = m.host_read(s.cells.h, s.cells.word_of(j, Schedule::kLead));
    per_task[task]++;
    leads[task].insert(lead);
  }
  CHECK(per_task == std::map<u64, u64>{{1, 2}, {3, 3}, {4, 1}});
  for (auto& [t, l] : leads) CHECK(l.size() == 1);
}

TEST_CASE("sort depth is input-size independent") {
  auto depth_at = [&](u64 n) {
    std::mt19937_64 rng(33);
    Database db(Setting::dictionary);
    std::vector<Row> rows = distinct_rows(rng, n, 2, 2 * n);
    db.add_relation(nrel("R", {"a", "b"}, rows));
    Machine m;
    RelationArray a = make_array(m, db, 0);
    u64 before = m.metrics().depth;
    RelationArray s = sort_rel(m, db, a, {"a"}, ratio(1, 2), ratio(1, 2));
    (void)s;
    return m.metrics().depth - before;
  };
  CHECK(depth_at(256) == depth_at(4096));
}

TEST_CASE("general setting is rejected where values are needed") {
  Database db(Setting::general);
  HostRelation r;
  r.schema = {"R", {"a"}};
  r.rows = {{"x"}};
  db.add_relation(std::move(r));
  Machine m;
  RelationArray a = make_array(m, db, 0);
  CHECK_THROWS_AS(sort_rel(m, db, a, {"a"}, ratio(1, 2), ratio(1, 2)), fault);
  CHECK_THROWS_AS(dedup_dict(m, db, a), fault);
  RelationArray b = a;
  CHECK_THROWS_AS(search_ordered_into_B(m, db, a, b, {"a"}, ratio(1, 2)),
                  fault);
}
