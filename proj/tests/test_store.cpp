#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "relgp/store.hpp"
#include "test_db_util.hpp"
#include "test_util.hpp"

using namespace relgp;

TEST_CASE("manifest with two tables yields the declared link set") {
  std::string dir = testutil::temp_dir("store_basic");
  Database db = testutil::make_users_orders(dir,
                                            "id,age\nu1,30\nu2,\n",
                                            "oid,user_id,amount,ts\no1,u1,9.5,100\no2,u1,3,200\n");
  REQUIRE(db.tables.size() == 2);
  CHECK(db.table_index("users") == 0);
  CHECK(db.table_index("orders") == 1);
  REQUIRE(db.links.size() == 1);
  CHECK(db.links[0] == std::make_pair(1u, 0u));  // (orders, users)
  CHECK(db.dangling_fkey_count == 0);

  // Missing cells become explicit missing values.
  CHECK(db.table("users").rows[1].attrs[1].missing);
  CHECK_FALSE(db.table("users").rows[0].attrs[1].missing);
  CHECK(db.table("users").rows[0].attrs[1].number == 30.0);

  // Non-temporal rows carry the sentinel; temporal rows their timestamp.
  CHECK(db.table("users").rows[0].time == kNegInfTime);
  CHECK(db.table("orders").rows[0].time == 100);
  CHECK(db.table("orders").rows[1].time == 200);
}

TEST_CASE("duplicate primary key is rejected") {
  std::string dir = testutil::temp_dir("store_dup");
  try {
    testutil::make_users_orders(dir, "id,age\nu1,30\nu1,40\n", "oid,user_id,amount,ts\n");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicatePrimaryKey);
  }
}

TEST_CASE("dangling foreign keys are kept and counted") {
  std::string dir = testutil::temp_dir("store_dangle");
  Database db = testutil::make_users_orders(
      dir, "id,age\nu1,30\n", "oid,user_id,amount,ts\no1,u99,5,10\no2,u1,2,20\n");
  CHECK(db.table("orders").rows.size() == 2);

  // Linear-scan oracle over all fkey cells.
  size_t oracle = 0;
  const Table& orders = db.table("orders");
  for (const Entity& e : orders.rows)
    if (e.fkeys[0]) {
      bool found = false;
      for (const Entity& u : db.table("users").rows)
        if (u.pkey == *e.fkeys[0]) found = true;
      if (!found) ++oracle;
    }
  CHECK(oracle == 1);
  CHECK(db.dangling_fkey_count == oracle);
}

TEST_CASE("missing csv and absent columns raise typed errors") {
  std::string dir = testutil::temp_dir("store_err");
  testutil::write_file(dir + "/manifest.json", testutil::users_orders_manifest());
  testutil::write_file(dir + "/users.csv", "id,age\nu1,1\n");
  try {
    load_database(dir + "/manifest.json", dir);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingFile);
  }
  testutil::write_file(dir + "/orders.csv", "oid,user_id,ts\no1,u1,5\n");  // no amount
  try {
    load_database(dir + "/manifest.json", dir);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaMismatch);
  }
}

TEST_CASE("unparseable numeric cells respect the configured threshold") {
  std::string dir = testutil::temp_dir("store_badnum");
  testutil::write_file(dir + "/manifest.json", testutil::users_orders_manifest());
  testutil::write_file(dir + "/users.csv", "id,age\nu1,notanumber\n");
  testutil::write_file(dir + "/orders.csv", "oid,user_id,amount,ts\n");
  try {
    load_database(dir + "/manifest.json", dir);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaMismatch);
  }
  LoadOptions lenient;
  lenient.unparseable_threshold = 1;
  Database db = load_database(dir + "/manifest.json", dir, lenient);
  CHECK(db.table("users").rows[0].attrs[1].missing);
  CHECK(db.unparseable_cell_count == 1);
}

TEST_CASE("key index matches the definition on the worked example") {
  std::string dir = testutil::temp_dir("store_index");
  Database db = testutil::make_users_orders(
      dir, "id,age\nu1,30\n", "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\n");
  KeyIndex index = build_key_index(db);
  CHECK(index.pk[0].at("u1") == 0);
  const auto& refs = index.fk_refs[1][0].at("u1");
  CHECK(refs == std::vector<uint32_t>{0, 1});
}

TEST_CASE("key index of an empty table is empty") {
  std::string dir = testutil::temp_dir("store_empty");
  Database db = testutil::make_users_orders(dir, "id,age\n", "oid,user_id,amount,ts\n");
  KeyIndex index = build_key_index(db);
  CHECK(index.pk[0].empty());
  CHECK(index.fk_refs[1][0].empty());
}

TEST_CASE("randomized database: index equals the full-scan oracle") {
  std::string dir = testutil::temp_dir("store_rand");
  Rng rng(2024);
  Database db = testutil::make_random_db(dir, rng, 40, 10, 500, 0.05);
  KeyIndex index = build_key_index(db);

  // Oracle: for every table, fkey ordinal and target key, scan all rows.
  for (size_t ti = 0; ti < db.tables.size(); ++ti) {
    const Table& t = db.tables[ti];
    for (size_t f = 0; f < t.spec.foreign_keys.size(); ++f) {
      const Table& target = db.table(t.spec.foreign_keys[f].target_table);
      for (const Entity& te : target.rows) {
        std::vector<uint32_t> oracle;
        for (uint32_t r = 0; r < t.rows.size(); ++r)
          if (t.rows[r].fkeys[f] && *t.rows[r].fkeys[f] == te.pkey) oracle.push_back(r);
        auto it = index.fk_refs[ti][f].find(te.pkey);
        std::vector<uint32_t> got = it == index.fk_refs[ti][f].end()
                                        ? std::vector<uint32_t>{}
                                        : it->second;
        CHECK(got == oracle);
      }
    }
    for (uint32_t r = 0; r < t.rows.size(); ++r)
      CHECK(index.pk[ti].at(t.rows[r].pkey) == r);
  }
}

TEST_CASE("save + reload round-trips the database") {
  std::string dir = testutil::temp_dir("store_rt");
  Rng rng(77);
  Database db = testutil::make_random_db(dir, rng, 25, 8, 120, 0.1);

  std::string dir2 = testutil::temp_dir("store_rt2");
  save_database(db, dir2);
  Database db2 = load_database(dir2 + "/manifest.json", dir2);
  CHECK(db == db2);
  CHECK(db2.dangling_fkey_count == db.dangling_fkey_count);
}

TEST_CASE("entity counts equal csv data-row counts") {
  std::string dir = testutil::temp_dir("store_count");
  Rng rng(5);
  Database db = testutil::make_random_db(dir, rng, 12, 4, 33);
  auto users_rows = read_csv(dir + "/users.csv");
  auto orders_rows = read_csv(dir + "/orders.csv");
  CHECK(db.table("users").rows.size() == users_rows.size() - 1);
  CHECK(db.table("orders").rows.size() == orders_rows.size() - 1);
}

TEST_CASE("self-referential tables load and are flagged") {
  std::string dir = testutil::temp_dir("store_self");
  testutil::write_file(dir + "/manifest.json", R"({
  "tables": [
    {"name": "employees", "file": "employees.csv", "primary_key": "id",
     "columns": [{"name": "id", "kind": "categorical"}, {"name": "manager", "kind": "categorical"}],
     "foreign_keys": [{"column": "manager", "target_table": "employees"}]}
  ]
})");
  testutil::write_file(dir + "/employees.csv", "id,manager\ne1,\ne2,e1\ne3,e1\n");
  Database db = load_database(dir + "/manifest.json", dir);
  CHECK(db.self_link_count == 1);
  REQUIRE(db.links.size() == 1);
  CHECK(db.links[0] == std::make_pair(0u, 0u));
}

TEST_CASE("csv quoting round-trips commas, quotes and newlines") {
  std::string dir = testutil::temp_dir("store_csv");
  std::vector<std::vector<std::string>> rows = {
      {"a", "b"}, {"x,y", "he said \"hi\""}, {"line\nbreak", ""}};
  write_csv(dir + "/t.csv", rows);
  auto out = read_csv(dir + "/t.csv");
  CHECK(out == rows);
}
