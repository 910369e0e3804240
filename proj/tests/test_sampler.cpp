#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "relgp/sampler.hpp"
#include "test_db_util.hpp"

using namespace relgp;

namespace {

struct Fixture {
  std::string dir;
  Database db;
  KeyIndex index;
  EntityGraph graph;

  explicit Fixture(const std::string& tag, const std::string& users,
                   const std::string& orders)
      : dir(testutil::temp_dir(tag)),
        db(testutil::make_users_orders(dir, users, orders)),
        index(build_key_index(db)),
        graph(build_entity_graph(db, index)) {}
};

}  // namespace

TEST_CASE("strategy last picks the largest-timestamp neighbors") {
  Fixture fx("samp_last", "id,age\nu1,1\n",
             "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\no3,u1,3,30\no4,u1,4,40\no5,u1,5,50\n");
  SamplerConfig cfg;
  cfg.fanouts = {2};
  cfg.strategy = SampleStrategy::Last;
  NodeId u1 = pack_node(0, 0);
  SampledSubgraph sub = sample_subgraph(fx.graph, u1, 100, cfg);
  REQUIRE(sub.nodes.size() == 3);
  std::set<NodeId> picked(sub.nodes.begin() + 1, sub.nodes.end());
  CHECK(picked == std::set<NodeId>{pack_node(1, 3), pack_node(1, 4)});  // o4, o5
}

TEST_CASE("all future neighbors leaves the seed alone") {
  Fixture fx("samp_future", "id,age\nu1,1\n",
             "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\n");
  SamplerConfig cfg;
  cfg.fanouts = {4, 4};
  NodeId u1 = pack_node(0, 0);
  SampledSubgraph sub = sample_subgraph(fx.graph, u1, 5, cfg);
  CHECK(sub.nodes == std::vector<NodeId>{u1});
  CHECK(sub.num_edges() == 0);
}

TEST_CASE("sampled subgraphs never contain future nodes") {
  std::string dir = testutil::temp_dir("samp_causal");
  Rng rng(31);
  Database db = testutil::make_random_db(dir, rng, 25, 8, 300);
  EntityGraph g = build_entity_graph(db, build_key_index(db));
  for (SampleStrategy strat : {SampleStrategy::Uniform, SampleStrategy::Last}) {
    for (int trial = 0; trial < 500; ++trial) {
      SamplerConfig cfg;
      cfg.fanouts = {3, 3};
      cfg.strategy = strat;
      cfg.rng_seed = trial;
      uint32_t table = static_cast<uint32_t>(rng.below(db.tables.size()));
      if (db.tables[table].rows.empty()) continue;
      NodeId seed = pack_node(table, static_cast<uint32_t>(rng.below(db.tables[table].rows.size())));
      Timestamp t = rng.uniform_int(0, 1000);
      SampledSubgraph sub = sample_subgraph(g, seed, t, cfg);
      for (size_t i = 1; i < sub.nodes.size(); ++i)  // exhaustive post-hoc scan
        CHECK(g.time_of(sub.nodes[i]) <= t);
    }
  }
}

TEST_CASE("strict mode excludes the boundary timestamp") {
  Fixture fx("samp_strict", "id,age\nu1,1\n",
             "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\n");
  SamplerConfig cfg;
  cfg.fanouts = {4};
  cfg.strict_time = true;
  SampledSubgraph sub = sample_subgraph(fx.graph, pack_node(0, 0), 20, cfg);
  std::set<NodeId> picked(sub.nodes.begin() + 1, sub.nodes.end());
  CHECK(picked == std::set<NodeId>{pack_node(1, 0)});
}

TEST_CASE("identical configuration reproduces identical subgraphs") {
  std::string dir = testutil::temp_dir("samp_det");
  Rng rng(17);
  Database db = testutil::make_random_db(dir, rng, 15, 5, 200);
  EntityGraph g = build_entity_graph(db, build_key_index(db));
  SamplerConfig cfg;
  cfg.fanouts = {2, 2};
  cfg.strategy = SampleStrategy::Uniform;
  cfg.rng_seed = 99;
  NodeId seed = pack_node(0, 3);
  SampledSubgraph a = sample_subgraph(g, seed, 500, cfg);
  SampledSubgraph b = sample_subgraph(g, seed, 500, cfg);
  CHECK(a.nodes == b.nodes);
  CHECK(a.hop == b.hop);
  CHECK(a.in_nbrs == b.in_nbrs);

  cfg.rng_seed = 100;  // different stream picks differently somewhere
  bool any_diff = false;
  for (int probe = 0; probe < 15 && !any_diff; ++probe) {
    SampledSubgraph c = sample_subgraph(g, pack_node(0, probe % 15), 500, cfg);
    SamplerConfig back = cfg;
    back.rng_seed = 99;
    SampledSubgraph d = sample_subgraph(g, pack_node(0, probe % 15), 500, back);
    any_diff = c.nodes != d.nodes;
  }
  CHECK(any_diff);
}

TEST_CASE("per-hop per-relation caps are honored") {
  std::string dir = testutil::temp_dir("samp_cap");
  Rng rng(41);
  Database db = testutil::make_random_db(dir, rng, 10, 4, 250);
  EntityGraph g = build_entity_graph(db, build_key_index(db));
  SamplerConfig cfg;
  cfg.fanouts = {3, 2};
  cfg.strategy = SampleStrategy::Last;
  SampledSubgraph sub = sample_subgraph(g, pack_node(0, 0), 800, cfg);

  // Hop-1 nodes per relation cannot exceed fanouts[0]; with a single seed this
  // is directly countable from hop labels and node types.
  std::map<uint32_t, int> hop1_by_table;
  for (size_t i = 0; i < sub.nodes.size(); ++i)
    if (sub.hop[i] == 1) hop1_by_table[node_table(sub.nodes[i])]++;
  for (auto [table, count] : hop1_by_table) CHECK(count <= 3);
}

TEST_CASE("last with unbounded fanout equals temporal_neighbors") {
  Fixture fx("samp_unbounded", "id,age\nu1,1\n",
             "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\no3,u1,3,30\n");
  SamplerConfig cfg;
  cfg.fanouts = {1000000};
  cfg.strategy = SampleStrategy::Last;
  NodeId u1 = pack_node(0, 0);
  SampledSubgraph sub = sample_subgraph(fx.graph, u1, 25, cfg);
  std::vector<NodeId> sampled(sub.nodes.begin() + 1, sub.nodes.end());
  std::sort(sampled.begin(), sampled.end());
  CHECK(sampled == fx.graph.temporal_neighbors(u1, 0, 25));
}

TEST_CASE("unknown seed raises") {
  Fixture fx("samp_unknown", "id,age\nu1,1\n", "oid,user_id,amount,ts\n");
  SamplerConfig cfg;
  try {
    sample_subgraph(fx.graph, pack_node(7, 7), 0, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownNode);
  }
}

TEST_CASE("induced edges connect all sampled pairs present in the graph") {
  Fixture fx("samp_induced", "id,age\nu1,1\nu2,2\n",
             "oid,user_id,amount,ts\no1,u1,1,10\no2,u1,2,20\no3,u2,3,30\n");
  SamplerConfig cfg;
  cfg.fanouts = {8, 8};
  SampledSubgraph sub = sample_subgraph(fx.graph, pack_node(0, 0), 100, cfg);
  // u1, o1, o2 sampled; u2/o3 unreachable from u1.
  CHECK(sub.nodes.size() == 3);
  // Edges: o1->u1, o2->u1 under rel 0 and u1->o1, u1->o2 under rel 1.
  CHECK(sub.num_edges() == 4);
  uint32_t u1_local = sub.local_of(pack_node(0, 0));
  CHECK(sub.in_nbrs[0][u1_local].size() == 2);
}
