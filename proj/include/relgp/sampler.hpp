#pragma once

// Leakage-free subgraph construction around a seed entity at seed time t*.
// Layered breadth-first expansion with per-hop fanout caps; neighbor draws
// use a counter-style RNG keyed by (seed, node, hop, relation) so results do
// not depend on scheduling.

#include <unordered_map>
#include <vector>

#include "relgp/graph.hpp"

namespace relgp {

enum class SampleStrategy { Uniform, Last };

SampleStrategy parse_strategy(const std::string& s);
const char* strategy_name(SampleStrategy s);

struct SamplerConfig {
  std::vector<int> fanouts{16, 16};  // per-hop caps; length = hop count
  SampleStrategy strategy = SampleStrategy::Last;
  bool strict_time = false;  // filter tau < t* instead of tau <= t*
  uint64_t rng_seed = 0;

  void validate() const;
};

struct SampledSubgraph {
  NodeId seed = 0;
  Timestamp seed_time = 0;
  std::vector<NodeId> nodes;  // local ordinal -> global id; [0] is the seed
  std::vector<int> hop;       // per local node
  std::unordered_map<NodeId, uint32_t> local;

  // Induced in-neighbor lists: [relation][dst local] -> src locals, sorted by
  // the global id of the source node.
  std::vector<std::vector<std::vector<int64_t>>> in_nbrs;

  size_t num_edges() const;
  uint32_t local_of(NodeId id) const;
  bool contains(NodeId id) const { return local.count(id) > 0; }
};

SampledSubgraph sample_subgraph(const EntityGraph& g, NodeId seed, Timestamp t_star,
                                const SamplerConfig& cfg);

}  // namespace relgp
