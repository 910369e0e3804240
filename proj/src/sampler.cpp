#include "relgp/sampler.hpp"

#include <algorithm>

namespace relgp {

SampleStrategy parse_strategy(const std::string& s) {
  if (s == "uniform") return SampleStrategy::Uniform;
  if (s == "last") return SampleStrategy::Last;
  raise(ErrorKind::ConfigError, "unknown strategy '" + s + "' (uniform|last)");
}

const char* strategy_name(SampleStrategy s) {
  return s == SampleStrategy::Uniform ? "uniform" : "last";
}

void SamplerConfig::validate() const {
  if (fanouts.empty()) raise(ErrorKind::ConfigError, "fanouts must be non-empty");
  for (int f : fanouts)
    if (f < 0) raise(ErrorKind::ConfigError, "fanouts must be >= 0");
}

size_t SampledSubgraph::num_edges() const {
  size_t n = 0;
  for (const auto& rel : in_nbrs)
    for (const auto& bucket : rel) n += bucket.size();
  return n;
}

uint32_t SampledSubgraph::local_of(NodeId id) const {
  auto it = local.find(id);
  if (it == local.end()) raise(ErrorKind::UnknownNode, "node not in subgraph");
  return it->second;
}

SampledSubgraph sample_subgraph(const EntityGraph& g, NodeId seed, Timestamp t_star,
                                const SamplerConfig& cfg) {
  cfg.validate();
  if (!g.has_node(seed)) raise(ErrorKind::UnknownNode, "seed does not exist");

  SampledSubgraph sub;
  sub.seed = seed;
  sub.seed_time = t_star;
  // The seed is the prediction target: always included, its own tau exempt.
  sub.nodes.push_back(seed);
  sub.hop.push_back(0);
  sub.local[seed] = 0;

  std::vector<NodeId> frontier{seed};
  for (size_t hop = 0; hop < cfg.fanouts.size(); ++hop) {
    int cap = cfg.fanouts[hop];
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      for (uint32_t rel : g.relations_into(g.type_of(v))) {
        auto slice = g.valid_neighbors(v, rel, t_star, cfg.strict_time);
        size_t m = slice.count;
        size_t take = std::min<size_t>(m, static_cast<size_t>(cap));
        std::vector<NodeId> picked;
        picked.reserve(take);
        if (take == m) {
          picked.assign(slice.ids, slice.ids + m);
        } else if (cfg.strategy == SampleStrategy::Last) {
          // Bucket is (time, id)-ascending; the suffix holds the most recent
          // entries with larger ids winning time ties.
          picked.assign(slice.ids + (m - take), slice.ids + m);
        } else {
          Rng rng = keyed_rng({cfg.rng_seed, v, hop, rel});
          std::vector<size_t> idx(m);
          for (size_t i = 0; i < m; ++i) idx[i] = i;
          for (size_t i = 0; i < take; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(m - i));
            std::swap(idx[i], idx[j]);
          }
          for (size_t i = 0; i < take; ++i) picked.push_back(slice.ids[idx[i]]);
        }
        for (NodeId w : picked) {
          if (sub.local.count(w)) continue;  // de-duplicated across hops
          sub.local[w] = static_cast<uint32_t>(sub.nodes.size());
          sub.nodes.push_back(w);
          sub.hop.push_back(static_cast<int>(hop) + 1);
          next.push_back(w);
        }
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }

  // Induced edges: every graph edge between two sampled nodes is kept
  // (sampled non-seed nodes already satisfy the temporal filter).
  sub.in_nbrs.assign(g.num_relations(), {});
  for (size_t rel = 0; rel < g.num_relations(); ++rel)
    sub.in_nbrs[rel].resize(sub.nodes.size());
  for (uint32_t dst_local = 0; dst_local < sub.nodes.size(); ++dst_local) {
    NodeId v = sub.nodes[dst_local];
    for (uint32_t rel : g.relations_into(g.type_of(v))) {
      auto slice = g.valid_neighbors(v, rel, kMaxTime, false);  // full bucket
      auto& bucket = sub.in_nbrs[rel][dst_local];
      for (size_t i = 0; i < slice.count; ++i) {
        auto it = sub.local.find(slice.ids[i]);
        if (it != sub.local.end()) bucket.push_back(it->second);
      }
      // Sorted by global id so downstream aggregation order is canonical.
      std::sort(bucket.begin(), bucket.end(), [&](int64_t a, int64_t b) {
        return sub.nodes[a] < sub.nodes[b];
      });
    }
  }
  return sub;
}

}  // namespace relgp
