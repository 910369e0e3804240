#pragma once

// Column encoders for initial node embeddings, heterogeneous GraphSAGE
// message passing with sum aggregation, mean pooling, and the projection MLP
// into the decoder's vector space.

#include <mutex>
#include <unordered_map>

#include "relgp/mask.hpp"
#include "relgp/params.hpp"
#include "relgp/sampler.hpp"

namespace relgp {

struct EncoderConfig {
  int layers = 2;
  int d_g = 128;      // graph encoder output dimension
  int d_l = 64;       // projection output dimension (decoder hidden size)
  double dropout = 0.1;
  int text_buckets = 1024;

  void validate() const;
};

// Per-column encoders with train-split statistics. Fit once, then frozen;
// encoding before fitting raises UnfittedEncoder.
class ColumnEncoder {
 public:
  explicit ColumnEncoder(EncoderConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  // Statistics over rows with tau < cutoff plus non-temporal rows.
  void fit(const Database& db, Timestamp cutoff = kMaxTime);
  bool fitted() const { return fitted_; }
  const EncoderConfig& config() const { return cfg_; }

  // Initial embedding of one entity, dimension d_g. Deterministic per
  // (node, parameters).
  Value encode_columns(const Database& db, NodeId v, ParameterStore& store) const;

  // Same, reading through an eval-only cache keyed by the store version.
  Value encode_columns_cached(const Database& db, NodeId v, ParameterStore& store) const;

  // Entity-level mask substitute: per-table linear lift of the shared
  // trainable mask token h_mask.
  Value masked_entity_input(const Database& db, uint32_t table, ParameterStore& store) const;

  // Cell-level masking: listed column contributions are replaced by the
  // lifted mask token scaled by 1/column_count; other columns stay intact.
  Value encode_columns_cell_masked(const Database& db, NodeId v, ParameterStore& store,
                                   const std::vector<int>& masked_cols) const;

  // Creates every encoder parameter (column maps, GNN weights, projection,
  // mask token and lifts) so checkpoints do not depend on which subgraphs
  // were visited.
  void ensure_params(const Database& db, const EntityGraph& g, ParameterStore& store) const;

 private:
  Value column_contribution(const Database& db, uint32_t table, int col, const Cell& cell,
                            ParameterStore& store) const;
  Value lifted_mask(const Database& db, uint32_t table, ParameterStore& store) const;

  struct NumStats {
    double mean = 0.0;
    double stddev = 1.0;
  };

  EncoderConfig cfg_;
  bool fitted_ = false;
  std::vector<std::vector<NumStats>> num_stats_;                          // [table][col]
  std::vector<std::vector<std::unordered_map<std::string, int>>> cats_;  // [table][col]

  mutable std::mutex cache_mutex_;
  mutable uint64_t cache_version_ = ~0ull;
  mutable std::unordered_map<NodeId, std::vector<double>> cache_;
};

struct GraphEncoding {
  std::vector<Value> node_h;  // per local node, [d_g], post-L-layer states
  Value pooled;               // [d_g], mean over nodes
};

// L heterogeneous layers over the sampled subgraph; neighbors are summed in
// sorted-global-id order (fixed by the sampler), then per-type combine with
// the self state. Dropout applies after each layer during training only.
GraphEncoding encode_graph(const Database& db, const EntityGraph& g,
                           const SampledSubgraph& sub, const ColumnEncoder& cols,
                           ParameterStore& store, const MaskPlan* mask = nullptr,
                           bool training = false, Rng* dropout_rng = nullptr);

// Two-layer perceptron (linear, relu, linear) mapping d_g to d_l; accepts a
// [d_g] vector or an [n, d_g] matrix.
Value project(const Value& h, ParameterStore& store, const EncoderConfig& cfg);

}  // namespace relgp
