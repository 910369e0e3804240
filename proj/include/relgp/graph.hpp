#pragma once

// Schema graph and heterogeneous relational entity graph. Relations are
// link x direction; entity edges come from resolvable primary-foreign key
// pairs, stored in both orientations. Immutable after build.

#include <string>
#include <vector>

#include "relgp/store.hpp"

namespace relgp {

struct SchemaEdge {
  uint32_t src_table = 0;
  uint32_t dst_table = 0;
  uint32_t link = 0;  // index into Database::links
  bool inverse = false;
};

struct SchemaGraph {
  std::vector<std::string> tables;
  std::vector<SchemaEdge> edges;  // two per link (forward + inverse)

  bool connected() const;  // all tables reachable treating edges as undirected
};

SchemaGraph build_schema_graph(const Database& db);
std::string schema_graph_dot(const SchemaGraph& g);

class EntityGraph {
 public:
  // One relation per (link, direction). Forward carries messages from the
  // fkey-holding row to the pkey row; inverse goes the other way.
  struct Relation {
    uint32_t src_table = 0;
    uint32_t dst_table = 0;
    uint32_t link = 0;
    bool inverse = false;
    // CSR over dst-table row ordinals; each bucket is sorted by
    // (neighbor time, neighbor id) ascending for O(log n + k) temporal cuts.
    std::vector<size_t> offsets;
    std::vector<NodeId> nbr;
    std::vector<Timestamp> nbr_time;
  };

  size_t num_relations() const { return relations_.size(); }
  const Relation& relation(size_t r) const { return relations_[r]; }
  size_t num_nodes() const { return num_nodes_; }
  size_t num_edges() const;  // directed, over all relations

  const Database& db() const { return *db_; }
  bool has_node(NodeId v) const;
  Timestamp time_of(NodeId v) const { return db_->entity(v).time; }
  uint32_t type_of(NodeId v) const { return node_table(v); }

  // Relations whose destination type is the given table, ascending.
  const std::vector<uint32_t>& relations_into(uint32_t table) const {
    return rels_into_[table];
  }

  // In-neighbors w of v under relation rel with tau(w) <= t_star
  // (< t_star when strict). Returned in ascending node id order.
  std::vector<NodeId> temporal_neighbors(NodeId v, uint32_t rel, Timestamp t_star,
                                         bool strict = false) const;

  // Temporally valid prefix of the (time, id)-sorted bucket for v under rel.
  struct NeighborSlice {
    const NodeId* ids = nullptr;
    const Timestamp* times = nullptr;
    size_t count = 0;
  };
  NeighborSlice valid_neighbors(NodeId v, uint32_t rel, Timestamp t_star,
                                bool strict = false) const;

  // Distinct resolvable (link, src row, dst row) triples; out-degree totals
  // equal twice this number.
  size_t resolved_reference_count() const { return resolved_refs_; }

  friend EntityGraph build_entity_graph(const Database& db, const KeyIndex& index);

 private:
  const Database* db_ = nullptr;
  std::vector<Relation> relations_;
  std::vector<std::vector<uint32_t>> rels_into_;  // per table ordinal
  size_t num_nodes_ = 0;
  size_t resolved_refs_ = 0;
};

EntityGraph build_entity_graph(const Database& db, const KeyIndex& index);

}  // namespace relgp
