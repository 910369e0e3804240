#include "relgp/graph.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace relgp {

bool SchemaGraph::connected() const {
  if (tables.empty()) return true;
  std::vector<uint32_t> parent(tables.size());
  for (uint32_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const SchemaEdge& e : edges) parent[find(e.src_table)] = find(e.dst_table);
  uint32_t root = find(0);
  for (uint32_t i = 1; i < tables.size(); ++i)
    if (find(i) != root) return false;
  return true;
}

SchemaGraph build_schema_graph(const Database& db) {
  SchemaGraph g;
  for (const Table& t : db.tables) g.tables.push_back(t.spec.name);
  for (uint32_t li = 0; li < db.links.size(); ++li) {
    auto [fk_table, pk_table] = db.links[li];
    g.edges.push_back({fk_table, pk_table, li, false});
    g.edges.push_back({pk_table, fk_table, li, true});
  }
  return g;
}

std::string schema_graph_dot(const SchemaGraph& g) {
  std::ostringstream os;
  os << "digraph schema {\n";
  for (const std::string& t : g.tables) os << "  \"" << t << "\";\n";
  for (const SchemaEdge& e : g.edges) {
    os << "  \"" << g.tables[e.src_table] << "\" -> \"" << g.tables[e.dst_table]
       << "\" [label=\"" << (e.inverse ? "inv" : "fwd") << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

size_t EntityGraph::num_edges() const {
  size_t n = 0;
  for (const Relation& r : relations_) n += r.nbr.size();
  return n;
}

bool EntityGraph::has_node(NodeId v) const {
  uint32_t t = node_table(v);
  return t < db_->tables.size() && node_row(v) < db_->tables[t].rows.size();
}

EntityGraph build_entity_graph(const Database& db, const KeyIndex& index) {
  EntityGraph g;
  g.db_ = &db;
  g.num_nodes_ = db.total_entities();
  g.rels_into_.resize(db.tables.size());

  // Resolve fkey cells into distinct (link, fkey row, pkey row) triples.
  // Two fkey columns of the same link resolving to the same target row
  // contribute a single pair, matching set semantics of the edge builder.
  std::vector<std::set<std::pair<uint32_t, uint32_t>>> pairs(db.links.size());
  for (uint32_t li = 0; li < db.links.size(); ++li) {
    auto [fk_table, pk_table] = db.links[li];
    const Table& src = db.tables[fk_table];
    for (size_t f = 0; f < src.spec.foreign_keys.size(); ++f) {
      if (static_cast<uint32_t>(db.table_index(src.spec.foreign_keys[f].target_table)) !=
          pk_table)
        continue;
      for (uint32_t r = 0; r < src.rows.size(); ++r) {
        const auto& key = src.rows[r].fkeys[f];
        if (!key) continue;
        auto it = index.pk[pk_table].find(*key);
        if (it == index.pk[pk_table].end()) continue;  // dangling: no edge
        pairs[li].insert({r, it->second});
      }
    }
    g.resolved_refs_ += pairs[li].size();
  }

  // Two relations per link. Buckets are grouped by destination row and
  // sorted by (time, id) ascending.
  for (uint32_t li = 0; li < db.links.size(); ++li) {
    auto [fk_table, pk_table] = db.links[li];
    for (int dir = 0; dir < 2; ++dir) {
      EntityGraph::Relation rel;
      rel.link = li;
      rel.inverse = dir == 1;
      rel.src_table = dir == 0 ? fk_table : pk_table;
      rel.dst_table = dir == 0 ? pk_table : fk_table;
      size_t dst_rows = db.tables[rel.dst_table].rows.size();

      std::vector<std::vector<std::pair<Timestamp, NodeId>>> buckets(dst_rows);
      for (const auto& [fk_row, pk_row] : pairs[li]) {
        uint32_t src_row = dir == 0 ? fk_row : pk_row;
        uint32_t dst_row = dir == 0 ? pk_row : fk_row;
        NodeId src_id = pack_node(rel.src_table, src_row);
        buckets[dst_row].push_back({db.entity(src_id).time, src_id});
      }
      rel.offsets.assign(dst_rows + 1, 0);
      for (size_t i = 0; i < dst_rows; ++i) {
        std::sort(buckets[i].begin(), buckets[i].end());
        rel.offsets[i + 1] = rel.offsets[i] + buckets[i].size();
      }
      rel.nbr.reserve(rel.offsets.back());
      rel.nbr_time.reserve(rel.offsets.back());
      for (const auto& bucket : buckets)
        for (const auto& [ts, id] : bucket) {
          rel.nbr_time.push_back(ts);
          rel.nbr.push_back(id);
        }
      g.rels_into_[rel.dst_table].push_back(static_cast<uint32_t>(g.relations_.size()));
      g.relations_.push_back(std::move(rel));
    }
  }
  return g;
}

EntityGraph::NeighborSlice EntityGraph::valid_neighbors(NodeId v, uint32_t rel_id,
                                                        Timestamp t_star,
                                                        bool strict) const {
  if (!has_node(v)) raise(ErrorKind::UnknownNode, "no such node");
  if (rel_id >= relations_.size())
    raise(ErrorKind::UnknownRelation, "relation id out of range");
  const Relation& rel = relations_[rel_id];
  if (rel.dst_table != node_table(v))
    raise(ErrorKind::UnknownRelation, "relation not incident to node type");
  size_t begin = rel.offsets[node_row(v)];
  size_t end = rel.offsets[node_row(v) + 1];
  // Bucket is time-ascending: the valid set is a prefix.
  const Timestamp* t0 = rel.nbr_time.data() + begin;
  size_t count;
  if (strict)
    count = std::lower_bound(t0, rel.nbr_time.data() + end, t_star) - t0;
  else
    count = std::upper_bound(t0, rel.nbr_time.data() + end, t_star) - t0;
  return {rel.nbr.data() + begin, t0, count};
}

std::vector<NodeId> EntityGraph::temporal_neighbors(NodeId v, uint32_t rel_id,
                                                    Timestamp t_star, bool strict) const {
  NeighborSlice s = valid_neighbors(v, rel_id, t_star, strict);
  std::vector<NodeId> out(s.ids, s.ids + s.count);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace relgp
