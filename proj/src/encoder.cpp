#include "relgp/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "relgp/vocab.hpp"

namespace relgp {

const char* mask_mode_name(MaskMode mode) {
  return mode == MaskMode::EntityLevel ? "entity" : "cell";
}

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "entity") return MaskMode::EntityLevel;
  if (s == "cell") return MaskMode::CellLevel;
  raise(ErrorKind::ConfigError, "unknown mask mode '" + s + "' (entity|cell)");
}

void EncoderConfig::validate() const {
  if (layers < 1) raise(ErrorKind::ConfigError, "encoder layers must be >= 1");
  if (d_g <= 0 || d_l <= 0) raise(ErrorKind::ConfigError, "d_g and d_l must be > 0");
  if (dropout < 0.0 || dropout >= 1.0)
    raise(ErrorKind::ConfigError, "dropout must be in [0, 1)");
  if (text_buckets <= 0) raise(ErrorKind::ConfigError, "text_buckets must be > 0");
}

namespace {

uint64_t bucket_hash(const std::string& token) {
  uint64_t h = 1469598103934665603ull;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string col_param(const std::string& table, const std::string& col,
                      const char* leaf) {
  return "enc/col/" + table + "/" + col + "/" + leaf;
}

}  // namespace

void ColumnEncoder::fit(const Database& db, Timestamp cutoff) {
  num_stats_.assign(db.tables.size(), {});
  cats_.assign(db.tables.size(), {});
  for (size_t ti = 0; ti < db.tables.size(); ++ti) {
    const Table& t = db.tables[ti];
    num_stats_[ti].resize(t.spec.columns.size());
    cats_[ti].resize(t.spec.columns.size());
    for (size_t ci = 0; ci < t.spec.columns.size(); ++ci) {
      const ColumnSpec& col = t.spec.columns[ci];
      if (col.kind == ColumnKind::Numeric || col.kind == ColumnKind::Timestamp) {
        double sum = 0.0, sq = 0.0;
        size_t n = 0;
        for (const Entity& e : t.rows) {
          if (!(e.time == kNegInfTime || e.time < cutoff)) continue;
          const Cell& cell = e.attrs[ci];
          if (cell.missing) continue;
          double x = col.kind == ColumnKind::Numeric ? cell.number
                                                     : static_cast<double>(cell.time);
          sum += x;
          sq += x * x;
          ++n;
        }
        NumStats st;
        if (n > 0) {
          st.mean = sum / static_cast<double>(n);
          double var = sq / static_cast<double>(n) - st.mean * st.mean;
          st.stddev = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
        num_stats_[ti][ci] = st;
      } else if (col.kind == ColumnKind::Categorical) {
        std::vector<std::string> values;
        for (const Entity& e : t.rows) {
          if (!(e.time == kNegInfTime || e.time < cutoff)) continue;
          if (!e.attrs[ci].missing) values.push_back(e.attrs[ci].text);
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (size_t k = 0; k < values.size(); ++k)
          cats_[ti][ci][values[k]] = static_cast<int>(k);
      }
    }
  }
  fitted_ = true;
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.clear();
  cache_version_ = ~0ull;
}

Value ColumnEncoder::column_contribution(const Database& db, uint32_t table, int col,
                                         const Cell& cell, ParameterStore& store) const {
  const TableSpec& spec = db.tables[table].spec;
  const ColumnSpec& c = spec.columns[col];
  int d = cfg_.d_g;
  switch (c.kind) {
    case ColumnKind::Numeric:
    case ColumnKind::Timestamp: {
      const NumStats& st = num_stats_[table][col];
      double raw = c.kind == ColumnKind::Numeric ? cell.number
                                                 : static_cast<double>(cell.time);
      bool missing = cell.missing || (c.kind == ColumnKind::Timestamp &&
                                      cell.time == kNegInfTime);
      double z = missing ? 0.0 : (raw - st.mean) / st.stddev;
      double miss = missing ? 1.0 : 0.0;
      Value w = store.param(col_param(spec.name, c.name, "W"), Shape{2, d});
      return matmul(constant(Shape{1, 2}, {z, miss}), w);
    }
    case ColumnKind::Categorical: {
      const auto& ids = cats_[table][col];
      Value table_embed = store.param(
          col_param(spec.name, c.name, "E"),
          Shape{static_cast<int64_t>(ids.size()) + 2, d}, InitSpec::uniform(0.2));
      int row = 1;  // MISSING
      if (!cell.missing) {
        auto it = ids.find(cell.text);
        row = it == ids.end() ? 0 : it->second + 2;  // UNK for unseen values
      }
      return embedding_lookup(table_embed, {row});
    }
    case ColumnKind::Text: {
      Value w = store.param(col_param(spec.name, c.name, "T"),
                            Shape{cfg_.text_buckets, d}, InitSpec::uniform(0.2));
      if (cell.missing) return Value();  // empty bag contributes nothing
      std::vector<int> buckets;
      for (const std::string& tok : tokenize_text(cell.text))
        buckets.push_back(static_cast<int>(bucket_hash(tok) %
                                           static_cast<uint64_t>(cfg_.text_buckets)));
      if (buckets.empty()) return Value();
      // Canonical bucket order makes the bag independent of token order.
      std::sort(buckets.begin(), buckets.end());
      Value rows = embedding_lookup(w, buckets);
      std::vector<std::vector<int64_t>> all(1);
      for (int64_t i = 0; i < static_cast<int64_t>(buckets.size()); ++i)
        all[0].push_back(i);
      return segment_sum_rows(rows, all);
    }
  }
  return Value();
}

Value ColumnEncoder::encode_columns(const Database& db, NodeId v,
                                    ParameterStore& store) const {
  if (!fitted_) raise(ErrorKind::UnfittedEncoder, "fit() must run before encoding");
  uint32_t table = node_table(v);
  const Table& t = db.tables[table];
  const Entity& e = t.rows[node_row(v)];
  int d = cfg_.d_g;
  Value acc = reshape(store.param("enc/col/" + t.spec.name + "/bias", Shape{d},
                                  InitSpec::uniform(0.1)),
                      Shape{1, d});
  for (size_t ci = 0; ci < t.spec.columns.size(); ++ci) {
    Value contrib =
        column_contribution(db, table, static_cast<int>(ci), e.attrs[ci], store);
    if (contrib.defined()) acc = add(acc, contrib);
  }
  return reshape(acc, Shape{d});
}

Value ColumnEncoder::encode_columns_cached(const Database& db, NodeId v,
                                           ParameterStore& store) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_version_ == store.version()) {
      auto it = cache_.find(v);
      if (it != cache_.end()) return constant(Shape{cfg_.d_g}, it->second);
    }
  }
  Value h = encode_columns(db, v, store);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_version_ != store.version()) {
    cache_.clear();
    cache_version_ = store.version();
  }
  cache_[v] = h.data();
  return constant(Shape{cfg_.d_g}, h.data());
}

Value ColumnEncoder::lifted_mask(const Database& db, uint32_t table,
                                 ParameterStore& store) const {
  int d = cfg_.d_g;
  Value h_mask = store.param("enc/h_mask", Shape{d}, InitSpec::uniform(0.2));
  Value lift = store.param("enc/mask_lift/" + db.tables[table].spec.name + "/W",
                           Shape{d, d});
  return matmul(reshape(h_mask, Shape{1, d}), lift);
}

Value ColumnEncoder::masked_entity_input(const Database& db, uint32_t table,
                                         ParameterStore& store) const {
  if (!fitted_) raise(ErrorKind::UnfittedEncoder, "fit() must run before encoding");
  return reshape(lifted_mask(db, table, store), Shape{cfg_.d_g});
}

Value ColumnEncoder::encode_columns_cell_masked(const Database& db, NodeId v,
                                                ParameterStore& store,
                                                const std::vector<int>& masked_cols) const {
  if (!fitted_) raise(ErrorKind::UnfittedEncoder, "fit() must run before encoding");
  uint32_t table = node_table(v);
  const Table& t = db.tables[table];
  const Entity& e = t.rows[node_row(v)];
  int d = cfg_.d_g;
  Value acc = reshape(store.param("enc/col/" + t.spec.name + "/bias", Shape{d},
                                  InitSpec::uniform(0.1)),
                      Shape{1, d});
  Value mask_share = scale(lifted_mask(db, table, store),
                           1.0 / static_cast<double>(t.spec.columns.size()));
  for (size_t ci = 0; ci < t.spec.columns.size(); ++ci) {
    bool is_masked = std::binary_search(masked_cols.begin(), masked_cols.end(),
                                        static_cast<int>(ci));
    if (is_masked) {
      acc = add(acc, mask_share);
    } else {
      Value contrib =
          column_contribution(db, table, static_cast<int>(ci), e.attrs[ci], store);
      if (contrib.defined()) acc = add(acc, contrib);
    }
  }
  return reshape(acc, Shape{d});
}

void ColumnEncoder::ensure_params(const Database& db, const EntityGraph& g,
                                  ParameterStore& store) const {
  if (!fitted_) raise(ErrorKind::UnfittedEncoder, "fit() must run before ensure_params");
  int d = cfg_.d_g;
  store.param("enc/h_mask", Shape{d}, InitSpec::uniform(0.2));
  for (size_t ti = 0; ti < db.tables.size(); ++ti) {
    const TableSpec& spec = db.tables[ti].spec;
    store.param("enc/col/" + spec.name + "/bias", Shape{d}, InitSpec::uniform(0.1));
    store.param("enc/mask_lift/" + spec.name + "/W", Shape{d, d});
    for (size_t ci = 0; ci < spec.columns.size(); ++ci) {
      const ColumnSpec& c = spec.columns[ci];
      switch (c.kind) {
        case ColumnKind::Numeric:
        case ColumnKind::Timestamp:
          store.param(col_param(spec.name, c.name, "W"), Shape{2, d});
          break;
        case ColumnKind::Categorical:
          store.param(col_param(spec.name, c.name, "E"),
                      Shape{static_cast<int64_t>(cats_[ti][ci].size()) + 2, d},
                      InitSpec::uniform(0.2));
          break;
        case ColumnKind::Text:
          store.param(col_param(spec.name, c.name, "T"), Shape{cfg_.text_buckets, d},
                      InitSpec::uniform(0.2));
          break;
      }
    }
  }
  for (int l = 0; l < cfg_.layers; ++l) {
    std::string lp = "enc/gnn/l" + std::to_string(l);
    for (size_t r = 0; r < g.num_relations(); ++r)
      store.param(lp + "/rel" + std::to_string(r) + "/W", Shape{d, d});
    for (const Table& t : db.tables) {
      store.param(lp + "/type/" + t.spec.name + "/W", Shape{2 * d, d});
      store.param(lp + "/type/" + t.spec.name + "/b", Shape{d}, InitSpec::zeros());
    }
  }
  store.param("proj/W1", Shape{d, d});
  store.param("proj/b1", Shape{d}, InitSpec::zeros());
  store.param("proj/W2", Shape{d, cfg_.d_l});
  store.param("proj/b2", Shape{cfg_.d_l}, InitSpec::zeros());
}

GraphEncoding encode_graph(const Database& db, const EntityGraph& g,
                           const SampledSubgraph& sub, const ColumnEncoder& cols,
                           ParameterStore& store, const MaskPlan* mask, bool training,
                           Rng* dropout_rng) {
  const EncoderConfig& cfg = cols.config();
  int d = cfg.d_g;
  size_t n_tables = db.tables.size();

  // Group local nodes by type; position within type is needed to address
  // rows of the per-type state matrices.
  std::vector<std::vector<uint32_t>> locals_by_type(n_tables);
  std::vector<std::pair<uint32_t, uint32_t>> type_pos(sub.nodes.size());
  for (uint32_t i = 0; i < sub.nodes.size(); ++i) {
    uint32_t t = node_table(sub.nodes[i]);
    type_pos[i] = {t, static_cast<uint32_t>(locals_by_type[t].size())};
    locals_by_type[t].push_back(i);
  }

  // Initial states from the column encoders, with mask substitution.
  std::vector<Value> state(n_tables);
  for (size_t t = 0; t < n_tables; ++t) {
    if (locals_by_type[t].empty()) continue;
    std::vector<Value> rows;
    for (uint32_t i : locals_by_type[t]) {
      NodeId v = sub.nodes[i];
      Value row;
      if (mask && mask->is_masked(v)) {
        if (mask->mode == MaskMode::EntityLevel)
          row = cols.masked_entity_input(db, static_cast<uint32_t>(t), store);
        else
          row = cols.encode_columns_cell_masked(db, v, store, *mask->cols_of(v));
      } else if (training) {
        row = cols.encode_columns(db, v, store);
      } else {
        row = cols.encode_columns_cached(db, v, store);
      }
      rows.push_back(row);
    }
    state[t] = concat_rows(rows);
  }

  for (int l = 0; l < cfg.layers; ++l) {
    std::string lp = "enc/gnn/l" + std::to_string(l);
    std::vector<Value> msg(n_tables);
    for (size_t r = 0; r < g.num_relations(); ++r) {
      const auto& rel = g.relation(r);
      if (locals_by_type[rel.dst_table].empty() || !state[rel.src_table].defined())
        continue;
      std::vector<std::vector<int64_t>> groups;
      groups.reserve(locals_by_type[rel.dst_table].size());
      bool any = false;
      for (uint32_t i : locals_by_type[rel.dst_table]) {
        std::vector<int64_t> rows;
        for (int64_t src_local : sub.in_nbrs[r][i])
          rows.push_back(type_pos[src_local].second);
        // Canonical summation order: ascending global id of the source node.
        std::sort(rows.begin(), rows.end(), [&](int64_t a, int64_t b) {
          return sub.nodes[locals_by_type[rel.src_table][a]] <
                 sub.nodes[locals_by_type[rel.src_table][b]];
        });
        any = any || !rows.empty();
        groups.push_back(std::move(rows));
      }
      if (!any) continue;
      Value transformed = matmul(state[rel.src_table],
                                 store.param(lp + "/rel" + std::to_string(r) + "/W",
                                             Shape{d, d}));
      Value seg = segment_sum_rows(transformed, groups);
      msg[rel.dst_table] = msg[rel.dst_table].defined() ? add(msg[rel.dst_table], seg)
                                                        : seg;
    }
    for (size_t t = 0; t < n_tables; ++t) {
      if (locals_by_type[t].empty()) continue;
      int64_t n_t = static_cast<int64_t>(locals_by_type[t].size());
      Value m = msg[t].defined() ? msg[t] : zeros(Shape{n_t, d});
      Value w = store.param(lp + "/type/" + db.tables[t].spec.name + "/W",
                            Shape{2 * d, d});
      Value b = store.param(lp + "/type/" + db.tables[t].spec.name + "/b", Shape{d},
                            InitSpec::zeros());
      Value h = relu(add_rowvec(matmul(concat_cols(state[t], m), w), b));
      if (training && cfg.dropout > 0.0) {
        if (!dropout_rng)
          raise(ErrorKind::ConfigError, "training with dropout needs an rng");
        std::vector<double> keep(static_cast<size_t>(h.numel()));
        double inv = 1.0 / (1.0 - cfg.dropout);
        for (double& k : keep)
          k = dropout_rng->uniform() < cfg.dropout ? 0.0 : inv;
        h = mul_mask(h, std::move(keep));
      }
      state[t] = h;
    }
  }

  GraphEncoding out;
  out.node_h.resize(sub.nodes.size());
  std::vector<Value> all_rows;
  for (size_t t = 0; t < n_tables; ++t) {
    if (locals_by_type[t].empty()) continue;
    for (uint32_t pos = 0; pos < locals_by_type[t].size(); ++pos)
      out.node_h[locals_by_type[t][pos]] = select_row(state[t], pos);
    all_rows.push_back(state[t]);
  }
  out.pooled = mean_rows(concat_rows(all_rows));
  return out;
}

Value project(const Value& h, ParameterStore& store, const EncoderConfig& cfg) {
  if (h.shape().cols() != cfg.d_g)
    raise(ErrorKind::ShapeMismatch, "project: last dim " +
                                        std::to_string(h.shape().cols()) + " != d_g");
  bool vector_in = h.shape().rank() == 1;
  Value x = vector_in ? reshape(h, Shape{1, cfg.d_g}) : h;
  Value w1 = store.param("proj/W1", Shape{cfg.d_g, cfg.d_g});
  Value b1 = store.param("proj/b1", Shape{cfg.d_g}, InitSpec::zeros());
  Value w2 = store.param("proj/W2", Shape{cfg.d_g, cfg.d_l});
  Value b2 = store.param("proj/b2", Shape{cfg.d_l}, InitSpec::zeros());
  Value out = add_rowvec(matmul(relu(add_rowvec(matmul(x, w1), b1)), w2), b2);
  return vector_in ? reshape(out, Shape{cfg.d_l}) : out;
}

}  // namespace relgp
