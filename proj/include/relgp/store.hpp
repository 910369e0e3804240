#pragma once

// Relational database ingestion: JSON manifest + CSV files into a validated,
// immutable in-memory model with hash indexes over primary and foreign keys.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relgp/common.hpp"

namespace relgp {

enum class ColumnKind { Numeric, Categorical, Text, Timestamp };

const char* column_kind_name(ColumnKind kind);
ColumnKind parse_column_kind(const std::string& s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Text;
  bool nullable = true;

  bool operator==(const ColumnSpec&) const = default;
};

struct ForeignKeySpec {
  std::string column;
  std::string target_table;

  bool operator==(const ForeignKeySpec&) const = default;
};

struct TableSpec {
  std::string name;
  std::string file;  // CSV path relative to the data directory
  std::vector<ColumnSpec> columns;
  std::string primary_key;
  std::optional<std::string> time_column;
  std::vector<ForeignKeySpec> foreign_keys;

  int column_index(const std::string& name) const;

  bool operator==(const TableSpec&) const = default;
};

// One attribute cell. Only the field matching the column kind is meaningful.
struct Cell {
  bool missing = true;
  double number = 0.0;
  std::string text;
  Timestamp time = kNegInfTime;

  bool operator==(const Cell&) const = default;
};

struct Entity {
  std::string pkey;
  // Aligned with TableSpec::foreign_keys; nullopt marks a missing fkey cell.
  std::vector<std::optional<std::string>> fkeys;
  std::vector<Cell> attrs;  // aligned with TableSpec::columns
  Timestamp time = kNegInfTime;

  bool operator==(const Entity&) const = default;
};

struct Table {
  TableSpec spec;
  std::vector<Entity> rows;

  bool operator==(const Table&) const = default;
};

struct Database {
  std::vector<Table> tables;
  // (fkey table ordinal, pkey table ordinal), sorted, deduplicated.
  std::vector<std::pair<uint32_t, uint32_t>> links;

  size_t dangling_fkey_count = 0;
  size_t unparseable_cell_count = 0;
  size_t self_link_count = 0;  // self-referential tables, flagged in validation

  int table_index(const std::string& name) const;
  const Table& table(const std::string& name) const;
  const Entity& entity(NodeId id) const {
    return tables[node_table(id)].rows[node_row(id)];
  }
  size_t total_entities() const;

  bool operator==(const Database& o) const {
    return tables == o.tables && links == o.links;
  }
};

struct LoadOptions {
  // SchemaMismatch is raised once more than this many cells fail to parse as
  // their declared kind; failures at or below the threshold become missing.
  size_t unparseable_threshold = 0;
};

Database load_database(const std::string& manifest_path, const std::string& data_dir,
                       const LoadOptions& opts = {});

// Writes manifest.json plus one CSV per table; load_database of the result
// reproduces an equal Database.
void save_database(const Database& db, const std::string& dir);

// Canonical cell rendering shared by CSV output, JSON documents and tokens.
// Missing cells render as the empty string.
std::string cell_to_string(const ColumnSpec& col, const Cell& cell);

struct KeyIndex {
  // Per table: primary key -> row ordinal.
  std::vector<std::unordered_map<std::string, uint32_t>> pk;
  // Per table, per foreign-key ordinal: target key -> referencing row ordinals
  // in ascending order.
  std::vector<std::vector<std::unordered_map<std::string, std::vector<uint32_t>>>> fk_refs;
};

KeyIndex build_key_index(const Database& db);

// Minimal CSV support (RFC 4180 quoting, header row required).
std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);

}  // namespace relgp
