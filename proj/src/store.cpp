#include "relgp/store.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace relgp {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* column_kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Text: return "text";
    case ColumnKind::Timestamp: return "timestamp";
  }
  return "?";
}

ColumnKind parse_column_kind(const std::string& s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "text") return ColumnKind::Text;
  if (s == "timestamp") return ColumnKind::Timestamp;
  raise(ErrorKind::SchemaMismatch, "unknown column kind '" + s + "'");
}

int TableSpec::column_index(const std::string& col) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == col) return static_cast<int>(i);
  return -1;
}

int Database::table_index(const std::string& name) const {
  for (size_t i = 0; i < tables.size(); ++i)
    if (tables[i].spec.name == name) return static_cast<int>(i);
  return -1;
}

const Table& Database::table(const std::string& name) const {
  int idx = table_index(name);
  if (idx < 0) raise(ErrorKind::SchemaMismatch, "unknown table '" + name + "'");
  return tables[idx];
}

size_t Database::total_entities() const {
  size_t n = 0;
  for (const Table& t : tables) n += t.rows.size();
  return n;
}

// --- CSV ----------------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::MissingFile, "cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < content.size()) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field += c;
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_row();
  }
  if (rows.empty()) raise(ErrorKind::SchemaMismatch, "empty CSV " + path);
  return rows;
}

namespace {
std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}
}  // namespace

void write_csv(const std::string& path,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorKind::IoError, "cannot write " + path);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << csv_quote(row[i]);
    }
    os << '\n';
  }
}

// --- cell parsing/rendering ------------------------------------------------------

namespace {

bool parse_cell(const ColumnSpec& col, const std::string& raw, Cell& out) {
  out = Cell{};
  if (raw.empty()) return true;  // empty string = missing
  out.missing = false;
  switch (col.kind) {
    case ColumnKind::Numeric: {
      char* endp = nullptr;
      out.number = std::strtod(raw.c_str(), &endp);
      if (endp == raw.c_str() || *endp != '\0') return false;
      return true;
    }
    case ColumnKind::Timestamp: {
      char* endp = nullptr;
      long long v = std::strtoll(raw.c_str(), &endp, 10);
      if (endp == raw.c_str() || *endp != '\0') return false;
      out.time = static_cast<Timestamp>(v);
      return true;
    }
    case ColumnKind::Categorical:
    case ColumnKind::Text:
      out.text = raw;
      return true;
  }
  return false;
}

}  // namespace

std::string cell_to_string(const ColumnSpec& col, const Cell& cell) {
  if (cell.missing) return "";
  switch (col.kind) {
    case ColumnKind::Numeric: return format_double(cell.number);
    case ColumnKind::Timestamp: return std::to_string(cell.time);
    case ColumnKind::Categorical:
    case ColumnKind::Text: return cell.text;
  }
  return "";
}

// --- manifest + load ------------------------------------------------------------

namespace {

TableSpec parse_table_spec(const ordered_json& jt) {
  TableSpec spec;
  spec.name = jt.at("name").get<std::string>();
  spec.file = jt.at("file").get<std::string>();
  spec.primary_key = jt.at("primary_key").get<std::string>();
  if (jt.contains("time_column")) spec.time_column = jt.at("time_column").get<std::string>();
  for (const auto& jc : jt.at("columns")) {
    ColumnSpec col;
    col.name = jc.at("name").get<std::string>();
    col.kind = parse_column_kind(jc.at("kind").get<std::string>());
    col.nullable = jc.value("nullable", true);
    spec.columns.push_back(col);
  }
  if (jt.contains("foreign_keys")) {
    for (const auto& jf : jt.at("foreign_keys")) {
      spec.foreign_keys.push_back(
          {jf.at("column").get<std::string>(), jf.at("target_table").get<std::string>()});
    }
  }
  return spec;
}

void validate_spec(const TableSpec& spec) {
  std::set<std::string> seen;
  for (const ColumnSpec& c : spec.columns)
    if (!seen.insert(c.name).second)
      raise(ErrorKind::SchemaMismatch,
            "duplicate column '" + c.name + "' in table " + spec.name);
  if (spec.column_index(spec.primary_key) < 0)
    raise(ErrorKind::SchemaMismatch,
          "primary key '" + spec.primary_key + "' not a column of " + spec.name);
  if (spec.time_column) {
    int ti = spec.column_index(*spec.time_column);
    if (ti < 0 || spec.columns[ti].kind != ColumnKind::Timestamp)
      raise(ErrorKind::SchemaMismatch,
            "time column '" + *spec.time_column + "' of " + spec.name +
                " must be a declared timestamp column");
  }
}

}  // namespace

Database load_database(const std::string& manifest_path, const std::string& data_dir,
                       const LoadOptions& opts) {
  std::ifstream is(manifest_path);
  if (!is) raise(ErrorKind::MissingFile, "cannot open manifest " + manifest_path);
  ordered_json manifest;
  try {
    is >> manifest;
  } catch (const std::exception& e) {
    raise(ErrorKind::SchemaMismatch, std::string("manifest parse error: ") + e.what());
  }

  Database db;
  for (const auto& jt : manifest.at("tables")) {
    Table table;
    table.spec = parse_table_spec(jt);
    validate_spec(table.spec);
    db.tables.push_back(std::move(table));
  }

  // Foreign keys must target declared tables and name declared columns.
  for (const Table& t : db.tables) {
    for (const ForeignKeySpec& fk : t.spec.foreign_keys) {
      if (t.spec.column_index(fk.column) < 0)
        raise(ErrorKind::SchemaMismatch,
              "foreign key column '" + fk.column + "' not in table " + t.spec.name);
      if (db.table_index(fk.target_table) < 0)
        raise(ErrorKind::SchemaMismatch,
              "foreign key target '" + fk.target_table + "' is not a declared table");
      if (fk.target_table == t.spec.name) ++db.self_link_count;
    }
  }

  // Rows.
  for (Table& table : db.tables) {
    const TableSpec& spec = table.spec;
    fs::path csv_path = fs::path(data_dir) / spec.file;
    auto rows = read_csv(csv_path.string());
    const auto& header = rows[0];
    std::vector<int> col_pos(spec.columns.size(), -1);
    for (size_t c = 0; c < spec.columns.size(); ++c) {
      for (size_t h = 0; h < header.size(); ++h)
        if (header[h] == spec.columns[c].name) col_pos[c] = static_cast<int>(h);
      if (col_pos[c] < 0)
        raise(ErrorKind::SchemaMismatch, "column '" + spec.columns[c].name +
                                             "' absent from CSV for " + spec.name);
    }
    int pk_pos = col_pos[spec.column_index(spec.primary_key)];
    int time_idx = spec.time_column ? spec.column_index(*spec.time_column) : -1;
    std::vector<int> fk_pos;
    for (const ForeignKeySpec& fk : spec.foreign_keys)
      fk_pos.push_back(col_pos[spec.column_index(fk.column)]);

    std::set<std::string> pk_seen;
    for (size_t r = 1; r < rows.size(); ++r) {
      const auto& raw = rows[r];
      auto cell_at = [&](int pos) -> std::string {
        return pos >= 0 && pos < static_cast<int>(raw.size()) ? raw[pos] : "";
      };
      Entity e;
      e.pkey = cell_at(pk_pos);
      if (e.pkey.empty())
        raise(ErrorKind::SchemaMismatch,
              "empty primary key in " + spec.name + " row " + std::to_string(r));
      if (!pk_seen.insert(e.pkey).second)
        raise(ErrorKind::DuplicatePrimaryKey,
              "duplicate key '" + e.pkey + "' in table " + spec.name);
      e.attrs.resize(spec.columns.size());
      for (size_t c = 0; c < spec.columns.size(); ++c) {
        if (!parse_cell(spec.columns[c], cell_at(col_pos[c]), e.attrs[c])) {
          ++db.unparseable_cell_count;
          if (db.unparseable_cell_count > opts.unparseable_threshold)
            raise(ErrorKind::SchemaMismatch,
                  "unparseable " + std::string(column_kind_name(spec.columns[c].kind)) +
                      " cell '" + cell_at(col_pos[c]) + "' in " + spec.name + "." +
                      spec.columns[c].name);
          e.attrs[c] = Cell{};  // below threshold: treat as missing
        }
      }
      for (int fp : fk_pos) {
        std::string v = cell_at(fp);
        e.fkeys.push_back(v.empty() ? std::nullopt : std::make_optional(v));
      }
      e.time = time_idx >= 0 && !e.attrs[time_idx].missing ? e.attrs[time_idx].time
                                                           : kNegInfTime;
      table.rows.push_back(std::move(e));
    }
  }

  // Link set, derived from declarations, deduplicated and ordered.
  std::set<std::pair<uint32_t, uint32_t>> links;
  for (size_t ti = 0; ti < db.tables.size(); ++ti)
    for (const ForeignKeySpec& fk : db.tables[ti].spec.foreign_keys)
      links.insert({static_cast<uint32_t>(ti),
                    static_cast<uint32_t>(db.table_index(fk.target_table))});
  db.links.assign(links.begin(), links.end());

  // Dangling foreign keys are kept but counted.
  for (const Table& t : db.tables) {
    for (size_t f = 0; f < t.spec.foreign_keys.size(); ++f) {
      const Table& target = db.table(t.spec.foreign_keys[f].target_table);
      std::set<std::string> target_keys;
      for (const Entity& e : target.rows) target_keys.insert(e.pkey);
      for (const Entity& e : t.rows)
        if (e.fkeys[f] && !target_keys.count(*e.fkeys[f])) ++db.dangling_fkey_count;
    }
  }
  return db;
}

void save_database(const Database& db, const std::string& dir) {
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["tables"] = ordered_json::array();
  for (const Table& t : db.tables) {
    ordered_json jt;
    jt["name"] = t.spec.name;
    jt["file"] = t.spec.file;
    jt["primary_key"] = t.spec.primary_key;
    if (t.spec.time_column) jt["time_column"] = *t.spec.time_column;
    jt["columns"] = ordered_json::array();
    for (const ColumnSpec& c : t.spec.columns)
      jt["columns"].push_back({{"name", c.name},
                               {"kind", column_kind_name(c.kind)},
                               {"nullable", c.nullable}});
    jt["foreign_keys"] = ordered_json::array();
    for (const ForeignKeySpec& fk : t.spec.foreign_keys)
      jt["foreign_keys"].push_back({{"column", fk.column}, {"target_table", fk.target_table}});
    manifest["tables"].push_back(jt);
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) raise(ErrorKind::IoError, "cannot write manifest under " + dir);
  os << manifest.dump(2) << "\n";

  for (const Table& t : db.tables) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header;
    for (const ColumnSpec& c : t.spec.columns) header.push_back(c.name);
    rows.push_back(header);
    for (const Entity& e : t.rows) {
      std::vector<std::string> row;
      for (size_t c = 0; c < t.spec.columns.size(); ++c)
        row.push_back(cell_to_string(t.spec.columns[c], e.attrs[c]));
      rows.push_back(std::move(row));
    }
    write_csv((fs::path(dir) / t.spec.file).string(), rows);
  }
}

KeyIndex build_key_index(const Database& db) {
  KeyIndex index;
  index.pk.resize(db.tables.size());
  index.fk_refs.resize(db.tables.size());
  for (size_t ti = 0; ti < db.tables.size(); ++ti) {
    const Table& t = db.tables[ti];
    for (size_t r = 0; r < t.rows.size(); ++r)
      index.pk[ti][t.rows[r].pkey] = static_cast<uint32_t>(r);
    index.fk_refs[ti].resize(t.spec.foreign_keys.size());
    for (size_t f = 0; f < t.spec.foreign_keys.size(); ++f) {
      for (size_t r = 0; r < t.rows.size(); ++r) {
        const auto& key = t.rows[r].fkeys[f];
        if (key) index.fk_refs[ti][f][*key].push_back(static_cast<uint32_t>(r));
      }
    }
  }
  return index;
}

}  // namespace relgp
