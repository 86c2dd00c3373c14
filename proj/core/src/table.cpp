#include "nnlsgd/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/textdoc.hpp"

namespace nnlsgd {

namespace {

constexpr std::string_view kTypesKey = "column_types";

bool same_cell(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return *x == y || (std::isnan(*x) && std::isnan(y));
  }
  return a == b;
}

bool matches(ColumnType t, const Cell& c) {
  switch (t) {
    case ColumnType::Real: return std::holds_alternative<double>(c);
    case ColumnType::Integer: return std::holds_alternative<std::int64_t>(c);
    case ColumnType::Text: return std::holds_alternative<std::string>(c);
  }
  return false;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string cell_csv(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return csv_escape(std::get<std::string>(c));
}

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *d);
    return buf;
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

std::optional<ColumnType> parse_type(std::string_view s) {
  if (s == "real") return ColumnType::Real;
  if (s == "int") return ColumnType::Integer;
  if (s == "text") return ColumnType::Text;
  return std::nullopt;
}

std::vector<std::string> split_plain(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Reads one CSV record, honouring quoted fields that span lines.
// Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 std::size_t& line) {
  fields.clear();
  int c = in.peek();
  if (c == std::char_traits<char>::eof()) return false;
  ++line;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  while (true) {
    c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw ParseError(line, "", "unterminated quoted field");
      break;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          cur += '"';
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        cur += ch;
      }
      continue;
    }
    if (ch == '"' && cur.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return true;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

ResultTable::ResultTable(std::vector<Column> columns)
    : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name.empty()) {
      throw ValidationError("column names must be nonempty");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (columns_[j].name == columns_[i].name) {
        throw ValidationError("duplicate column '" + columns_[i].name + "'");
      }
    }
  }
}

std::size_t ResultTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  throw ValidationError("no column named '" + std::string(name) + "'");
}

bool ResultTable::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

void ResultTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw ValidationError("row has " + std::to_string(row.size()) +
                          " cells, table has " +
                          std::to_string(columns_.size()) + " columns");
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!matches(columns_[i].type, row[i])) {
      throw ValidationError("cell type mismatch in column '" +
                            columns_[i].name + "'");
    }
  }
  rows_.push_back(std::move(row));
}

double ResultTable::real(std::size_t row, std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) {
    return static_cast<double>(*i);
  }
  throw ValidationError("column '" + std::string(column) + "' is text");
}

std::int64_t ResultTable::integer(std::size_t row,
                                  std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  throw ValidationError("column '" + std::string(column) +
                        "' is not an integer column");
}

const std::string& ResultTable::text(std::size_t row,
                                     std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  throw ValidationError("column '" + std::string(column) + "' is not text");
}

std::vector<std::size_t> ResultTable::rows_where(
    std::string_view column, std::string_view value) const {
  const std::size_t k = column_index(column);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto* s = std::get_if<std::string>(&rows_[i][k]);
    if (s != nullptr && *s == value) out.push_back(i);
  }
  return out;
}

void ResultTable::set_meta(std::string key, std::string value) {
  if (key.empty() || key.find_first_of(":\n\r") != std::string::npos) {
    throw ValidationError("invalid metadata key '" + key + "'");
  }
  if (key == kTypesKey) {
    throw ValidationError("metadata key 'column_types' is reserved");
  }
  if (value.find_first_of("\n\r") != std::string::npos) {
    throw ValidationError("metadata value for '" + key +
                          "' must be a single line");
  }
  for (auto& [k, v] : meta_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta_.emplace_back(std::move(key), std::move(value));
}

bool ResultTable::erase_meta(std::string_view key) {
  const auto it = std::find_if(meta_.begin(), meta_.end(),
                               [&](const auto& e) { return e.first == key; });
  if (it == meta_.end()) return false;
  meta_.erase(it);
  return true;
}

std::optional<std::string> ResultTable::meta(std::string_view key) const {
  for (const auto& [k, v] : meta_)
    if (k == key) return v;
  return std::nullopt;
}

bool operator==(const ResultTable& a, const ResultTable& b) {
  if (a.columns_ != b.columns_ || a.meta_ != b.meta_ ||
      a.rows_.size() != b.rows_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.rows_.size(); ++i)
    for (std::size_t j = 0; j < a.columns_.size(); ++j)
      if (!same_cell(a.rows_[i][j], b.rows_[i][j])) return false;
  return true;
}

const char* to_string(ColumnType t) noexcept {
  switch (t) {
    case ColumnType::Real: return "real";
    case ColumnType::Integer: return "int";
    case ColumnType::Text: return "text";
  }
  return "unknown";
}

void write_csv(const ResultTable& table, std::ostream& out) {
  for (const auto& [k, v] : table.metadata()) out << "# " << k << ": " << v << '\n';
  out << "# " << kTypesKey << ": ";
  const auto& cols = table.columns();
  for (std::size_t j = 0; j < cols.size(); ++j)
    out << (j ? "," : "") << to_string(cols[j].type);
  out << '\n';
  for (std::size_t j = 0; j < cols.size(); ++j)
    out << (j ? "," : "") << csv_escape(cols[j].name);
  out << '\n';
  for (std::size_t i = 0; i < table.num_rows(); ++i) {
    const auto& r = table.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      out << (j ? "," : "") << cell_csv(r[j]);
    out << '\n';
  }
}

void write_text(const ResultTable& table, std::ostream& out) {
  for (const auto& [k, v] : table.metadata()) out << "# " << k << ": " << v << '\n';
  const auto& cols = table.columns();
  std::vector<std::vector<std::string>> cells(table.num_rows());
  std::vector<std::size_t> width(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) width[j] = cols[j].name.size();
  for (std::size_t i = 0; i < table.num_rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      cells[i].push_back(cell_text(table.row(i)[j]));
      width[j] = std::max(width[j], cells[i].back().size());
    }
  }
  auto emit = [&](std::size_t j, const std::string& s) {
    const std::string pad(width[j] - s.size(), ' ');
    if (j) out << "  ";
    if (cols[j].type == ColumnType::Text) {
      out << s << (j + 1 < cols.size() ? pad : "");
    } else {
      out << pad << s;
    }
  };
  for (std::size_t j = 0; j < cols.size(); ++j) emit(j, cols[j].name);
  out << '\n';
  for (const auto& r : cells) {
    for (std::size_t j = 0; j < cols.size(); ++j) emit(j, r[j]);
    out << '\n';
  }
}

void emit_table(const ResultTable& table, const std::string& path,
                TableFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (format == TableFormat::Csv) {
    write_csv(table, out);
  } else {
    write_text(table, out);
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

ResultTable parse_csv(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> meta;
  std::optional<std::vector<ColumnType>> types;
  std::size_t line = 0;
  while (in.peek() == '#') {
    std::string raw;
    std::getline(in, raw);
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto colon = raw.find(": ");
    if (raw.size() < 2 || raw[1] != ' ' || colon == std::string::npos) {
      throw ParseError(line, "", "malformed metadata line");
    }
    std::string key = raw.substr(2, colon - 2);
    std::string value = raw.substr(colon + 2);
    if (key == kTypesKey) {
      types.emplace();
      if (!value.empty()) {
        for (const auto& t : split_plain(value, ',')) {
          const auto ct = parse_type(t);
          if (!ct) throw ParseError(line, key, "unknown column type '" + t + "'");
          types->push_back(*ct);
        }
      }
    } else {
      meta.emplace_back(std::move(key), std::move(value));
    }
  }

  std::vector<std::string> header;
  if (!read_record(in, header, line)) {
    throw ParseError(line, "", "missing header row");
  }
  if (header.size() == 1 && header[0].empty()) header.clear();

  std::vector<std::vector<std::string>> raw_rows;
  std::vector<std::string> fields;
  while (read_record(in, fields, line)) {
    if (fields.size() == 1 && fields[0].empty() && header.size() != 1) continue;
    if (fields.size() != header.size()) {
      throw ParseError(line, "", "expected " + std::to_string(header.size()) +
                                     " fields, found " +
                                     std::to_string(fields.size()));
    }
    raw_rows.push_back(fields);
  }

  if (!types) {
    types.emplace(header.size(), ColumnType::Real);
    for (std::size_t j = 0; j < header.size(); ++j) {
      for (const auto& r : raw_rows) {
        if (!parse_real(r[j])) {
          (*types)[j] = ColumnType::Text;
          break;
        }
      }
    }
  }
  if (types->size() != header.size()) {
    throw ParseError(0, std::string(kTypesKey),
                     "column_types does not match the header");
  }

  std::vector<Column> cols;
  for (std::size_t j = 0; j < header.size(); ++j)
    cols.push_back({header[j], (*types)[j]});
  ResultTable table(std::move(cols));
  for (auto& [k, v] : meta) table.set_meta(k, v);
  for (std::size_t i = 0; i < raw_rows.size(); ++i) {
    std::vector<Cell> row;
    for (std::size_t j = 0; j < header.size(); ++j) {
      const std::string& s = raw_rows[i][j];
      switch ((*types)[j]) {
        case ColumnType::Real: {
          const auto v = parse_real(s);
          if (!v) throw ParseError(0, header[j], "not a real number: '" + s + "'");
          row.emplace_back(*v);
          break;
        }
        case ColumnType::Integer: {
          const auto v = parse_int(s);
          if (!v) throw ParseError(0, header[j], "not an integer: '" + s + "'");
          row.emplace_back(*v);
          break;
        }
        case ColumnType::Text:
          row.emplace_back(s);
          break;
      }
    }
    table.add_row(std::move(row));
  }
  return table;
}

ResultTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(in);
}

}  // namespace nnlsgd
