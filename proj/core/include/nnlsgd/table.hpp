#pragma once

// Typed, rectangular result tables with a key/value metadata block.
//
// CSV layout:
//   # key: value            metadata, one line per entry, insertion order
//   # column_types: real,int,text
//   name1,name2,...         header row
//   ...                     data rows
// Reals are written with 17 significant digits; text cells are quoted when
// they contain a comma, quote or newline.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace nnlsgd {

enum class ColumnType { Real, Integer, Text };

struct Column {
  std::string name;
  ColumnType type = ColumnType::Real;
  friend bool operator==(const Column&, const Column&) = default;
};

using Cell = std::variant<double, std::int64_t, std::string>;

class ResultTable {
 public:
  ResultTable() = default;
  // Throws ValidationError on duplicate or empty column names.
  explicit ResultTable(std::vector<Column> columns);

  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::size_t num_rows() const noexcept { return rows_.size(); }
  std::size_t num_columns() const noexcept { return columns_.size(); }

  // Throws ValidationError for an unknown name.
  std::size_t column_index(std::string_view name) const;
  bool has_column(std::string_view name) const;

  // Arity and cell types must match the columns; throws ValidationError.
  void add_row(std::vector<Cell> row);
  const std::vector<Cell>& row(std::size_t i) const { return rows_.at(i); }

  // Integer cells convert to double; text cells throw ValidationError.
  double real(std::size_t row, std::string_view column) const;
  std::int64_t integer(std::size_t row, std::string_view column) const;
  const std::string& text(std::size_t row, std::string_view column) const;

  // Row indices whose text column equals `value`.
  std::vector<std::size_t> rows_where(std::string_view column,
                                      std::string_view value) const;

  // Metadata keys must be nonempty and values single-line.
  void set_meta(std::string key, std::string value);
  // Returns false when the key is absent.
  bool erase_meta(std::string_view key);
  std::optional<std::string> meta(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& metadata()
      const noexcept {
    return meta_;
  }

  // Cell-wise equality where two NaN reals compare equal.
  friend bool operator==(const ResultTable& a, const ResultTable& b);

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<std::pair<std::string, std::string>> meta_;
};

enum class TableFormat { Csv, Text };

void write_csv(const ResultTable& table, std::ostream& out);
// Aligned columns for reading in a terminal: metadata as "# key: value"
// lines, then right-aligned numeric and left-aligned text columns.
void write_text(const ResultTable& table, std::ostream& out);
// Throws IoError when the file cannot be written.
void emit_table(const ResultTable& table, const std::string& path,
                TableFormat format);

// Inverse of write_csv. Column types come from the column_types metadata
// entry (which is consumed, not kept as metadata); without it every column
// is typed Real if all its cells parse as numbers and Text otherwise.
// Throws ParseError on malformed input.
ResultTable parse_csv(std::istream& in);
ResultTable read_csv(const std::string& path);

const char* to_string(ColumnType t) noexcept;

}  // namespace nnlsgd
