#pragma once

// Line-oriented "key = value" documents shared by problem files, experiment
// specs and solve reports. Lines starting with '#' and blank lines are
// ignored. Real numbers are written with 17 significant digits so 64-bit
// values round-trip exactly.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nnlsgd {

class TextDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  // Throws ParseError on lines without '=' or duplicate keys.
  static TextDocument parse(std::istream& in);
  static TextDocument parse_string(std::string_view text);
  static TextDocument read_file(const std::string& path);

  void set(std::string key, std::string value);
  void set_real(std::string key, double v);
  void set_reals(std::string key, std::span<const double> v);
  void set_uint(std::string key, std::uint64_t v);
  void set_ints(std::string key, std::span<const int> v);
  void add_comment(std::string line) { header_.push_back(std::move(line)); }

  bool has(std::string_view key) const;
  const Entry* find(std::string_view key) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  // Typed getters throw ParseError (naming key and line) on malformed
  // values, and on a missing key for the required_* forms.
  const std::string& required(std::string_view key) const;
  double required_real(std::string_view key) const;
  std::uint64_t required_uint(std::string_view key) const;
  std::vector<double> required_reals(std::string_view key) const;
  std::optional<double> optional_real(std::string_view key) const;
  std::optional<std::uint64_t> optional_uint(std::string_view key) const;
  std::optional<std::vector<double>> optional_reals(std::string_view key) const;
  std::optional<std::vector<int>> optional_ints(std::string_view key) const;

  // Throws ParseError naming the first key not in `allowed`.
  void reject_unknown(std::span<const std::string_view> allowed) const;

  void write(std::ostream& out) const;
  std::string to_string() const;
  // Throws IoError when the file cannot be written.
  void write_file(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<Entry> entries_;
};

// "%.17g" formatting used by every writer in the library.
std::string format_real(double v);
// Parses a full token as a double; nullopt on trailing garbage.
std::optional<double> parse_real(std::string_view token);

}  // namespace nnlsgd
