#include "nnlsgd/textdoc.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nnlsgd/errors.hpp"

namespace nnlsgd {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> parse_real(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

TextDocument TextDocument::parse(std::istream& in) {
  TextDocument doc;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(lineno, "", "expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(lineno, "", "empty key");
    if (doc.find(key) != nullptr) {
      throw ParseError(lineno, key, "duplicate key");
    }
    doc.entries_.push_back(
        {std::move(key), std::string(trim(line.substr(eq + 1))), lineno});
  }
  return doc;
}

TextDocument TextDocument::parse_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

TextDocument TextDocument::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse(in);
}

void TextDocument::set(std::string key, std::string value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back({std::move(key), std::move(value), 0});
}

void TextDocument::set_real(std::string key, double v) {
  set(std::move(key), format_real(v));
}

void TextDocument::set_reals(std::string key, std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_real(v[i]);
  }
  set(std::move(key), std::move(s));
}

void TextDocument::set_uint(std::string key, std::uint64_t v) {
  set(std::move(key), std::to_string(v));
}

void TextDocument::set_ints(std::string key, std::span<const int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  set(std::move(key), std::move(s));
}

bool TextDocument::has(std::string_view key) const {
  return find(key) != nullptr;
}

const TextDocument::Entry* TextDocument::find(std::string_view key) const {
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.key == key; });
  return it == entries_.end() ? nullptr : &*it;
}

const std::string& TextDocument::required(std::string_view key) const {
  const Entry* e = find(key);
  if (e == nullptr) {
    throw ParseError(0, std::string(key), "missing required field");
  }
  return e->value;
}

double TextDocument::required_real(std::string_view key) const {
  const Entry* e = find(key);
  if (e == nullptr) {
    throw ParseError(0, std::string(key), "missing required field");
  }
  const auto v = parse_real(e->value);
  if (!v) throw ParseError(e->line, e->key, "not a real number: " + e->value);
  return *v;
}

std::uint64_t TextDocument::required_uint(std::string_view key) const {
  const auto v = optional_uint(key);
  if (!v) throw ParseError(0, std::string(key), "missing required field");
  return *v;
}

std::vector<double> TextDocument::required_reals(std::string_view key) const {
  auto v = optional_reals(key);
  if (!v) throw ParseError(0, std::string(key), "missing required field");
  return std::move(*v);
}

std::optional<double> TextDocument::optional_real(std::string_view key) const {
  if (!has(key)) return std::nullopt;
  return required_real(key);
}

std::optional<std::uint64_t> TextDocument::optional_uint(
    std::string_view key) const {
  const Entry* e = find(key);
  if (e == nullptr) return std::nullopt;
  std::uint64_t v = 0;
  const char* first = e->value.data();
  const char* last = first + e->value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ParseError(e->line, e->key,
                     "not a non-negative integer: " + e->value);
  }
  return v;
}

std::optional<std::vector<double>> TextDocument::optional_reals(
    std::string_view key) const {
  const Entry* e = find(key);
  if (e == nullptr) return std::nullopt;
  std::vector<double> out;
  for (const auto tok : split_ws(e->value)) {
    const auto v = parse_real(tok);
    if (!v) {
      throw ParseError(e->line, e->key,
                       "not a real number: '" + std::string(tok) + "'");
    }
    out.push_back(*v);
  }
  return out;
}

std::optional<std::vector<int>> TextDocument::optional_ints(
    std::string_view key) const {
  const Entry* e = find(key);
  if (e == nullptr) return std::nullopt;
  std::vector<int> out;
  for (const auto tok : split_ws(e->value)) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(e->line, e->key,
                       "not an integer: '" + std::string(tok) + "'");
    }
    out.push_back(v);
  }
  return out;
}

void TextDocument::reject_unknown(
    std::span<const std::string_view> allowed) const {
  for (const auto& e : entries_) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      throw ParseError(e.line, e.key, "unknown field");
    }
  }
}

void TextDocument::write(std::ostream& out) const {
  for (const auto& h : header_) out << "# " << h << '\n';
  for (const auto& e : entries_) out << e.key << " = " << e.value << '\n';
}

std::string TextDocument::to_string() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

void TextDocument::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace nnlsgd
