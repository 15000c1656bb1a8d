#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include <unistd.h>

#include "rankone/core.hpp"
#include "rankone/error.hpp"

namespace rankone::io {

/// Shortest decimal form that reads back to the same double (17 digits).
inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::Io, "read failed on '" + path + "'");
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed on '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::Io, "cannot rename onto '" + path + "'");
  }
}

namespace detail {

/// Line-oriented tokenizer that remembers line numbers for error messages.
class LineReader {
 public:
  LineReader(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {}

  /// Next line with content; false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    while (pos_ < text_.size()) {
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string::npos) end = text_.size();
      std::string_view line(text_.data() + pos_, end - pos_);
      pos_ = end + 1;
      ++line_;
      tokens.clear();
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_space(line[j])) ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
      }
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::Parse, source_ + ":" + std::to_string(line_) + ": " + what, static_cast<std::size_t>(line_));
  }

  template <class T>
  T number(std::string_view tok) const {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("malformed number '" + std::string(tok) + "'");
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(value)) fail("non-finite value '" + std::string(tok) + "'");
    }
    return value;
  }

  Index line() const { return line_; }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

  std::string text_;
  std::string source_;
  std::size_t pos_ = 0;
  Index line_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// symmetric coordinate format
//
//   %%sym-coo n nnz
//   i j value        (nnz lines, 0-based, i <= j)

inline std::string format_sym_coo(const SymmetricMatrix& a) {
  std::vector<std::tuple<Index, Index, double>> entries;
  a.for_each_upper([&](Index i, Index j, double v) { entries.emplace_back(i, j, v); });
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
    return std::pair(std::get<0>(x), std::get<1>(x)) < std::pair(std::get<0>(y), std::get<1>(y));
  });
  std::string out = "%%sym-coo " + std::to_string(a.n()) + " " + std::to_string(entries.size()) + "\n";
  for (const auto& [i, j, v] : entries) {
    out += std::to_string(i);
    out += ' ';
    out += std::to_string(j);
    out += ' ';
    out += format_g17(v);
    out += '\n';
  }
  return out;
}

inline SymmetricMatrix parse_sym_coo(std::string text, const std::string& source = "<matrix>") {
  detail::LineReader in(std::move(text), source);
  std::vector<std::string_view> tok;
  if (!in.next(tok)) in.fail("empty input, expected '%%sym-coo n nnz'");
  if (tok.size() != 3 || tok[0] != "%%sym-coo") in.fail("expected header '%%sym-coo n nnz'");
  const auto n = in.number<Index>(tok[1]);
  const auto nnz = in.number<Index>(tok[2]);
  if (n < 0 || nnz < 0) in.fail("negative size in header");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::set<std::pair<Index, Index>> seen;
  while (in.next(tok)) {
    if (tok.size() != 3) in.fail("expected 'i j value'");
    const auto i = in.number<Index>(tok[0]);
    const auto j = in.number<Index>(tok[1]);
    const auto v = in.number<double>(tok[2]);
    if (i < 0 || j < 0 || i >= n || j >= n) in.fail("index out of range");
    if (i > j) in.fail("entry below the diagonal; only the upper triangle is stored");
    if (!seen.insert({i, j}).second) in.fail("duplicate entry");
    entries.emplace_back(i, j, v);
  }
  if (static_cast<Index>(entries.size()) != nnz) {
    throw Error(Errc::Parse, source + ": header announces " + std::to_string(nnz) + " entries, found " +
                                 std::to_string(entries.size()));
  }
  return SymmetricMatrix::from_triplets(n, entries);
}

inline SymmetricMatrix read_sym_coo(const std::string& path) { return parse_sym_coo(read_text(path), path); }

// ---------------------------------------------------------------------------
// eigenpair format
//
//   n m
//   lambda_1 ... lambda_m
//   n lines with m entries; column k holds eigenvector k

struct EigenFile {
  Vector values;
  Matrix vectors;
};

inline std::string format_eig(const Vector& values, const Matrix& vectors) {
  rankone::detail::require_dims(vectors.cols() == values.size(), "format_eig: value/vector count mismatch");
  std::string out = std::to_string(vectors.rows()) + " " + std::to_string(vectors.cols()) + "\n";
  for (Index k = 0; k < values.size(); ++k) {
    if (k) out += ' ';
    out += format_g17(values(k));
  }
  out += '\n';
  for (Index i = 0; i < vectors.rows(); ++i) {
    for (Index k = 0; k < vectors.cols(); ++k) {
      if (k) out += ' ';
      out += format_g17(vectors(i, k));
    }
    out += '\n';
  }
  return out;
}

inline EigenFile parse_eig(std::string text, const std::string& source = "<eigs>") {
  detail::LineReader in(std::move(text), source);
  std::vector<std::string_view> tok;
  if (!in.next(tok) || tok.size() != 2) in.fail("expected header 'n m'");
  const auto n = in.number<Index>(tok[0]);
  const auto m = in.number<Index>(tok[1]);
  if (n < 1 || m < 1 || m > n) in.fail("header needs 1 <= m <= n");
  EigenFile out;
  out.values.resize(m);
  out.vectors.resize(n, m);
  if (!in.next(tok)) in.fail("missing eigenvalue line");
  if (static_cast<Index>(tok.size()) != m) in.fail("expected " + std::to_string(m) + " eigenvalues");
  for (Index k = 0; k < m; ++k) out.values(k) = in.number<double>(tok[static_cast<std::size_t>(k)]);
  for (Index i = 0; i < n; ++i) {
    if (!in.next(tok)) in.fail("expected " + std::to_string(n) + " vector rows, found " + std::to_string(i));
    if (static_cast<Index>(tok.size()) != m) in.fail("expected " + std::to_string(m) + " entries per row");
    for (Index k = 0; k < m; ++k) out.vectors(i, k) = in.number<double>(tok[static_cast<std::size_t>(k)]);
  }
  if (in.next(tok)) in.fail("trailing content after the vector rows");
  return out;
}

inline EigenFile read_eig(const std::string& path) { return parse_eig(read_text(path), path); }

// ---------------------------------------------------------------------------
// plain vectors: whitespace-separated values, any line layout

inline std::string format_vector(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    out += format_g17(v(i));
    out += '\n';
  }
  return out;
}

inline Vector parse_vector(std::string text, const std::string& source = "<vector>") {
  detail::LineReader in(std::move(text), source);
  std::vector<std::string_view> tok;
  std::vector<double> xs;
  while (in.next(tok))
    for (auto t : tok) xs.push_back(in.number<double>(t));
  if (xs.empty()) throw Error(Errc::Parse, source + ": no values");
  return Eigen::Map<Vector>(xs.data(), static_cast<Index>(xs.size()));
}

inline Vector read_vector(const std::string& path) { return parse_vector(read_text(path), path); }

}  // namespace rankone::io
