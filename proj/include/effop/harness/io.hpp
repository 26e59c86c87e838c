#pragma once

// Text matrix files: first data line "N" (square) or "R C" (rectangular),
// then one line per row holding (re, im) pairs. Lines starting with '#'
// are comments.

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "effop/effective.hpp"
#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"

namespace effop::io {

struct MatrixFile {
  Matrix matrix;
  std::vector<std::string> comments;  // without the leading '#'
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline long parse_count(const std::string& tok, const std::string& where) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || v < 0)
    throw Error(ErrorCode::ParseError, where + ": expected a non-negative integer, got '" + tok + "'");
  return v;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::out_of_range&) {
    return tok.front() == '-' ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size())
    throw Error(ErrorCode::ParseError, where + ": expected a number, got '" + tok + "'");
  return v;
}

}  // namespace detail

inline MatrixFile parse_matrix(std::istream& in, const std::string& source = "<stream>") {
  MatrixFile out;
  std::string line;
  long rows = -1, cols = -1, row = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      out.comments.push_back(detail::trim(t.substr(1)));
      continue;
    }
    const std::string where = source + ":" + std::to_string(lineno);
    std::istringstream ss(t);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (rows < 0) {
      if (tokens.size() == 1) {
        rows = cols = detail::parse_count(tokens[0], where);
      } else if (tokens.size() == 2) {
        rows = detail::parse_count(tokens[0], where);
        cols = detail::parse_count(tokens[1], where);
      } else {
        throw Error(ErrorCode::ParseError, where + ": header must be 'N' or 'ROWS COLS'");
      }
      out.matrix.resize(rows, cols);
      continue;
    }
    if (row >= rows) throw Error(ErrorCode::ParseError, where + ": more rows than declared");
    if (static_cast<long>(tokens.size()) != 2 * cols)
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(2 * cols) +
                                             " numbers, found " + std::to_string(tokens.size()));
    for (long j = 0; j < cols; ++j)
      out.matrix(row, j) = Complex(detail::parse_double(tokens[2 * j], where),
                                   detail::parse_double(tokens[2 * j + 1], where));
    ++row;
  }
  if (rows < 0) throw Error(ErrorCode::ParseError, source + ": no dimension line");
  if (row != rows)
    throw Error(ErrorCode::ParseError, source + ": declared " + std::to_string(rows) +
                                           " rows, found " + std::to_string(row));
  return out;
}

inline MatrixFile read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return parse_matrix(in, path);
}

/// Square matrices get the single-integer header, others "R C".
inline void write_matrix(std::ostream& out, const Matrix& m,
                         const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  if (m.rows() == m.cols())
    out << m.rows() << '\n';
  else
    out << m.rows() << ' ' << m.cols() << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j).real() << ' ' << m(i, j).imag();
    }
    out << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const Matrix& m,
                              const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  write_matrix(out, m, comments);
}

/// "1,3,4" -> {1,3,4}; indices stay 1-based.
inline std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = detail::trim(tok);
    if (tok.empty()) throw Error(ErrorCode::ParseError, "empty entry in index list '" + text + "'");
    const long v = detail::parse_count(tok, "index list");
    if (v < 1) throw Error(ErrorCode::IndexOutOfRange, "indices are 1-based; got 0");
    out.push_back(static_cast<Index>(v));
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, "empty index list");
  return out;
}

inline std::vector<Index> to_zero_based(const std::vector<Index>& one_based) {
  std::vector<Index> out;
  for (Index v : one_based) out.push_back(v - 1);
  return out;
}

/// Value of `key=` inside a comment line, or empty.
inline std::string comment_field(const std::vector<std::string>& comments, const std::string& key) {
  for (const auto& c : comments) {
    std::istringstream ss(c);
    for (std::string tok; ss >> tok;) {
      if (tok.rfind(key + "=", 0) == 0) {
        std::string v = tok.substr(key.size() + 1);
        while (!v.empty() && (v.back() == ',' || v.back() == ';')) v.pop_back();
        return v;
      }
    }
  }
  return {};
}

inline void write_decoupling_map(std::ostream& out, const DecouplingMap& dm) {
  std::ostringstream header;
  header << "s-matrix rows=" << dm.s().rows() << " cols=" << dm.s().cols()
         << " K=" << format_indices(dm.model_space().indices());
  std::vector<std::string> comments{header.str()};
  const auto& prov = dm.provenance();
  if (prov.kind == MapProvenance::Kind::Direct)
    comments.push_back("provenance=direct J=" + format_indices(prov.selection));
  else if (prov.kind == MapProvenance::Kind::Iterative) {
    std::ostringstream p;
    p << std::setprecision(6) << "provenance=iterative iterations=" << prov.iterations
      << " residual=" << prov.residual;
    comments.push_back(p.str());
  }
  write_matrix(out, dm.s(), comments);
}

inline void write_decoupling_map_file(const std::string& path, const DecouplingMap& dm) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  write_decoupling_map(out, dm);
}

/// Reads an s-matrix file; K comes from the "# s-matrix ... K=" header and
/// N = rows + cols.
inline DecouplingMap read_decoupling_map(std::istream& in, const std::string& source = "<stream>") {
  MatrixFile mf = parse_matrix(in, source);
  const std::string k_text = comment_field(mf.comments, "K");
  if (k_text.empty()) throw Error(ErrorCode::ParseError, source + ": missing K= in s-matrix header");
  const Index n = mf.matrix.rows() + mf.matrix.cols();
  const ModelSpace ms = ModelSpace::from_one_based(n, parse_index_list(k_text));
  MapProvenance prov;
  const std::string j_text = comment_field(mf.comments, "J");
  if (comment_field(mf.comments, "provenance") == "direct" && !j_text.empty()) {
    prov.kind = MapProvenance::Kind::Direct;
    prov.selection = to_zero_based(parse_index_list(j_text));
  }
  return DecouplingMap(ms, std::move(mf.matrix), std::move(prov));
}

inline DecouplingMap read_decoupling_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return read_decoupling_map(in, path);
}

/// Effective operator with a provenance header "# K=... J=... residual=...".
inline void write_effective(std::ostream& out, const Matrix& m, const ModelSpace& ms,
                            const MapProvenance& prov, double residual, const std::string& kind) {
  std::ostringstream h;
  h << "effective type=" << kind << " K=" << format_indices(ms.indices())
    << " J=" << (prov.kind == MapProvenance::Kind::Direct ? format_indices(prov.selection) : "-")
    << std::setprecision(6) << " residual=" << residual;
  write_matrix(out, m, {h.str()});
}

/// One "block: J=<ids> K=<ids>" line per block; ids are 1-based.
struct PlanBlock {
  std::vector<Index> j;  // 1-based
  std::vector<Index> k;  // 1-based
};

inline std::vector<PlanBlock> parse_plan(std::istream& in, const std::string& source = "<plan>") {
  std::vector<PlanBlock> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (t.rfind("block:", 0) != 0) throw Error(ErrorCode::ParseError, where + ": expected 'block:'");
    std::vector<std::string> comments{t.substr(6)};
    const std::string j = comment_field(comments, "J");
    const std::string k = comment_field(comments, "K");
    if (j.empty() || k.empty()) throw Error(ErrorCode::ParseError, where + ": need J=... and K=...");
    out.push_back({parse_index_list(j), parse_index_list(k)});
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, source + ": plan has no blocks");
  return out;
}

inline std::vector<PlanBlock> read_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return parse_plan(in, path);
}

}  // namespace effop::io
