#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rchol/error.hpp"
#include "rchol/factorization.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

// ---------------------------------------------------------------------------
// Number formatting

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Flat JSON object that keeps insertion order and prints doubles with 17
/// significant digits.
class JsonObject {
 public:
  JsonObject& add(const std::string& key, double v) { return raw(key, format_double(v)); }
  JsonObject& add(const std::string& key, int v) { return raw(key, std::to_string(v)); }
  JsonObject& add(const std::string& key, long v) { return raw(key, std::to_string(v)); }
  JsonObject& add(const std::string& key, long long v) { return raw(key, std::to_string(v)); }
  JsonObject& add(const std::string& key, unsigned long v) { return raw(key, std::to_string(v)); }
  JsonObject& add(const std::string& key, unsigned long long v) {
    return raw(key, std::to_string(v));
  }
  JsonObject& add(const std::string& key, bool v) { return raw(key, v ? "true" : "false"); }
  JsonObject& add(const std::string& key, const char* v) { return add(key, std::string(v)); }
  JsonObject& add(const std::string& key, const std::string& v) { return raw(key, quote(v)); }
  JsonObject& add(const std::string& key, const JsonObject& v) { return raw(key, v.str()); }

  JsonObject& raw(const std::string& key, std::string value) {
    fields_.emplace_back(key, std::move(value));
    return *this;
  }

  std::string str() const {
    std::string s = "{";
    for (std::size_t q = 0; q < fields_.size(); ++q) {
      if (q) s += ", ";
      s += quote(fields_[q].first) + ": " + fields_[q].second;
    }
    return s + "}";
  }

  static std::string quote(const std::string& v) {
    std::string s = "\"";
    for (char c : v) {
      switch (c) {
        case '"': s += "\\\""; break;
        case '\\': s += "\\\\"; break;
        case '\n': s += "\\n"; break;
        case '\t': s += "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            s += buf;
          } else {
            s += c;
          }
      }
    }
    return s + "\"";
  }

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

inline std::string json_array(const std::vector<JsonObject>& rows) {
  std::string s = "[";
  for (std::size_t q = 0; q < rows.size(); ++q) s += (q ? ",\n " : "") + rows[q].str();
  return s + "]";
}

// ---------------------------------------------------------------------------
// Matrix Market

struct MatrixMarketHeader {
  bool symmetric = false;
  index_t rows = 0, cols = 0;
  std::size_t entries = 0;
};

namespace detail {

inline std::string lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline MatrixMarketHeader read_mm_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw error(errc::format, "empty Matrix Market input");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw error(errc::format, "missing %%MatrixMarket banner");
  object = lower_copy(object);
  format = lower_copy(format);
  field = lower_copy(field);
  symmetry = lower_copy(symmetry);
  if (object != "matrix") throw error(errc::format, "unsupported object '" + object + "'");
  if (format != "coordinate") throw error(errc::format, "only coordinate format is supported");
  if (field == "pattern") throw error(errc::format, "pattern matrix: values required");
  if (field != "real" && field != "integer" && field != "double")
    throw error(errc::format, "unsupported field '" + field + "'");
  MatrixMarketHeader h;
  if (symmetry == "symmetric")
    h.symmetric = true;
  else if (symmetry != "general")
    throw error(errc::format, "unsupported symmetry '" + symmetry + "'");
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    long long r = 0, c = 0, e = 0;
    if (!(ss >> r >> c >> e) || r < 0 || c < 0 || e < 0)
      throw error(errc::format, "bad size line '" + line + "'");
    if (r > INT32_MAX || c > INT32_MAX) throw error(errc::format, "dimension too large");
    h.rows = static_cast<index_t>(r);
    h.cols = static_cast<index_t>(c);
    h.entries = static_cast<std::size_t>(e);
    return h;
  }
  throw error(errc::format, "missing size line");
}

inline std::vector<Triplet> read_mm_entries(std::istream& in, const MatrixMarketHeader& h) {
  std::vector<Triplet> t;
  t.reserve(h.entries);
  std::string line;
  while (t.size() < h.entries && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    const char* p = line.c_str();
    char* endp = nullptr;
    const long long r = std::strtoll(p, &endp, 10);
    if (endp == p) throw error(errc::format, "bad entry line '" + line + "'");
    p = endp;
    const long long c = std::strtoll(p, &endp, 10);
    if (endp == p) throw error(errc::format, "bad entry line '" + line + "'");
    p = endp;
    const double v = std::strtod(p, &endp);
    if (endp == p) throw error(errc::format, "entry without value '" + line + "'");
    if (r < 1 || c < 1 || r > h.rows || c > h.cols)
      throw error(errc::index_out_of_range, "entry (" + std::to_string(r) + ", " +
                                                std::to_string(c) + ") outside the matrix");
    t.push_back({static_cast<index_t>(r - 1), static_cast<index_t>(c - 1), v});
  }
  if (t.size() != h.entries)
    throw error(errc::format, "expected " + std::to_string(h.entries) + " entries, found " +
                                   std::to_string(t.size()));
  return t;
}

/// Sums duplicates, sorted by (row, col).
inline std::vector<Triplet> canonical_triplets(std::vector<Triplet> t) {
  std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Triplet> out;
  for (const auto& e : t) {
    if (!out.empty() && out.back().row == e.row && out.back().col == e.col)
      out.back().value += e.value;
    else
      out.push_back(e);
  }
  return out;
}

inline void check_general_symmetry(const std::vector<Triplet>& t) {
  std::vector<Triplet> a = canonical_triplets(t);
  std::vector<Triplet> b;
  b.reserve(a.size());
  double scale = 0.0;
  for (const auto& e : a) {
    b.push_back({e.col, e.row, e.value});
    scale = std::max(scale, std::abs(e.value));
  }
  b = canonical_triplets(std::move(b));
  const double tol = 1e-12 * scale;
  std::size_t p = 0, q = 0;
  auto fail = [](const Triplet& e) {
    throw error(errc::asymmetric, "entry (" + std::to_string(e.row + 1) + ", " +
                                      std::to_string(e.col + 1) + ") has no symmetric partner");
  };
  while (p < a.size() || q < b.size()) {
    if (q == b.size() || (p < a.size() && (a[p].row < b[q].row ||
                                           (a[p].row == b[q].row && a[p].col < b[q].col)))) {
      if (std::abs(a[p].value) > tol) fail(a[p]);
      ++p;
    } else if (p == a.size() || b[q].row < a[p].row ||
               (b[q].row == a[p].row && b[q].col < a[p].col)) {
      if (std::abs(b[q].value) > tol) fail(b[q]);
      ++q;
    } else {
      if (std::abs(a[p].value - b[q].value) > tol)
        throw error(errc::asymmetric, "entries (" + std::to_string(a[p].row + 1) + ", " +
                                          std::to_string(a[p].col + 1) + ") differ across the diagonal");
      ++p;
      ++q;
    }
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error(errc::io, "cannot write '" + path + "'");
  return out;
}

}  // namespace detail

/// Reads a square symmetric matrix in coordinate real format (1-based).
/// General files must be symmetric to 1e-12 * max|value|.
inline SparseSym read_matrix_market(std::istream& in) {
  const auto h = detail::read_mm_header(in);
  if (h.rows != h.cols)
    throw error(errc::format, "matrix is " + std::to_string(h.rows) + "x" +
                                   std::to_string(h.cols) + ", not square");
  auto t = detail::read_mm_entries(in, h);
  if (h.symmetric) {
    // Entries are given in one triangle; fold any upper entry into the lower one.
    for (auto& e : t)
      if (e.row < e.col) std::swap(e.row, e.col);
  } else {
    detail::check_general_symmetry(t);
    std::vector<Triplet> lower;
    lower.reserve(t.size() / 2 + static_cast<std::size_t>(h.rows));
    for (const auto& e : t)
      if (e.row >= e.col) lower.push_back(e);
    t = std::move(lower);
  }
  return SparseSym::from_coo(t, h.rows);
}

inline SparseSym read_matrix_market(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_market(in);
}

/// Writes the lower triangle with a symmetric header and %.17g values.
inline void write_matrix_market(const SparseSym& a, std::ostream& out) {
  std::size_t lower = 0;
  for (index_t j = 0; j < a.size(); ++j)
    for (index_t r : a.rows(j)) lower += r >= j;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.size() << ' ' << a.size() << ' ' << lower << '\n';
  for (index_t j = 0; j < a.size(); ++j) {
    auto r = a.rows(j);
    auto v = a.vals(j);
    for (std::size_t p = 0; p < r.size(); ++p)
      if (r[p] >= j) out << r[p] + 1 << ' ' << j + 1 << ' ' << format_double(v[p]) << '\n';
  }
}

inline void write_matrix_market(const SparseSym& a, const std::string& path) {
  auto out = detail::open_out(path);
  write_matrix_market(a, out);
  if (!out) throw error(errc::io, "write failed for '" + path + "'");
}

inline void write_lower_tri(const LowerTri& g, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << g.size() << ' ' << g.size() << ' ' << g.nnz() << '\n';
  for (index_t j = 0; j < g.size(); ++j) {
    auto r = g.rows(j);
    auto v = g.vals(j);
    for (std::size_t p = 0; p < r.size(); ++p)
      out << r[p] + 1 << ' ' << j + 1 << ' ' << format_double(v[p]) << '\n';
  }
}

inline LowerTri read_lower_tri(std::istream& in, bool singular_last) {
  const auto h = detail::read_mm_header(in);
  if (h.rows != h.cols) throw error(errc::format, "factor is not square");
  return LowerTri::from_coo(detail::read_mm_entries(in, h), h.rows, singular_last);
}

/// Sparse row vector (1 x n) in coordinate format.
inline void write_sparse_row(const std::vector<std::pair<index_t, double>>& row, index_t n,
                             std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << 1 << ' ' << n << ' ' << row.size() << '\n';
  for (const auto& [c, v] : row) out << 1 << ' ' << c + 1 << ' ' << format_double(v) << '\n';
}

inline std::vector<std::pair<index_t, double>> read_sparse_row(std::istream& in) {
  const auto h = detail::read_mm_header(in);
  if (h.rows != 1) throw error(errc::format, "row vector must have one row");
  std::vector<std::pair<index_t, double>> row;
  for (const auto& t : detail::read_mm_entries(in, h)) row.emplace_back(t.col, t.value);
  std::stable_sort(row.begin(), row.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return row;
}

// ---------------------------------------------------------------------------
// Permutations and dense vectors

/// One 1-based original index per line, in elimination order.
inline void write_perm(const Perm& p, std::ostream& out) {
  for (index_t v : p.inverse()) out << v + 1 << '\n';
}

inline Perm read_perm(std::istream& in, std::optional<index_t> n = std::nullopt) {
  std::vector<index_t> order;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%' || line[0] == '#') continue;
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v)) throw error(errc::format, "bad permutation line '" + line + "'");
    if (v < 1 || v > INT32_MAX) throw error(errc::index_out_of_range, "permutation entry " + line);
    order.push_back(static_cast<index_t>(v - 1));
  }
  if (n && static_cast<index_t>(order.size()) != *n)
    throw error(errc::dimension_mismatch, "permutation has " + std::to_string(order.size()) +
                                              " entries for n=" + std::to_string(*n));
  return Perm::from_order(std::move(order));
}

inline Perm read_perm(const std::string& path, std::optional<index_t> n = std::nullopt) {
  auto in = detail::open_in(path);
  return read_perm(in, n);
}

/// Whitespace-separated values, one vector entry each; '%' and '#' start comments.
inline std::vector<double> read_vector(std::istream& in) {
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%' || line[0] == '#') continue;
    std::istringstream ss(line);
    double x;
    while (ss >> x) v.push_back(x);
  }
  return v;
}

inline std::vector<double> read_vector(const std::string& path) {
  auto in = detail::open_in(path);
  return read_vector(in);
}

inline void write_vector(std::span<const double> v, std::ostream& out) {
  for (double x : v) out << format_double(x) << '\n';
}

/// Raw little-endian float64 array.
inline void write_raw_f64(std::span<const double> v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::io, "cannot write '" + path + "'");
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    unsigned char b[8];
    for (int q = 0; q < 8; ++q) b[q] = static_cast<unsigned char>(bits >> (8 * q));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw error(errc::io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Factor archive

inline JsonObject factor_meta_json(const CholFactor& f) {
  JsonObject m;
  m.add("n", static_cast<long long>(f.size()))
      .add("seed", static_cast<unsigned long long>(f.meta.seed))
      .add("ordering", f.meta.ordering)
      .add("nd_levels", f.meta.nd_levels)
      .add("threads", f.meta.threads)
      .add("nnz_G", static_cast<unsigned long long>(f.g.nnz()))
      .add("nnz_ext_row", static_cast<unsigned long long>(f.ext_row ? f.ext_row->size() : 0))
      .add("fill", static_cast<unsigned long long>(f.fill()))
      .add("matrix_nnz", static_cast<unsigned long long>(f.meta.matrix_nnz))
      .add("fill_ratio", f.fill_ratio())
      .add("merged_edges", static_cast<unsigned long long>(f.meta.merged_edges))
      .add("dropped_edges", static_cast<unsigned long long>(f.meta.dropped_edges))
      .add("min_pivot", f.meta.min_pivot)
      .add("max_diag", f.meta.max_diag)
      .add("final_diag", f.meta.final_diag)
      .add("build_seconds", f.meta.build_seconds)
      .add("precision", f.meta.f32 ? "f32" : "f64")
      .add("singular_last", f.g.singular_last())
      .add("has_ext_row", f.ext_row.has_value());
  return m;
}

namespace detail {

inline void apply_meta_json(const std::string& text, CholFactor& f, bool& singular_last,
                            bool& has_ext, index_t& n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw error(errc::format, std::string("factor meta: ") + e.what());
  }
  auto num = [&](const char* key, double fallback) {
    return j.contains(key) && j[key].is_number() ? j[key].get<double>() : fallback;
  };
  n = j.value("n", 0);
  f.meta.seed = j.value("seed", std::uint64_t{0});
  f.meta.ordering = j.value("ordering", std::string("natural"));
  f.meta.nd_levels = j.value("nd_levels", 0);
  f.meta.threads = j.value("threads", 1);
  f.meta.matrix_nnz = j.value("matrix_nnz", std::size_t{0});
  f.meta.merged_edges = j.value("merged_edges", std::size_t{0});
  f.meta.dropped_edges = j.value("dropped_edges", std::size_t{0});
  f.meta.min_pivot = num("min_pivot", std::numeric_limits<double>::infinity());
  f.meta.max_diag = num("max_diag", 0.0);
  f.meta.final_diag = num("final_diag", 0.0);
  f.meta.build_seconds = num("build_seconds", 0.0);
  f.meta.f32 = j.value("precision", std::string("f64")) == "f32";
  singular_last = j.value("singular_last", false);
  has_ext = j.value("has_ext_row", false);
}

}  // namespace detail

/// Writes meta.json, G.mtx, perm.txt and (if present) ext_row.mtx into `dir`.
inline void save_factor_dir(const CholFactor& f, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  {
    auto out = detail::open_out((d / "meta.json").string());
    out << factor_meta_json(f).str() << '\n';
  }
  {
    auto out = detail::open_out((d / "G.mtx").string());
    write_lower_tri(f.g, out);
  }
  {
    auto out = detail::open_out((d / "perm.txt").string());
    write_perm(f.perm, out);
  }
  if (f.ext_row) {
    auto out = detail::open_out((d / "ext_row.mtx").string());
    write_sparse_row(*f.ext_row, f.size(), out);
  }
}

inline CholFactor load_factor_dir(const std::string& dir) {
  const std::filesystem::path d(dir);
  CholFactor f;
  bool singular = false, has_ext = false;
  index_t n = 0;
  {
    auto in = detail::open_in((d / "meta.json").string());
    std::stringstream s;
    s << in.rdbuf();
    detail::apply_meta_json(s.str(), f, singular, has_ext, n);
  }
  {
    auto in = detail::open_in((d / "G.mtx").string());
    f.g = read_lower_tri(in, singular);
  }
  {
    auto in = detail::open_in((d / "perm.txt").string());
    f.perm = read_perm(in, f.g.size());
  }
  if (has_ext) {
    auto in = detail::open_in((d / "ext_row.mtx").string());
    f.ext_row = read_sparse_row(in);
  }
  if (n != f.g.size()) throw error(errc::format, "factor meta size does not match G");
  return f;
}

/// Single-stream container: a banner line, then sections introduced by
/// "@@ <name>" lines. Known sections are meta, G, perm, ext_row and matrix.
struct Archive {
  CholFactor factor;
  std::optional<SparseSym> matrix;
};

inline constexpr const char* archive_banner = "%%RcholArchive 1";

inline void write_archive(const CholFactor& f, const SparseSym* matrix, std::ostream& out) {
  out << archive_banner << '\n';
  out << "@@ meta\n" << factor_meta_json(f).str() << '\n';
  out << "@@ G\n";
  write_lower_tri(f.g, out);
  out << "@@ perm\n";
  write_perm(f.perm, out);
  if (f.ext_row) {
    out << "@@ ext_row\n";
    write_sparse_row(*f.ext_row, f.size(), out);
  }
  if (matrix) {
    out << "@@ matrix\n";
    write_matrix_market(*matrix, out);
  }
  out << "@@ end\n";
}

/// Reads the remainder of a stream whose banner line has already been consumed.
inline Archive read_archive_body(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> sections;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("@@ ", 0) == 0) {
      const std::string name = line.substr(3);
      if (name == "end") break;
      sections.emplace_back(name, std::string());
    } else if (!sections.empty()) {
      sections.back().second += line;
      sections.back().second += '\n';
    } else if (!line.empty()) {
      throw error(errc::format, "archive content before the first section");
    }
  }
  Archive a;
  bool singular = false, has_ext = false, have_meta = false, have_g = false, have_perm = false;
  index_t n = 0;
  std::string g_text, perm_text;
  for (const auto& [name, body] : sections) {
    std::istringstream s(body);
    if (name == "meta") {
      detail::apply_meta_json(body, a.factor, singular, has_ext, n);
      have_meta = true;
    } else if (name == "G") {
      g_text = body;
      have_g = true;
    } else if (name == "perm") {
      perm_text = body;
      have_perm = true;
    } else if (name == "ext_row") {
      a.factor.ext_row = read_sparse_row(s);
    } else if (name == "matrix") {
      a.matrix = read_matrix_market(s);
    } else {
      throw error(errc::format, "unknown archive section '" + name + "'");
    }
  }
  if (!have_meta || !have_g || !have_perm)
    throw error(errc::format, "archive needs meta, G and perm sections");
  std::istringstream gs(g_text), ps(perm_text);
  a.factor.g = read_lower_tri(gs, singular);
  a.factor.perm = read_perm(ps, a.factor.g.size());
  if (n != a.factor.g.size()) throw error(errc::format, "archive meta size does not match G");
  if (has_ext && !a.factor.ext_row) throw error(errc::format, "archive lacks its ext_row section");
  return a;
}

inline Archive read_archive(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != archive_banner)
    throw error(errc::format, "not a factor archive");
  return read_archive_body(in);
}

/// A factor directory or a single-file archive.
inline CholFactor load_factor(const std::string& path) {
  if (std::filesystem::is_directory(path)) return load_factor_dir(path);
  auto in = detail::open_in(path);
  return read_archive(in).factor;
}

}  // namespace rchol
