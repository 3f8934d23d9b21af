#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "rchol/error.hpp"

namespace rchol {

using index_t = std::int32_t;
using offset_t = std::int64_t;

struct Triplet {
  index_t row;
  index_t col;
  double value;
};

// Compressed-column storage shared by the symmetric and triangular types.
struct CscData {
  index_t n = 0;
  std::vector<offset_t> col_ptr{0};
  std::vector<index_t> row_idx;
  std::vector<double> values;
};

/// Symmetric sparse matrix with both triangles stored explicitly.
///
/// Rows are strictly increasing inside each column, the pattern and the values
/// are symmetric and no explicit zero is stored. Instances are immutable.
class SparseSym {
 public:
  SparseSym() = default;

  /// Builds from 0-based triplets. Duplicates are summed; a pair given in only
  /// one triangle is mirrored. Pairs given in both triangles must agree to
  /// 1e-12 * max|value|.
  static SparseSym from_coo(std::span<const Triplet> triplets, index_t n);

  /// Adopts compressed-column arrays that already satisfy the invariants.
  static SparseSym from_csc_unchecked(CscData data) {
    SparseSym a;
    a.data_ = std::move(data);
    return a;
  }

  static SparseSym identity(index_t n) {
    CscData d;
    d.n = n;
    d.col_ptr.resize(static_cast<std::size_t>(n) + 1);
    for (index_t j = 0; j < n; ++j) {
      d.col_ptr[j + 1] = j + 1;
      d.row_idx.push_back(j);
      d.values.push_back(1.0);
    }
    return from_csc_unchecked(std::move(d));
  }

  index_t size() const { return data_.n; }
  std::size_t nnz() const { return data_.row_idx.size(); }

  std::span<const offset_t> col_ptr() const { return data_.col_ptr; }
  std::span<const index_t> row_idx() const { return data_.row_idx; }
  std::span<const double> values() const { return data_.values; }

  std::span<const index_t> rows(index_t j) const {
    return {data_.row_idx.data() + data_.col_ptr[j],
            static_cast<std::size_t>(data_.col_ptr[j + 1] - data_.col_ptr[j])};
  }
  std::span<const double> vals(index_t j) const {
    return {data_.values.data() + data_.col_ptr[j],
            static_cast<std::size_t>(data_.col_ptr[j + 1] - data_.col_ptr[j])};
  }

  /// Entry (i, j), zero if not stored. O(log nnz(column)).
  double operator()(index_t i, index_t j) const {
    auto r = rows(j);
    auto it = std::lower_bound(r.begin(), r.end(), i);
    if (it == r.end() || *it != i) return 0.0;
    return vals(j)[static_cast<std::size_t>(it - r.begin())];
  }

  double diag(index_t j) const { return (*this)(j, j); }

  /// All stored entries as 0-based triplets, column-major.
  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (index_t j = 0; j < size(); ++j) {
      auto r = rows(j);
      auto v = vals(j);
      for (std::size_t p = 0; p < r.size(); ++p) out.push_back({r[p], j, v[p]});
    }
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_.values) m = std::max(m, std::abs(v));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_.values) s += v * v;
    return std::sqrt(s);
  }

  const CscData& data() const { return data_; }

  friend bool operator==(const SparseSym& a, const SparseSym& b) {
    return a.data_.n == b.data_.n && a.data_.col_ptr == b.data_.col_ptr &&
           a.data_.row_idx == b.data_.row_idx && a.data_.values == b.data_.values;
  }

 private:
  CscData data_;
};

/// Lower-triangular factor in compressed-column layout.
///
/// The diagonal entry leads each column. When `singular_last` is set the final
/// column is intentionally empty (the zero pivot left by a Laplacian
/// elimination) and the triangular solves pin that coordinate to zero.
class LowerTri {
 public:
  LowerTri() = default;

  static LowerTri from_csc(CscData data, bool singular_last = false) {
    for (index_t j = 0; j < data.n; ++j) {
      for (offset_t p = data.col_ptr[j]; p < data.col_ptr[j + 1]; ++p) {
        if (data.row_idx[p] < j)
          throw error(errc::precondition, "entry above the diagonal in lower factor");
        if (p > data.col_ptr[j] && data.row_idx[p] <= data.row_idx[p - 1])
          throw error(errc::precondition, "row indices not increasing in lower factor");
      }
    }
    LowerTri g;
    g.data_ = std::move(data);
    g.singular_last_ = singular_last;
    return g;
  }

  /// Convenience constructor from 0-based triplets (duplicates summed).
  static LowerTri from_coo(std::span<const Triplet> triplets, index_t n,
                           bool singular_last = false) {
    std::vector<Triplet> t(triplets.begin(), triplets.end());
    for (const auto& e : t) {
      if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n)
        throw error(errc::index_out_of_range, "lower factor triplet");
      if (e.row < e.col) throw error(errc::precondition, "entry above the diagonal");
    }
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    CscData d;
    d.n = n;
    d.col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t p = 0; p < t.size(); ++p) {
      if (!d.row_idx.empty() && p > 0 && t[p].col == t[p - 1].col && t[p].row == t[p - 1].row) {
        d.values.back() += t[p].value;
        continue;
      }
      d.row_idx.push_back(t[p].row);
      d.values.push_back(t[p].value);
      d.col_ptr[t[p].col + 1]++;
    }
    for (index_t j = 0; j < n; ++j) d.col_ptr[j + 1] += d.col_ptr[j];
    return from_csc(std::move(d), singular_last);
  }

  index_t size() const { return data_.n; }
  std::size_t nnz() const { return data_.row_idx.size(); }
  bool singular_last() const { return singular_last_; }

  std::span<const index_t> rows(index_t j) const {
    return {data_.row_idx.data() + data_.col_ptr[j],
            static_cast<std::size_t>(data_.col_ptr[j + 1] - data_.col_ptr[j])};
  }
  std::span<const double> vals(index_t j) const {
    return {data_.values.data() + data_.col_ptr[j],
            static_cast<std::size_t>(data_.col_ptr[j + 1] - data_.col_ptr[j])};
  }

  const CscData& data() const { return data_; }
  CscData& mutable_data() { return data_; }

  /// y = G * x
  std::vector<double> multiply(std::span<const double> x) const {
    if (static_cast<index_t>(x.size()) != size())
      throw error(errc::dimension_mismatch, "lower factor multiply");
    std::vector<double> y(x.size(), 0.0);
    for (index_t j = 0; j < size(); ++j) {
      auto r = rows(j);
      auto v = vals(j);
      for (std::size_t p = 0; p < r.size(); ++p) y[r[p]] += v[p] * x[j];
    }
    return y;
  }

  /// y = G^T * x
  std::vector<double> multiply_transpose(std::span<const double> x) const {
    if (static_cast<index_t>(x.size()) != size())
      throw error(errc::dimension_mismatch, "lower factor multiply");
    std::vector<double> y(x.size(), 0.0);
    for (index_t j = 0; j < size(); ++j) {
      auto r = rows(j);
      auto v = vals(j);
      double s = 0.0;
      for (std::size_t p = 0; p < r.size(); ++p) s += v[p] * x[r[p]];
      y[j] = s;
    }
    return y;
  }

  friend bool operator==(const LowerTri& a, const LowerTri& b) {
    return a.singular_last_ == b.singular_last_ && a.data_.n == b.data_.n &&
           a.data_.col_ptr == b.data_.col_ptr && a.data_.row_idx == b.data_.row_idx &&
           a.data_.values == b.data_.values;
  }

 private:
  CscData data_;
  bool singular_last_ = false;
};

/// Permutation stored in both directions: forward maps old -> new and inverse
/// maps new -> old.
class Perm {
 public:
  Perm() = default;

  static Perm identity(index_t n) {
    std::vector<index_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    return from_order(std::move(order));
  }

  /// `order[k]` is the old index placed at position k (the elimination order).
  static Perm from_order(std::vector<index_t> order) {
    Perm p;
    const auto n = static_cast<index_t>(order.size());
    p.forward_.assign(order.size(), -1);
    for (index_t k = 0; k < n; ++k) {
      index_t old = order[k];
      if (old < 0 || old >= n || p.forward_[old] != -1)
        throw error(errc::precondition, "permutation is not a bijection");
      p.forward_[old] = k;
    }
    p.inverse_ = std::move(order);
    return p;
  }

  static Perm from_forward(const std::vector<index_t>& forward) {
    std::vector<index_t> order(forward.size(), -1);
    const auto n = static_cast<index_t>(forward.size());
    for (index_t old = 0; old < n; ++old) {
      index_t k = forward[old];
      if (k < 0 || k >= n || order[k] != -1)
        throw error(errc::precondition, "permutation is not a bijection");
      order[k] = old;
    }
    return from_order(std::move(order));
  }

  index_t size() const { return static_cast<index_t>(forward_.size()); }
  index_t forward(index_t old) const { return forward_[old]; }
  index_t inverse(index_t pos) const { return inverse_[pos]; }
  const std::vector<index_t>& forward() const { return forward_; }
  const std::vector<index_t>& inverse() const { return inverse_; }

  Perm inverted() const { return from_order(forward_); }

  friend bool operator==(const Perm&, const Perm&) = default;

 private:
  std::vector<index_t> forward_;
  std::vector<index_t> inverse_;
};

inline SparseSym SparseSym::from_coo(std::span<const Triplet> triplets, index_t n) {
  if (n < 0) throw error(errc::precondition, "negative dimension");
  double max_abs = 0.0;
  for (const auto& t : triplets) {
    if (t.row < 0 || t.col < 0 || t.row >= n || t.col >= n)
      throw error(errc::index_out_of_range,
                  "(" + std::to_string(t.row) + "," + std::to_string(t.col) + ") for n=" +
                      std::to_string(n));
    max_abs = std::max(max_abs, std::abs(t.value));
  }

  // Sum duplicates per orientation, then reconcile the two triangles.
  struct Keyed {
    index_t lo, hi;
    bool upper;  // supplied with row < col
    double value;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(triplets.size());
  for (const auto& t : triplets) {
    keyed.push_back({std::min(t.row, t.col), std::max(t.row, t.col), t.row < t.col, t.value});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.hi != b.hi) return a.hi < b.hi;
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.upper < b.upper;
  });

  const double tol = 1e-12 * max_abs;
  std::vector<Triplet> entries;  // one per unordered pair, lo <= hi
  for (std::size_t p = 0; p < keyed.size();) {
    const index_t lo = keyed[p].lo, hi = keyed[p].hi;
    double lower = 0.0, upper = 0.0;
    bool has_lower = false, has_upper = false;
    for (; p < keyed.size() && keyed[p].lo == lo && keyed[p].hi == hi; ++p) {
      if (keyed[p].upper) {
        upper += keyed[p].value;
        has_upper = true;
      } else {
        lower += keyed[p].value;
        has_lower = true;
      }
    }
    double value;
    if (lo == hi) {
      value = lower;
    } else if (has_lower && has_upper) {
      if (std::abs(lower - upper) > tol)
        throw error(errc::asymmetric, "entries (" + std::to_string(hi) + "," + std::to_string(lo) +
                                          ") and its mirror differ");
      value = lower == upper ? lower : 0.5 * (lower + upper);
    } else {
      value = has_lower ? lower : upper;
    }
    if (value != 0.0) entries.push_back({hi, lo, value});
  }

  CscData d;
  d.n = n;
  d.col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& e : entries) {
    d.col_ptr[e.col + 1]++;
    if (e.row != e.col) d.col_ptr[e.row + 1]++;
  }
  for (index_t j = 0; j < n; ++j) d.col_ptr[j + 1] += d.col_ptr[j];
  d.row_idx.resize(static_cast<std::size_t>(d.col_ptr[n]));
  d.values.resize(d.row_idx.size());
  std::vector<offset_t> next(d.col_ptr.begin(), d.col_ptr.end() - 1);
  // `entries` is ordered by (hi, lo). Column c first receives its mirrored rows
  // lo < c (group hi == c), then the diagonal, then rows hi > c, so every
  // column comes out sorted without a second pass.
  for (const auto& e : entries) {
    if (e.row != e.col) {
      d.row_idx[next[e.row]] = e.col;
      d.values[next[e.row]++] = e.value;
    }
    d.row_idx[next[e.col]] = e.row;
    d.values[next[e.col]++] = e.value;
  }
  return from_csc_unchecked(std::move(d));
}

/// y = A * x
inline std::vector<double> matvec(const SparseSym& a, std::span<const double> x) {
  if (static_cast<index_t>(x.size()) != a.size())
    throw error(errc::dimension_mismatch, "matvec: x has " + std::to_string(x.size()) +
                                              " entries, matrix is " + std::to_string(a.size()));
  std::vector<double> y(x.size());
  const auto cp = a.col_ptr();
  const auto ri = a.row_idx();
  const auto va = a.values();
  // Symmetric storage: column j doubles as row j, so each y[j] is a dot product
  // with fixed summation order.
  for (index_t j = 0; j < a.size(); ++j) {
    double s = 0.0;
    for (offset_t p = cp[j]; p < cp[j + 1]; ++p) s += va[p] * x[ri[p]];
    y[j] = s;
  }
  return y;
}

/// result(i, j) = A(p.inverse(i), p.inverse(j))
inline SparseSym permute_sym(const SparseSym& a, const Perm& p) {
  if (p.size() != a.size()) throw error(errc::dimension_mismatch, "permute_sym");
  const index_t n = a.size();
  CscData d;
  d.n = n;
  d.col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (index_t j = 0; j < n; ++j)
    d.col_ptr[j + 1] = d.col_ptr[j] + static_cast<offset_t>(a.rows(p.inverse(j)).size());
  d.row_idx.resize(a.nnz());
  d.values.resize(a.nnz());
  std::vector<std::pair<index_t, double>> col;
  for (index_t j = 0; j < n; ++j) {
    const index_t old = p.inverse(j);
    auto r = a.rows(old);
    auto v = a.vals(old);
    col.clear();
    for (std::size_t q = 0; q < r.size(); ++q) col.emplace_back(p.forward(r[q]), v[q]);
    std::sort(col.begin(), col.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t q = 0; q < col.size(); ++q) {
      d.row_idx[d.col_ptr[j] + q] = col[q].first;
      d.values[d.col_ptr[j] + q] = col[q].second;
    }
  }
  return SparseSym::from_csc_unchecked(std::move(d));
}

/// Solves G x = b by forward substitution.
inline std::vector<double> solve_lower(const LowerTri& g, std::span<const double> b) {
  const index_t n = g.size();
  if (static_cast<index_t>(b.size()) != n) throw error(errc::dimension_mismatch, "solve_lower");
  std::vector<double> x(b.begin(), b.end());
  for (index_t j = 0; j < n; ++j) {
    auto r = g.rows(j);
    auto v = g.vals(j);
    const bool has_diag = !r.empty() && r[0] == j;
    if (!has_diag || !(v[0] > 0.0)) {
      if (j == n - 1 && g.singular_last()) {
        x[j] = 0.0;
        continue;
      }
      throw error(errc::zero_pivot, "column " + std::to_string(j) + " of lower factor");
    }
    x[j] /= v[0];
    const double xj = x[j];
    for (std::size_t p = 1; p < r.size(); ++p) x[r[p]] -= v[p] * xj;
  }
  return x;
}

/// Solves G^T x = b by backward substitution.
inline std::vector<double> solve_upper(const LowerTri& g, std::span<const double> b) {
  const index_t n = g.size();
  if (static_cast<index_t>(b.size()) != n) throw error(errc::dimension_mismatch, "solve_upper");
  std::vector<double> x(b.begin(), b.end());
  for (index_t j = n - 1; j >= 0; --j) {
    auto r = g.rows(j);
    auto v = g.vals(j);
    const bool has_diag = !r.empty() && r[0] == j;
    if (!has_diag || !(v[0] > 0.0)) {
      if (j == n - 1 && g.singular_last()) {
        x[j] = 0.0;
        continue;
      }
      throw error(errc::zero_pivot, "column " + std::to_string(j) + " of lower factor");
    }
    double s = x[j];
    for (std::size_t p = 1; p < r.size(); ++p) s -= v[p] * x[r[p]];
    x[j] = s / v[0];
  }
  return x;
}

struct Components {
  std::vector<index_t> labels;  // 0-based, dense, in order of first appearance
  index_t count = 0;
};

/// Connected components of the off-diagonal pattern (breadth-first, O(nnz)).
inline Components connected_components(const SparseSym& a) {
  const index_t n = a.size();
  Components c;
  c.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<index_t> queue;
  queue.reserve(static_cast<std::size_t>(n));
  for (index_t s = 0; s < n; ++s) {
    if (c.labels[s] != -1) continue;
    const index_t id = c.count++;
    c.labels[s] = id;
    queue.clear();
    queue.push_back(s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const index_t u = queue[head];
      for (index_t v : a.rows(u)) {
        if (c.labels[v] == -1) {
          c.labels[v] = id;
          queue.push_back(v);
        }
      }
    }
  }
  return c;
}

/// Dense helper used by tests and small oracles: row-major n x n copy.
inline std::vector<double> to_dense(const SparseSym& a) {
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<double> d(n * n, 0.0);
  for (index_t j = 0; j < a.size(); ++j) {
    auto r = a.rows(j);
    auto v = a.vals(j);
    for (std::size_t p = 0; p < r.size(); ++p) d[static_cast<std::size_t>(r[p]) * n + j] = v[p];
  }
  return d;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace rchol
