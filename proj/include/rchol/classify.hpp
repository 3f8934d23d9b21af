#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rchol/error.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

enum class MatrixKind { laplacian, sddm, sdd_mixed, not_sdd };

/// S1: every row is exactly dominant. S2: at least one row is strictly dominant.
enum class Scenario { exactly_dominant, strictly_somewhere, not_applicable };

inline const char* to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::laplacian: return "Laplacian";
    case MatrixKind::sddm: return "SDDM";
    case MatrixKind::sdd_mixed: return "SDD-mixed";
    case MatrixKind::not_sdd: return "NotSDD";
  }
  return "?";
}

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::exactly_dominant: return "S1";
    case Scenario::strictly_somewhere: return "S2";
    case Scenario::not_applicable: return "not-applicable";
  }
  return "?";
}

struct MatrixClass {
  MatrixKind kind = MatrixKind::not_sdd;
  bool irreducible = false;
  Scenario scenario = Scenario::not_applicable;
  index_t components = 0;
  std::string reason;  // why a matrix is NotSDD, empty otherwise
};

inline constexpr double default_classify_tol = 1e-12;

/// Row-wise dominance tests with tolerance tol * sum_j |a_ij|.
///
/// A symmetric matrix with nonpositive off-diagonals that is dominant but has a
/// component without any strictly dominant row is singular and not a Laplacian
/// either; it is reported as NotSDD with a reason.
inline MatrixClass classify(const SparseSym& a, double tol = default_classify_tol) {
  const index_t n = a.size();
  MatrixClass out;
  const Components comp = connected_components(a);
  out.components = comp.count;
  out.irreducible = comp.count == 1;

  bool any_positive = false;
  bool all_exact = true;
  std::vector<char> component_strict(static_cast<std::size_t>(comp.count), 0);
  for (index_t i = 0; i < n; ++i) {
    auto r = a.rows(i);
    auto v = a.vals(i);
    double d = 0.0, off = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (r[p] == i) {
        d = v[p];
      } else {
        off += std::abs(v[p]);
        any_positive |= v[p] > 0.0;
      }
    }
    const double slack = tol * (std::abs(d) + off);
    if (d < off - slack || d < 0.0) {
      out.kind = MatrixKind::not_sdd;
      out.scenario = Scenario::not_applicable;
      out.reason = "row " + std::to_string(i + 1) + " is not diagonally dominant";
      return out;
    }
    if (d - off > slack) {
      component_strict[comp.labels[i]] = 1;
      all_exact = false;
    }
  }

  if (any_positive) {
    out.kind = MatrixKind::sdd_mixed;
    out.scenario = all_exact ? Scenario::exactly_dominant : Scenario::strictly_somewhere;
    return out;
  }
  if (all_exact) {
    out.kind = MatrixKind::laplacian;
    out.scenario = Scenario::exactly_dominant;
    return out;
  }
  for (index_t c = 0; c < comp.count; ++c) {
    if (!component_strict[c]) {
      out.kind = MatrixKind::not_sdd;
      out.scenario = Scenario::not_applicable;
      out.reason = "singular: a connected component has no strictly dominant row";
      return out;
    }
  }
  out.kind = MatrixKind::sddm;
  out.scenario = Scenario::strictly_somewhere;
  return out;
}

namespace detail {

inline void require_kind(const SparseSym& a, MatrixKind kind, const char* op) {
  const auto c = classify(a);
  if (c.kind != kind)
    throw error(errc::precondition, std::string(op) + " expects a " + to_string(kind) +
                                        " matrix, got " + to_string(c.kind));
}

}  // namespace detail

/// Border extension [[A, -A1], [-1^T A, 1^T A 1]] of an SDDM matrix; the
/// result is an irreducible Laplacian of size n+1. Row sums within the
/// classification tolerance of zero produce no border entry.
inline SparseSym extend_sddm(const SparseSym& a, double tol = default_classify_tol) {
  detail::require_kind(a, MatrixKind::sddm, "extend_sddm");
  const index_t n = a.size();
  std::vector<Triplet> t = a.triplets();
  t.reserve(t.size() + 2 * static_cast<std::size_t>(n) + 1);
  double corner = 0.0;
  for (index_t i = 0; i < n; ++i) {
    double sum = 0.0, scale = 0.0;
    for (double v : a.vals(i)) {
      sum += v;
      scale += std::abs(v);
    }
    if (sum <= tol * scale) continue;
    t.push_back({i, n, -sum});
    t.push_back({n, i, -sum});
    corner += sum;
  }
  t.push_back({n, n, corner});
  return SparseSym::from_coo(t, n + 1);
}

struct SplitParts {
  SparseSym diagonal;
  SparseSym negative;
  SparseSym positive;
};

/// Exact partition A = Ad + An + Ap by position and sign.
inline SplitParts split_parts(const SparseSym& a) {
  std::vector<Triplet> d, neg, pos;
  for (const auto& t : a.triplets()) {
    if (t.row == t.col)
      d.push_back(t);
    else if (t.value < 0.0)
      neg.push_back(t);
    else
      pos.push_back(t);
  }
  return {SparseSym::from_coo(d, a.size()), SparseSym::from_coo(neg, a.size()),
          SparseSym::from_coo(pos, a.size())};
}

/// [[Ad+An, -Ap], [-Ap, Ad+An]] for an SDD matrix with positive off-diagonals.
inline SparseSym double_sdd(const SparseSym& a) {
  detail::require_kind(a, MatrixKind::sdd_mixed, "double_sdd");
  const index_t n = a.size();
  std::vector<Triplet> t;
  t.reserve(2 * a.nnz());
  for (const auto& e : a.triplets()) {
    if (e.row == e.col || e.value < 0.0) {
      t.push_back(e);
      t.push_back({e.row + n, e.col + n, e.value});
    } else {
      t.push_back({e.row, e.col + n, -e.value});
      t.push_back({e.row + n, e.col, -e.value});
    }
  }
  return SparseSym::from_coo(t, 2 * n);
}

struct SignFlip {
  SparseSym reduced;             // D A D, nonpositive off-diagonals
  std::vector<index_t> flipped;  // indices where D = -1, ascending
};

/// Removes positive off-diagonals by a diagonal +-1 similarity when the doubled
/// graph splits into exactly two mirror components. Returns nullopt otherwise.
inline std::optional<SignFlip> sign_flip_reduction(const SparseSym& a) {
  detail::require_kind(a, MatrixKind::sdd_mixed, "sign_flip_reduction");
  const index_t n = a.size();
  // Node i is the first copy, i + n the second. Negative entries connect equal
  // copies, positive entries connect opposite copies.
  std::vector<index_t> label(2 * static_cast<std::size_t>(n), -1);
  std::vector<index_t> queue;
  index_t count = 0;
  for (index_t s = 0; s < 2 * n; ++s) {
    if (label[s] != -1) continue;
    const index_t id = count++;
    label[s] = id;
    queue.assign(1, s);
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const index_t u = queue[h];
      const index_t base = u % n;
      const index_t copy = u / n;
      auto r = a.rows(base);
      auto v = a.vals(base);
      for (std::size_t p = 0; p < r.size(); ++p) {
        if (r[p] == base) continue;
        const index_t w = v[p] < 0.0 ? r[p] + copy * n : r[p] + (1 - copy) * n;
        if (label[w] == -1) {
          label[w] = id;
          queue.push_back(w);
        }
      }
    }
  }
  if (count != 2) return std::nullopt;
  SignFlip out;
  std::vector<double> sign(static_cast<std::size_t>(n), 1.0);
  for (index_t i = 0; i < n; ++i) {
    if (label[i] == label[i + n]) return std::nullopt;
    if (label[i] != label[0]) {
      sign[i] = -1.0;
      out.flipped.push_back(i);
    }
  }
  CscData d = a.data();
  for (index_t j = 0; j < n; ++j)
    for (offset_t p = d.col_ptr[j]; p < d.col_ptr[j + 1]; ++p)
      d.values[p] *= sign[d.row_idx[p]] * sign[j];
  out.reduced = SparseSym::from_csc_unchecked(std::move(d));
  return out;
}

/// Raises every diagonal that falls short of its absolute off-diagonal row sum.
inline SparseSym compensate_diagonal(const SparseSym& a) {
  std::vector<Triplet> t;
  t.reserve(a.nnz() + static_cast<std::size_t>(a.size()));
  for (index_t j = 0; j < a.size(); ++j) {
    auto r = a.rows(j);
    auto v = a.vals(j);
    double off = 0.0, d = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (r[p] == j)
        d = v[p];
      else {
        off += std::abs(v[p]);
        t.push_back({r[p], j, v[p]});
      }
    }
    t.push_back({j, j, std::max(d, off)});
  }
  return SparseSym::from_coo(t, a.size());
}

/// Drops positive off-diagonals a_ij <= rel * min(a_ii, a_jj).
inline SparseSym drop_small_positive(const SparseSym& a, double rel) {
  std::vector<Triplet> t;
  t.reserve(a.nnz());
  for (const auto& e : a.triplets()) {
    if (e.row != e.col && e.value > 0.0 &&
        e.value <= rel * std::min(a.diag(e.row), a.diag(e.col)))
      continue;
    t.push_back(e);
  }
  return SparseSym::from_coo(t, a.size());
}

}  // namespace rchol
