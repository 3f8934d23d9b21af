#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rchol/classify.hpp"
#include "rchol/elim_graph.hpp"
#include "rchol/error.hpp"
#include "rchol/ordering.hpp"
#include "rchol/rng.hpp"
#include "rchol/sampling.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

struct FactorMeta {
  std::uint64_t seed = 0;
  std::string ordering = "natural";
  int nd_levels = 0;
  int threads = 1;
  std::size_t merged_edges = 0;
  std::size_t dropped_edges = 0;
  double min_pivot = std::numeric_limits<double>::infinity();
  double max_diag = 0.0;
  double final_diag = 0.0;  // residual l_NN left by a Laplacian elimination
  double build_seconds = 0.0;
  std::size_t matrix_nnz = 0;
  bool f32 = false;
};

/// P^T A P ~= G G^T. `g` lives in permuted coordinates. A factor built
/// through the SDDM border extension keeps the extension row in `ext_row`
/// (column index in permuted coordinates, value).
struct CholFactor {
  Perm perm;
  LowerTri g;
  std::optional<std::vector<std::pair<index_t, double>>> ext_row;
  FactorMeta meta;

  index_t size() const { return g.size(); }
  /// Stored nonzeros of the computed factor, extension row included.
  std::size_t factor_nnz() const { return g.nnz() + (ext_row ? ext_row->size() : 0); }
  /// Twice the number of stored factor nonzeros.
  std::size_t fill() const { return 2 * factor_nnz(); }
  double fill_ratio() const {
    return meta.matrix_nnz ? static_cast<double>(fill()) / static_cast<double>(meta.matrix_nnz)
                           : 0.0;
  }

  void round_to_f32() {
    for (auto& v : g.mutable_data().values) v = static_cast<double>(static_cast<float>(v));
    if (ext_row)
      for (auto& e : *ext_row) e.second = static_cast<double>(static_cast<float>(e.second));
    meta.f32 = true;
  }
};

struct NoObserver {
  void operator()(index_t /*step*/, const ElimGraph& /*g*/, double /*pivot*/) const {}
};

namespace detail {

inline void require_irreducible_laplacian(const SparseSym& l) {
  const auto c = classify(l);
  if (c.kind != MatrixKind::laplacian)
    throw error(errc::precondition,
                std::string("randomized Cholesky expects a Laplacian, got ") + to_string(c.kind));
  if (!c.irreducible)
    throw error(errc::precondition, "randomized Cholesky expects an irreducible Laplacian");
}

/// Appends G(:,k) = L(:,k) / sqrt(l_kk) for the star of k in permuted coordinates.
inline void emit_column(CscData& g, index_t k, const Star& star) {
  const double root = std::sqrt(star.deg);
  g.row_idx.push_back(k);
  g.values.push_back(root);
  for (const auto& nb : star.neighbors) {
    g.row_idx.push_back(nb.id);
    g.values.push_back(-nb.weight / root);
  }
  g.col_ptr.push_back(static_cast<offset_t>(g.row_idx.size()));
}

}  // namespace detail

/// Sequential randomized Cholesky of an irreducible Laplacian.
///
/// Vertices are eliminated in the order given by `p`. Each step emits the
/// scaled column, removes the star and inserts a sampled spanning tree of its
/// clique, summing into existing edges. The last column is left empty. The
/// observer is called after every step with the step index, the graph and the
/// pivot.
template <class Observer = NoObserver>
CholFactor rchol_laplacian(const SparseSym& l, const Perm& p, RngStream& rng,
                           Observer&& observe = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (p.size() != l.size()) throw error(errc::dimension_mismatch, "permutation size");
  detail::require_irreducible_laplacian(l);
  const index_t n = l.size();

  CholFactor f;
  f.perm = p;
  f.meta.matrix_nnz = l.nnz();
  for (index_t j = 0; j < n; ++j) f.meta.max_diag = std::max(f.meta.max_diag, l.diag(j));

  ElimGraph g = ElimGraph::from_laplacian(permute_sym(l, p));
  CscData cols;
  cols.n = n;
  cols.col_ptr.reserve(static_cast<std::size_t>(n) + 1);
  cols.row_idx.reserve(3 * l.nnz());
  cols.values.reserve(3 * l.nnz());

  detail::SampleScratch scratch;
  EdgeList sampled;
  for (index_t k = 0; k + 1 < n; ++k) {
    Star star = g.remove_star(k);
    if (!(star.deg > 0.0))
      throw error(errc::zero_pivot, "nonpositive pivot at step " + std::to_string(k) +
                                        " of " + std::to_string(n));
    f.meta.min_pivot = std::min(f.meta.min_pivot, star.deg);
    detail::emit_column(cols, k, star);
    sampled.clear();
    detail::sample_clique_into(star.neighbors, star.deg, rng, scratch, sampled);
    for (const auto& e : sampled) g.add_edge(e.i, e.j, e.w);
    observe(k, static_cast<const ElimGraph&>(g), star.deg);
  }
  if (n > 0) {
    f.meta.final_diag = g.degree(n - 1);
    cols.col_ptr.push_back(static_cast<offset_t>(cols.row_idx.size()));
  }
  f.meta.merged_edges = g.merged_edges();
  f.meta.dropped_edges = g.dropped_edges();
  f.g = LowerTri::from_csc(std::move(cols), /*singular_last=*/true);
  f.meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return f;
}

/// Splits the factor of the border-extended matrix (extension vertex last)
/// into the leading block G1 and the extension row G2.
inline CholFactor extract_leading_block(CholFactor ext, const Perm& p_inner,
                                        std::size_t inner_nnz) {
  const index_t big = ext.g.size();
  const index_t n = big - 1;
  CscData d;
  d.n = n;
  std::vector<std::pair<index_t, double>> row;
  for (index_t j = 0; j < n; ++j) {
    auto r = ext.g.rows(j);
    auto v = ext.g.vals(j);
    for (std::size_t q = 0; q < r.size(); ++q) {
      if (r[q] == n) {
        row.emplace_back(j, v[q]);
      } else {
        d.row_idx.push_back(r[q]);
        d.values.push_back(v[q]);
      }
    }
    d.col_ptr.push_back(static_cast<offset_t>(d.row_idx.size()));
  }
  CholFactor f;
  f.perm = p_inner;
  f.g = LowerTri::from_csc(std::move(d), false);
  f.ext_row = std::move(row);
  f.meta = ext.meta;
  f.meta.matrix_nnz = inner_nnz;
  return f;
}

/// Appends the extension vertex n at the end of an ordering of {0..n-1}.
inline Perm pin_extension_last(const Perm& p) {
  std::vector<index_t> order = p.inverse();
  order.push_back(p.size());
  return Perm::from_order(std::move(order));
}

/// Randomized Cholesky of an SDDM matrix through its border extension.
/// Reducible inputs are accepted: the extension connects every component.
inline CholFactor rchol_sddm(const SparseSym& a, const Perm& p, RngStream& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  if (p.size() != a.size()) throw error(errc::dimension_mismatch, "permutation size");
  const SparseSym ext = extend_sddm(a);
  CholFactor big = rchol_laplacian(ext, pin_extension_last(p), rng);
  CholFactor f = extract_leading_block(std::move(big), p, a.nnz());
  f.meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return f;
}

inline CholFactor rchol_sddm(const SparseSym& a, const OrderingSpec& spec, RngStream& rng) {
  CholFactor f = rchol_sddm(a, compute_ordering(a, spec), rng);
  f.meta.ordering = to_string(spec.kind);
  f.meta.nd_levels = spec.kind == OrderingKind::nd ? spec.levels : 0;
  return f;
}

}  // namespace rchol
