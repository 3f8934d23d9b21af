#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "rchol/error.hpp"
#include "rchol/sampling.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

/// Weighted adjacency holding the evolving Schur complement of a Laplacian.
///
/// Each vertex keeps its neighbors sorted by id with weight w = -l_ij > 0.
/// Inserts and deletes are applied to both endpoints immediately. The diagonal
/// l_kk is implied by the weights; `degree()` is an incrementally maintained
/// cache of it.
class ElimGraph {
 public:
  ElimGraph() = default;

  ElimGraph(index_t n, std::span<const Edge> edges)
      : adj_(static_cast<std::size_t>(n)), degree_(static_cast<std::size_t>(n), 0.0),
        alive_(static_cast<std::size_t>(n), 1) {
    for (const auto& e : edges) add_edge(e.i, e.j, e.w);
    merged_ = 0;
  }

  /// Off-diagonal graph of a Laplacian. Positive off-diagonals are rejected.
  static ElimGraph from_laplacian(const SparseSym& l) {
    ElimGraph g;
    const index_t n = l.size();
    g.adj_.resize(static_cast<std::size_t>(n));
    g.degree_.assign(static_cast<std::size_t>(n), 0.0);
    g.alive_.assign(static_cast<std::size_t>(n), 1);
    for (index_t j = 0; j < n; ++j) {
      auto r = l.rows(j);
      auto v = l.vals(j);
      auto& list = g.adj_[j];
      list.reserve(r.size());
      for (std::size_t p = 0; p < r.size(); ++p) {
        if (r[p] == j) continue;
        if (v[p] > 0.0)
          throw error(errc::precondition, "positive off-diagonal in Laplacian input");
        list.push_back({r[p], -v[p]});
        g.degree_[j] -= v[p];
      }
      g.edges_ += list.size();
    }
    g.edges_ /= 2;
    return g;
  }

  index_t size() const { return static_cast<index_t>(adj_.size()); }
  bool alive(index_t k) const { return alive_[k] != 0; }
  std::span<const Neighbor> neighbors(index_t k) const { return adj_[k]; }
  double degree(index_t k) const { return degree_[k]; }

  /// Live (distinct) edges.
  std::size_t edge_count() const { return edges_; }
  /// Number of inserted edges that landed on an existing edge and were summed.
  std::size_t merged_edges() const { return merged_; }
  std::size_t dropped_edges() const { return dropped_; }

  /// Detaches vertex k with all of its edges and returns its star. The
  /// returned degree is the exact weight sum of the removed edges.
  Star remove_star(index_t k) {
    Star s;
    s.k = k;
    s.neighbors = std::move(adj_[k]);
    adj_[k] = {};
    double sum = 0.0;
    for (const auto& nb : s.neighbors) {
      sum += nb.weight;
      auto& other = adj_[nb.id];
      auto it = find(other, k);
      other.erase(it);
      degree_[nb.id] -= nb.weight;
    }
    s.deg = sum;
    edges_ -= s.neighbors.size();
    degree_[k] = 0.0;
    alive_[k] = 0;
    return s;
  }

  /// Adds w to edge (i, j), creating it if needed. Nonpositive results are
  /// dropped from both endpoints.
  void add_edge(index_t i, index_t j, double w) {
    if (i == j) return;
    auto& ai = adj_[i];
    auto it = lower(ai, j);
    if (it != ai.end() && it->id == j) {
      ++merged_;
      it->weight += w;
      auto jt = find(adj_[j], i);
      jt->weight += w;
      degree_[i] += w;
      degree_[j] += w;
      if (!(it->weight > 0.0)) {
        degree_[i] -= it->weight;
        degree_[j] -= it->weight;
        ai.erase(it);
        adj_[j].erase(jt);
        --edges_;
        ++dropped_;
      }
      return;
    }
    if (!(w > 0.0)) {
      ++dropped_;
      return;
    }
    ai.insert(it, {j, w});
    auto& aj = adj_[j];
    aj.insert(lower(aj, i), {i, w});
    degree_[i] += w;
    degree_[j] += w;
    ++edges_;
  }

  /// Remaining edges as (i < j) triplets.
  EdgeList edges() const {
    EdgeList out;
    for (index_t i = 0; i < size(); ++i)
      for (const auto& nb : adj_[i])
        if (i < nb.id) out.push_back({i, nb.id, nb.weight});
    return out;
  }

 private:
  using List = std::vector<Neighbor>;

  static List::iterator lower(List& l, index_t id) {
    return std::lower_bound(l.begin(), l.end(), id,
                            [](const Neighbor& nb, index_t x) { return nb.id < x; });
  }
  static List::iterator find(List& l, index_t id) {
    auto it = lower(l, id);
    if (it == l.end() || it->id != id)
      throw error(errc::precondition, "elimination graph lost symmetry at vertex " +
                                          std::to_string(id));
    return it;
  }

  std::vector<List> adj_;
  std::vector<double> degree_;
  std::vector<char> alive_;
  std::size_t edges_ = 0;
  std::size_t merged_ = 0;
  std::size_t dropped_ = 0;
};

/// Live edge count of the Schur-complement graph.
inline std::size_t schur_edge_count(const ElimGraph& g) { return g.edge_count(); }

}  // namespace rchol
