#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rchol/error.hpp"
#include "rchol/rng.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

struct Neighbor {
  index_t id;
  double weight;  // |l_ki| > 0
};

/// The column being eliminated: vertex k, its neighbors and l_kk.
struct Star {
  index_t k = 0;
  std::vector<Neighbor> neighbors;
  double deg = 0.0;
};

struct Edge {
  index_t i;
  index_t j;
  double w;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Graph Laplacian sum_{(i,j,w)} w * b_ij b_ij^T, stored as its edges.
using EdgeList = std::vector<Edge>;

namespace detail {

inline void check_star(const Star& star) {
  double sum = 0.0;
  for (const auto& nb : star.neighbors) {
    if (!(nb.weight > 0.0))
      throw error(errc::precondition, "star of " + std::to_string(star.k) +
                                          " has a nonpositive weight");
    if (nb.id == star.k) throw error(errc::precondition, "star lists its own center");
    sum += nb.weight;
  }
  std::vector<index_t> ids;
  ids.reserve(star.neighbors.size());
  for (const auto& nb : star.neighbors) ids.push_back(nb.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw error(errc::precondition, "star has repeated neighbors");
  if (!star.neighbors.empty() && std::abs(sum - star.deg) > 1e-12 * std::max(sum, star.deg))
    throw error(errc::precondition, "star degree " + std::to_string(star.deg) +
                                        " does not match its weight sum " + std::to_string(sum));
}

/// Scratch buffers reused across eliminations.
struct SampleScratch {
  std::vector<Neighbor> sorted;
  std::vector<double> suffix;
};

/// Clique sampling kernel. Appends exactly max(n-1, 0) edges to `out`.
///
/// Neighbors are visited in ascending weight order (ties by id). Visiting i
/// leaves the suffix after i; a partner j is drawn from that suffix with
/// probability w_j / S where S is the suffix weight, and the edge gets weight
/// S * w_i / deg. Suffix sums are accumulated once from the heavy end, so S is
/// exact to rounding at every step and each draw is a binary search.
inline void sample_clique_into(std::span<const Neighbor> neighbors, double deg, RngStream& rng,
                               SampleScratch& scratch, EdgeList& out) {
  const std::size_t n = neighbors.size();
  if (n < 2) return;
  auto& s = scratch.sorted;
  s.assign(neighbors.begin(), neighbors.end());
  std::sort(s.begin(), s.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.weight != b.weight ? a.weight < b.weight : a.id < b.id;
  });
  auto& suf = scratch.suffix;
  suf.assign(n + 1, 0.0);
  for (std::size_t t = n; t-- > 0;) suf[t] = suf[t + 1] + s[t].weight;

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double remaining = suf[i + 1];
    std::size_t j = n - 1;
    if (i + 2 < n) {
      // smallest j in [i+1, n-1] with suf[j+1] < (1-u) * remaining
      const double threshold = (1.0 - rng.uniform()) * remaining;
      std::size_t lo = i + 1, hi = n - 1;
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (suf[mid + 1] < threshold)
          hi = mid;
        else
          lo = mid + 1;
      }
      j = lo;
    }
    const index_t a = s[i].id, b = s[j].id;
    out.push_back({std::min(a, b), std::max(a, b), remaining * s[i].weight / deg});
  }
}

}  // namespace detail

/// Sums repeated unordered pairs in input order; output sorted by (i, j) with i < j.
inline EdgeList merge_duplicates(EdgeList edges) {
  for (auto& e : edges)
    if (e.i > e.j) std::swap(e.i, e.j);
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  EdgeList out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    if (!out.empty() && out.back().i == e.i && out.back().j == e.j)
      out.back().w += e.w;
    else
      out.push_back(e);
  }
  return out;
}

/// Randomized spanning-tree sample of the elimination clique of `star`.
///
/// Produces max(n-1, 0) edges forming a spanning tree on the neighbors whose
/// Laplacian equals the exact clique in expectation.
inline EdgeList sample_clique(const Star& star, RngStream& rng) {
  detail::check_star(star);
  detail::SampleScratch scratch;
  EdgeList out;
  out.reserve(star.neighbors.size());
  detail::sample_clique_into(star.neighbors, star.deg, rng, scratch, out);
  return merge_duplicates(std::move(out));
}

/// The exact elimination clique: w_i * w_j / deg on every pair of neighbors.
inline EdgeList exact_clique(const Star& star) {
  detail::check_star(star);
  EdgeList out;
  const auto& nb = star.neighbors;
  for (std::size_t a = 0; a < nb.size(); ++a)
    for (std::size_t b = a + 1; b < nb.size(); ++b)
      out.push_back({std::min(nb[a].id, nb[b].id), std::max(nb[a].id, nb[b].id),
                     nb[a].weight * nb[b].weight / star.deg});
  return merge_duplicates(std::move(out));
}

}  // namespace rchol
