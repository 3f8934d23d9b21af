#pragma once

// Test-only generators and dense reference computations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "rchol/rchol.hpp"

namespace testsupport {

using rchol::index_t;
using rchol::SparseSym;
using rchol::Triplet;

struct Dense {
  index_t n = 0;
  std::vector<double> a;  // row-major
  double& operator()(index_t i, index_t j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(index_t i, index_t j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

inline Dense dense(const SparseSym& s) {
  Dense d{s.size(), std::vector<double>(static_cast<std::size_t>(s.size()) * s.size(), 0.0)};
  for (index_t j = 0; j < s.size(); ++j) {
    auto r = s.rows(j);
    auto v = s.vals(j);
    for (std::size_t p = 0; p < r.size(); ++p) d(r[p], j) = v[p];
  }
  return d;
}

/// G G^T from the stored lower factor.
inline Dense gram(const rchol::LowerTri& g) {
  const index_t n = g.size();
  Dense col{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (index_t j = 0; j < n; ++j) {
    auto r = g.rows(j);
    auto v = g.vals(j);
    for (std::size_t p = 0; p < r.size(); ++p) col(r[p], j) = v[p];
  }
  Dense out{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (index_t k = 0; k < n; ++k) s += col(i, k) * col(j, k);
      out(i, j) = s;
    }
  return out;
}

inline double frobenius_diff(const Dense& x, const Dense& y) {
  double s = 0.0;
  for (std::size_t q = 0; q < x.a.size(); ++q) s += (x.a[q] - y.a[q]) * (x.a[q] - y.a[q]);
  return std::sqrt(s);
}

inline double frobenius(const Dense& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

/// Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(Dense m, std::vector<double> b) {
  const index_t n = m.n;
  for (index_t k = 0; k < n; ++k) {
    index_t piv = k;
    for (index_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
    if (piv != k) {
      for (index_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (index_t i = k + 1; i < n; ++i) {
      const double f = m(i, k) / m(k, k);
      if (f == 0.0) continue;
      for (index_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(static_cast<std::size_t>(n));
  for (index_t i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (index_t j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
    x[i] = s / m(i, i);
  }
  return x;
}

/// Dense Cholesky; returns the lower factor row-major.
inline Dense dense_cholesky(const Dense& m) {
  const index_t n = m.n;
  Dense l{n, std::vector<double>(m.a.size(), 0.0)};
  for (index_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (index_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    l(j, j) = std::sqrt(d);
    for (index_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (index_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

struct UnionFind {
  std::vector<index_t> parent;
  explicit UnionFind(index_t n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  index_t find(index_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(index_t a, index_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Generators

/// Laplacian of a weighted edge list (0-based, i != j).
inline SparseSym laplacian(index_t n, const std::vector<rchol::Edge>& edges) {
  std::vector<Triplet> t;
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : edges) {
    t.push_back({std::max(e.i, e.j), std::min(e.i, e.j), -e.w});
    deg[e.i] += e.w;
    deg[e.j] += e.w;
  }
  for (index_t i = 0; i < n; ++i) t.push_back({i, i, deg[i]});
  return SparseSym::from_coo(t, n);
}

inline SparseSym path_laplacian(index_t n, double w = 1.0) {
  std::vector<rchol::Edge> e;
  for (index_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, w});
  return laplacian(n, e);
}

/// Random connected simple graph: a random spanning tree plus `extra` edges,
/// weights uniform in (0, 1].
inline std::vector<rchol::Edge> random_connected_edges(index_t n, std::size_t extra,
                                                       std::mt19937_64& gen) {
  std::uniform_real_distribution<double> w(0.0, 1.0);
  std::vector<index_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);
  std::set<std::pair<index_t, index_t>> seen;
  std::vector<rchol::Edge> edges;
  auto add = [&](index_t a, index_t b) {
    if (a == b) return;
    auto key = std::minmax(a, b);
    if (!seen.insert({key.first, key.second}).second) return;
    edges.push_back({key.first, key.second, 1.0 - w(gen)});
  };
  for (index_t q = 1; q < n; ++q) {
    std::uniform_int_distribution<index_t> pick(0, q - 1);
    add(order[q], order[pick(gen)]);
  }
  if (n > 1) {
    std::uniform_int_distribution<index_t> any(0, n - 1);
    const std::size_t max_edges = static_cast<std::size_t>(n) * (n - 1) / 2;
    const std::size_t target = std::min(max_edges, edges.size() + extra);
    while (edges.size() < target) add(any(gen), any(gen));
  }
  return edges;
}

inline SparseSym random_connected_laplacian(index_t n, std::size_t extra, std::mt19937_64& gen) {
  return laplacian(n, random_connected_edges(n, extra, gen));
}

/// SDD matrix with the given signed off-diagonal pattern. Each diagonal is the
/// absolute off-diagonal row sum times (1 + slack_i).
inline SparseSym sdd_from_signed(index_t n, const std::vector<rchol::Edge>& edges,
                                 const std::vector<int>& sign, const std::vector<double>& slack) {
  std::vector<Triplet> t;
  std::vector<double> off(static_cast<std::size_t>(n), 0.0);
  for (std::size_t q = 0; q < edges.size(); ++q) {
    const auto& e = edges[q];
    t.push_back({std::max(e.i, e.j), std::min(e.i, e.j), sign[q] * e.w});
    off[e.i] += e.w;
    off[e.j] += e.w;
  }
  for (index_t i = 0; i < n; ++i) t.push_back({i, i, off[i] * (1.0 + slack[i])});
  return SparseSym::from_coo(t, n);
}

/// Irreducible SDD-mixed matrix whose positive pattern contains a positive
/// triangle, so no sign similarity removes the positives. With `exact` every
/// row is exactly dominant; otherwise a random subset is strictly dominant.
inline SparseSym odd_cycle_sdd(index_t n, std::mt19937_64& gen, bool exact) {
  auto edges = random_connected_edges(n, static_cast<std::size_t>(2 * n), gen);
  std::set<std::pair<index_t, index_t>> have;
  for (const auto& e : edges) have.insert({e.i, e.j});
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (auto [a, b] : {std::pair<index_t, index_t>{0, 1}, {1, 2}, {0, 2}})
    if (!have.count({a, b})) edges.push_back({a, b, 1.0 - w(gen)});
  std::vector<int> sign(edges.size());
  std::bernoulli_distribution coin(0.5);
  for (std::size_t q = 0; q < edges.size(); ++q) {
    const auto& e = edges[q];
    const bool triangle = e.i <= 2 && e.j <= 2;
    sign[q] = triangle || coin(gen) ? 1 : -1;
  }
  std::vector<double> slack(static_cast<std::size_t>(n), 0.0);
  if (!exact) {
    std::bernoulli_distribution strict(0.1);
    for (auto& s : slack) s = strict(gen) ? 0.05 + 0.5 * w(gen) : 0.0;
    slack[0] = 0.1;
  }
  return sdd_from_signed(n, edges, sign, slack);
}

/// Irreducible SDD-mixed matrix that a +-1 similarity turns into an SDDM
/// matrix: positives exactly on edges between the two sides of a random
/// labelling. Every row is strictly dominant by 5% to 55%.
inline SparseSym signable_sdd(index_t n, std::mt19937_64& gen, std::vector<int>* labels_out = nullptr) {
  auto edges = random_connected_edges(n, static_cast<std::size_t>(2 * n), gen);
  std::bernoulli_distribution coin(0.5);
  std::vector<int> label(static_cast<std::size_t>(n));
  for (auto& l : label) l = coin(gen) ? 1 : -1;
  label[0] = 1;
  label[1] = -1;
  if (!std::any_of(edges.begin(), edges.end(), [&](const rchol::Edge& e) {
        return label[e.i] != label[e.j];
      }))
    edges.push_back({0, 1, 0.5});
  std::vector<int> sign(edges.size());
  for (std::size_t q = 0; q < edges.size(); ++q)
    sign[q] = label[edges[q].i] != label[edges[q].j] ? 1 : -1;
  std::uniform_real_distribution<double> w(0.0, 1.0);
  std::vector<double> slack(static_cast<std::size_t>(n));
  for (auto& s : slack) s = 0.05 + 0.5 * w(gen);
  if (labels_out) *labels_out = label;
  return sdd_from_signed(n, edges, sign, slack);
}

inline std::vector<double> uniform_vector(index_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = u(gen);
  return v;
}

inline double rel_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double d = 0.0, s = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    d += (x[q] - y[q]) * (x[q] - y[q]);
    s += y[q] * y[q];
  }
  return std::sqrt(d / s);
}

}  // namespace testsupport
