#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rchol/error.hpp"
#include "rchol/rng.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

/// Off-diagonal adjacency pattern in compressed-row form.
struct Graph {
  index_t n = 0;
  std::vector<offset_t> ptr{0};
  std::vector<index_t> adj;

  std::span<const index_t> neighbors(index_t v) const {
    return {adj.data() + ptr[v], static_cast<std::size_t>(ptr[v + 1] - ptr[v])};
  }
  index_t degree(index_t v) const { return static_cast<index_t>(ptr[v + 1] - ptr[v]); }

  static Graph from_matrix(const SparseSym& a) {
    Graph g;
    g.n = a.size();
    g.ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
    g.adj.reserve(a.nnz());
    for (index_t j = 0; j < g.n; ++j) {
      for (index_t r : a.rows(j))
        if (r != j) g.adj.push_back(r);
      g.ptr[j + 1] = static_cast<offset_t>(g.adj.size());
    }
    return g;
  }

  /// Subgraph induced by `vertices`; local vertex k corresponds to vertices[k].
  Graph induced(std::span<const index_t> vertices, std::vector<index_t>& scratch) const {
    scratch.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < vertices.size(); ++k)
      scratch[vertices[k]] = static_cast<index_t>(k);
    Graph s;
    s.n = static_cast<index_t>(vertices.size());
    s.ptr.assign(vertices.size() + 1, 0);
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      for (index_t u : neighbors(vertices[k]))
        if (scratch[u] >= 0) s.adj.push_back(scratch[u]);
      s.ptr[k + 1] = static_cast<offset_t>(s.adj.size());
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Minimum degree

/// Exact minimum-degree elimination order on a quotient graph.
///
/// Eliminated vertices become elements; a variable's degree is the total
/// weight of the variables reachable through its elements and remaining
/// edges. Indistinguishable variables adjacent to a new element are merged
/// into supervariables and eliminated together. Ties go to the smallest id.
inline std::vector<index_t> mindeg_order(const Graph& g) {
  const index_t n = g.n;
  enum : char { kVar, kElem, kGone };
  std::vector<char> status(static_cast<std::size_t>(n), kVar);
  std::vector<index_t> nv(static_cast<std::size_t>(n), 1);
  std::vector<std::vector<index_t>> elems(static_cast<std::size_t>(n));
  std::vector<std::vector<index_t>> vars(static_cast<std::size_t>(n));
  std::vector<std::vector<index_t>> reach(static_cast<std::size_t>(n));  // element lists
  std::vector<std::vector<index_t>> members(static_cast<std::size_t>(n));
  std::vector<index_t> deg(static_cast<std::size_t>(n));
  std::vector<std::int64_t> mark(static_cast<std::size_t>(n), -1);
  std::int64_t stamp = 0;

  std::set<std::pair<index_t, index_t>> queue;
  for (index_t i = 0; i < n; ++i) {
    auto nb = g.neighbors(i);
    vars[i].assign(nb.begin(), nb.end());
    std::sort(vars[i].begin(), vars[i].end());
    vars[i].erase(std::unique(vars[i].begin(), vars[i].end()), vars[i].end());
    deg[i] = static_cast<index_t>(vars[i].size());
    queue.insert({deg[i], i});
  }
  auto key = [&](index_t i) { return std::pair<index_t, index_t>{deg[i] + nv[i] - 1, i}; };

  std::vector<index_t> order;
  order.reserve(static_cast<std::size_t>(n));
  std::vector<index_t> lp;
  std::vector<std::pair<std::uint64_t, index_t>> hashed;

  while (!queue.empty()) {
    const index_t p = queue.begin()->second;
    queue.erase(queue.begin());
    order.push_back(p);
    std::sort(members[p].begin(), members[p].end());
    order.insert(order.end(), members[p].begin(), members[p].end());

    // New element p: the union of its absorbed elements and its variables.
    ++stamp;
    mark[p] = stamp;
    lp.clear();
    for (index_t e : elems[p]) {
      if (status[e] != kElem) continue;
      for (index_t v : reach[e])
        if (status[v] == kVar && mark[v] != stamp) {
          mark[v] = stamp;
          lp.push_back(v);
        }
      status[e] = kGone;
      std::vector<index_t>().swap(reach[e]);
    }
    for (index_t v : vars[p])
      if (status[v] == kVar && mark[v] != stamp) {
        mark[v] = stamp;
        lp.push_back(v);
      }
    status[p] = kElem;
    std::vector<index_t>().swap(elems[p]);
    std::vector<index_t>().swap(vars[p]);
    std::vector<index_t>().swap(members[p]);
    std::sort(lp.begin(), lp.end());
    for (index_t i : lp) queue.erase(key(i));

    // Absorbed elements leave, p joins; edges inside Lp are now implied by p.
    for (index_t i : lp) {
      auto& ei = elems[i];
      ei.erase(std::remove_if(ei.begin(), ei.end(), [&](index_t e) { return status[e] != kElem; }),
               ei.end());
      ei.insert(std::lower_bound(ei.begin(), ei.end(), p), p);
      auto& ai = vars[i];
      ai.erase(std::remove_if(ai.begin(), ai.end(),
                              [&](index_t v) { return status[v] != kVar || mark[v] == stamp; }),
               ai.end());
    }

    // Supervariable detection: equal element and variable lists.
    hashed.clear();
    for (index_t i : lp) {
      std::uint64_t h = elems[i].size() * 0x9E3779B97F4A7C15ull + vars[i].size();
      for (index_t e : elems[i]) h += splitmix64(static_cast<std::uint64_t>(e));
      for (index_t v : vars[i]) h += splitmix64(static_cast<std::uint64_t>(v) + 0x5bd1e995ull);
      hashed.emplace_back(h, i);
    }
    std::sort(hashed.begin(), hashed.end());
    for (std::size_t a = 0; a < hashed.size();) {
      std::size_t b = a;
      while (b < hashed.size() && hashed[b].first == hashed[a].first) ++b;
      for (std::size_t x = a; x < b; ++x) {
        const index_t i = hashed[x].second;
        if (status[i] != kVar) continue;
        for (std::size_t y = x + 1; y < b; ++y) {
          const index_t j = hashed[y].second;
          if (status[j] != kVar || elems[i] != elems[j] || vars[i] != vars[j]) continue;
          nv[i] += nv[j];
          nv[j] = 0;
          status[j] = kGone;
          members[i].push_back(j);
          members[i].insert(members[i].end(), members[j].begin(), members[j].end());
          std::vector<index_t>().swap(members[j]);
          std::vector<index_t>().swap(elems[j]);
          std::vector<index_t>().swap(vars[j]);
        }
      }
      a = b;
    }
    lp.erase(std::remove_if(lp.begin(), lp.end(), [&](index_t v) { return status[v] != kVar; }),
             lp.end());
    reach[p] = lp;

    // Exact external degrees of the variables touched by p.
    for (index_t i : lp) {
      ++stamp;
      mark[i] = stamp;
      index_t d = 0;
      for (index_t e : elems[i]) {
        auto& le = reach[e];
        le.erase(std::remove_if(le.begin(), le.end(), [&](index_t v) { return status[v] != kVar; }),
                 le.end());
        for (index_t v : le)
          if (mark[v] != stamp) {
            mark[v] = stamp;
            d += nv[v];
          }
      }
      auto& ai = vars[i];
      ai.erase(std::remove_if(ai.begin(), ai.end(), [&](index_t v) { return status[v] != kVar; }),
               ai.end());
      for (index_t v : ai)
        if (mark[v] != stamp) {
          mark[v] = stamp;
          d += nv[v];
        }
      deg[i] = d;
      queue.insert(key(i));
    }
  }
  return order;
}

inline Perm mindeg_order(const SparseSym& a) {
  return Perm::from_order(mindeg_order(Graph::from_matrix(a)));
}

// ---------------------------------------------------------------------------
// Bisection and nested dissection

struct Bisection {
  std::vector<index_t> left;
  std::vector<index_t> right;
  std::vector<index_t> separator;
};

inline constexpr double default_balance = 0.6;

namespace detail {

inline std::vector<index_t> bfs_order(const Graph& g, index_t start, std::vector<index_t>& level) {
  level.assign(static_cast<std::size_t>(g.n), -1);
  std::vector<index_t> order{start};
  level[start] = 0;
  for (std::size_t h = 0; h < order.size(); ++h) {
    const index_t u = order[h];
    for (index_t v : g.neighbors(u))
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        order.push_back(v);
      }
  }
  return order;
}

/// George-Liu pseudo-peripheral vertex search.
inline index_t pseudo_peripheral(const Graph& g, index_t start) {
  std::vector<index_t> level;
  index_t current = start;
  index_t ecc = -1;
  for (int iter = 0; iter < 16; ++iter) {
    auto order = bfs_order(g, current, level);
    const index_t depth = level[order.back()];
    if (depth <= ecc) break;
    ecc = depth;
    index_t best = order.back();
    for (auto it = order.rbegin(); it != order.rend() && level[*it] == depth; ++it)
      if (g.degree(*it) < g.degree(best) || (g.degree(*it) == g.degree(best) && *it < best))
        best = *it;
    current = best;
  }
  return current;
}

inline std::vector<std::vector<index_t>> components(const Graph& g) {
  std::vector<index_t> label(static_cast<std::size_t>(g.n), -1);
  std::vector<std::vector<index_t>> out;
  for (index_t s = 0; s < g.n; ++s) {
    if (label[s] >= 0) continue;
    const auto id = static_cast<index_t>(out.size());
    std::vector<index_t> comp{s};
    label[s] = id;
    for (std::size_t h = 0; h < comp.size(); ++h)
      for (index_t v : g.neighbors(comp[h]))
        if (label[v] < 0) {
          label[v] = id;
          comp.push_back(v);
        }
    out.push_back(std::move(comp));
  }
  return out;
}

inline bool balanced(std::size_t l, std::size_t r, double balance) {
  return static_cast<double>(std::max(l, r)) <= balance * static_cast<double>(l + r);
}

/// Level-set bisection of a connected graph.
inline Bisection bisect_connected(const Graph& g, double balance) {
  const index_t n = g.n;
  Bisection best;
  if (n <= 1) {
    if (n == 1) best.left = {0};
    return best;
  }
  std::vector<index_t> level;
  const auto order = bfs_order(g, pseudo_peripheral(g, 0), level);
  std::vector<index_t> pos(static_cast<std::size_t>(n));
  for (index_t k = 0; k < n; ++k) pos[order[k]] = k;

  bool have = false;
  bool best_ok = false;
  std::size_t best_sep = 0;
  double best_gap = 0.0;
  // 0 = left, 1 = right, 2 = separator
  std::vector<char> side(static_cast<std::size_t>(n));
  const double fractions[] = {0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65, 0.3, 0.7};
  for (double f : fractions) {
    const auto cut = std::clamp<index_t>(static_cast<index_t>(std::lround(f * n)), 1, n - 1);
    for (int from = 0; from < 2; ++from) {
      for (index_t v = 0; v < n; ++v) side[v] = pos[v] < cut ? 0 : 1;
      // Endpoints of cut edges on side `from` form the separator.
      std::vector<index_t> sep;
      for (index_t v = 0; v < n; ++v) {
        if (side[v] != from) continue;
        for (index_t u : g.neighbors(v))
          if (side[u] == 1 - from) {
            sep.push_back(v);
            break;
          }
      }
      for (index_t v : sep) side[v] = 2;
      // A separator vertex with no neighbor left on its own side can join the
      // opposite side.
      std::size_t kept = 0;
      for (index_t v : sep) {
        bool touches_own = false;
        for (index_t u : g.neighbors(v))
          if (side[u] == from) {
            touches_own = true;
            break;
          }
        if (!touches_own)
          side[v] = static_cast<char>(1 - from);
        else
          sep[kept++] = v;
      }
      sep.resize(kept);
      std::size_t nl = 0, nr = 0;
      for (index_t v = 0; v < n; ++v) {
        nl += side[v] == 0;
        nr += side[v] == 1;
      }
      const bool ok = balanced(nl, nr, balance);
      const double gap = std::abs(static_cast<double>(nl) - static_cast<double>(nr));
      const bool better =
          !have || (ok && !best_ok) ||
          (ok == best_ok &&
           (ok ? (sep.size() < best_sep || (sep.size() == best_sep && gap < best_gap))
               : (gap < best_gap || (gap == best_gap && sep.size() < best_sep))));
      if (better) {
        have = true;
        best_ok = ok;
        best_sep = sep.size();
        best_gap = gap;
        best = Bisection{};
        for (index_t v = 0; v < n; ++v) {
          if (side[v] == 0)
            best.left.push_back(v);
          else if (side[v] == 1)
            best.right.push_back(v);
          else
            best.separator.push_back(v);
        }
      }
    }
  }
  return best;
}

}  // namespace detail

/// Vertex bisection into (left, right, separator) with no left-right edge.
///
/// Connected graphs are split by BFS level sets from a pseudo-peripheral
/// vertex; the separator is one side's endpoints of the cut edges, trimmed
/// greedily. Disconnected graphs are split along components first.
inline Bisection bisect(const Graph& g, double balance = default_balance) {
  auto comps = detail::components(g);
  if (comps.size() <= 1) return detail::bisect_connected(g, balance);

  std::stable_sort(comps.begin(), comps.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  Bisection out;
  std::size_t start = 0;
  if (static_cast<double>(comps[0].size()) > balance * g.n) {
    std::vector<index_t> scratch;
    const Graph sub = g.induced(comps[0], scratch);
    Bisection inner = detail::bisect_connected(sub, balance);
    for (index_t v : inner.left) out.left.push_back(comps[0][v]);
    for (index_t v : inner.right) out.right.push_back(comps[0][v]);
    for (index_t v : inner.separator) out.separator.push_back(comps[0][v]);
    start = 1;
  }
  for (std::size_t c = start; c < comps.size(); ++c) {
    auto& dst = out.left.size() <= out.right.size() ? out.left : out.right;
    dst.insert(dst.end(), comps[c].begin(), comps[c].end());
  }
  std::sort(out.left.begin(), out.left.end());
  std::sort(out.right.begin(), out.right.end());
  std::sort(out.separator.begin(), out.separator.end());
  return out;
}

/// Full binary nested-dissection tree stored in heap order (root 0, children
/// 2i+1 and 2i+2). Internal nodes hold separators in ascending id; leaves hold
/// their vertices in minimum-degree order.
struct NDTree {
  int levels = 0;
  index_t n = 0;
  std::vector<std::vector<index_t>> nodes;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t leaf_count() const { return std::size_t{1} << levels; }
  std::size_t first_leaf() const { return (std::size_t{1} << levels) - 1; }
  bool is_leaf(std::size_t node) const { return node >= first_leaf(); }
  static std::size_t left(std::size_t node) { return 2 * node + 1; }
  static std::size_t right(std::size_t node) { return 2 * node + 2; }
  static std::size_t parent(std::size_t node) { return (node - 1) / 2; }
  int depth(std::size_t node) const {
    int d = 0;
    while (node > 0) {
      node = parent(node);
      ++d;
    }
    return d;
  }

  /// owner[v] = tree node that holds vertex v.
  std::vector<index_t> owners() const {
    std::vector<index_t> owner(static_cast<std::size_t>(n), -1);
    for (std::size_t t = 0; t < nodes.size(); ++t)
      for (index_t v : nodes[t]) owner[v] = static_cast<index_t>(t);
    return owner;
  }

  bool is_ancestor_or_self(std::size_t a, std::size_t d) const {
    while (d > a) d = parent(d);
    return d == a;
  }
};

/// Bisector hook: receives the induced subgraph and the global ids of its
/// vertices, returns a local bisection.
using Bisector = std::function<Bisection(const Graph&, std::span<const index_t>)>;

inline Bisector default_bisector(double balance = default_balance) {
  return [balance](const Graph& g, std::span<const index_t>) { return bisect(g, balance); };
}

/// Uses an externally computed top-level split (0 left, 1 right, 2 separator
/// per vertex) for the root and the built-in bisection below it.
inline Bisector labeled_root_bisector(std::vector<int> labels, double balance = default_balance) {
  return [labels = std::move(labels), balance](const Graph& g, std::span<const index_t> ids) {
    if (static_cast<std::size_t>(g.n) != labels.size()) return bisect(g, balance);
    Bisection b;
    for (index_t v = 0; v < g.n; ++v) {
      const int s = labels[ids[v]];
      (s == 0 ? b.left : s == 1 ? b.right : b.separator).push_back(v);
    }
    for (index_t v : b.left)
      for (index_t u : g.neighbors(v))
        if (labels[ids[u]] == 1)
          throw error(errc::precondition, "external partition has a left-right edge");
    return b;
  };
}

inline NDTree build_nd_tree(const SparseSym& a, int levels, const Bisector& bisector) {
  if (levels < 0) throw error(errc::precondition, "nested dissection needs levels >= 0");
  if (levels > 30 || (std::int64_t{1} << levels) > a.size())
    throw error(errc::precondition, "graph with " + std::to_string(a.size()) +
                                        " vertices is too small for " + std::to_string(levels) +
                                        " levels");
  NDTree t;
  t.levels = levels;
  t.n = a.size();
  t.nodes.resize((std::size_t{2} << levels) - 1);
  const Graph g = Graph::from_matrix(a);
  std::vector<index_t> scratch;

  std::vector<index_t> all(static_cast<std::size_t>(a.size()));
  std::iota(all.begin(), all.end(), 0);
  std::function<void(std::size_t, std::vector<index_t>)> recurse =
      [&](std::size_t node, std::vector<index_t> ids) {
        const Graph sub = g.induced(ids, scratch);
        if (t.is_leaf(node)) {
          for (index_t v : mindeg_order(sub)) t.nodes[node].push_back(ids[v]);
          return;
        }
        const Bisection b = bisector(sub, ids);
        std::vector<index_t> l, r;
        for (index_t v : b.left) l.push_back(ids[v]);
        for (index_t v : b.right) r.push_back(ids[v]);
        for (index_t v : b.separator) t.nodes[node].push_back(ids[v]);
        std::sort(l.begin(), l.end());
        std::sort(r.begin(), r.end());
        std::sort(t.nodes[node].begin(), t.nodes[node].end());
        recurse(NDTree::left(node), std::move(l));
        recurse(NDTree::right(node), std::move(r));
      };
  recurse(0, std::move(all));
  return t;
}

inline NDTree build_nd_tree(const SparseSym& a, int levels) {
  return build_nd_tree(a, levels, default_bisector());
}

/// Post-order concatenation: left subtree, right subtree, then the node.
inline Perm tree_to_perm(const NDTree& t) {
  std::vector<index_t> order;
  order.reserve(static_cast<std::size_t>(t.n));
  std::function<void(std::size_t)> visit = [&](std::size_t node) {
    if (!t.is_leaf(node)) {
      visit(NDTree::left(node));
      visit(NDTree::right(node));
    }
    order.insert(order.end(), t.nodes[node].begin(), t.nodes[node].end());
  };
  if (!t.nodes.empty()) visit(0);
  return Perm::from_order(std::move(order));
}

// ---------------------------------------------------------------------------
// Ordering selection

enum class OrderingKind { natural, random, mindeg, nd, external };

inline const char* to_string(OrderingKind k) {
  switch (k) {
    case OrderingKind::natural: return "natural";
    case OrderingKind::random: return "random";
    case OrderingKind::mindeg: return "mindeg";
    case OrderingKind::nd: return "nd";
    case OrderingKind::external: return "external";
  }
  return "?";
}

inline OrderingKind ordering_kind_from_string(const std::string& s) {
  if (s == "natural") return OrderingKind::natural;
  if (s == "random") return OrderingKind::random;
  if (s == "mindeg" || s == "amd") return OrderingKind::mindeg;
  if (s == "nd") return OrderingKind::nd;
  if (s == "external" || s == "file") return OrderingKind::external;
  throw error(errc::precondition, "unknown ordering '" + s + "'");
}

struct OrderingSpec {
  OrderingKind kind = OrderingKind::mindeg;
  int levels = 1;                // nd only
  std::uint64_t seed = 0;        // random only
  std::vector<index_t> external; // elimination order, external only
};

inline Perm random_order(index_t n, std::uint64_t seed) {
  std::vector<index_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  for (index_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<index_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
  return Perm::from_order(std::move(order));
}

inline Perm compute_ordering(const SparseSym& a, const OrderingSpec& spec) {
  switch (spec.kind) {
    case OrderingKind::natural: return Perm::identity(a.size());
    case OrderingKind::random: return random_order(a.size(), spec.seed);
    case OrderingKind::mindeg: return mindeg_order(a);
    case OrderingKind::nd: return tree_to_perm(build_nd_tree(a, spec.levels));
    case OrderingKind::external:
      if (static_cast<index_t>(spec.external.size()) != a.size())
        throw error(errc::dimension_mismatch, "external permutation has " +
                                                  std::to_string(spec.external.size()) +
                                                  " entries for n=" + std::to_string(a.size()));
      return Perm::from_order(spec.external);
  }
  return Perm::identity(a.size());
}

}  // namespace rchol
