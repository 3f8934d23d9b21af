#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "rchol/classify.hpp"
#include "rchol/elim_graph.hpp"
#include "rchol/error.hpp"
#include "rchol/factorization.hpp"
#include "rchol/krylov.hpp"
#include "rchol/ordering.hpp"
#include "rchol/rng.hpp"
#include "rchol/sampling.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

/// Splits sampled edges into those touching `block` (C1) and the rest (C2).
inline std::pair<EdgeList, EdgeList> separate_edges(std::span<const index_t> block,
                                                    std::span<const Edge> c) {
  std::vector<index_t> sorted(block.begin(), block.end());
  std::sort(sorted.begin(), sorted.end());
  auto in = [&](index_t v) { return std::binary_search(sorted.begin(), sorted.end(), v); };
  std::pair<EdgeList, EdgeList> out;
  for (const auto& e : c) (in(e.i) || in(e.j) ? out.first : out.second).push_back(e);
  return out;
}

/// Edges a task hands to its parent: none has an endpoint in the task's block.
struct SchurBuffer {
  EdgeList edges;

  void append(std::span<const Edge> more) { edges.insert(edges.end(), more.begin(), more.end()); }
  void merge(const SchurBuffer& other) { append(other.edges); }
  /// Sorts by (i, j) and sums duplicates in arrival order.
  void canonicalize() { edges = merge_duplicates(std::move(edges)); }
};

/// Tasks grouped into waves that run one after another. Tasks inside a wave
/// are independent; `worker[node]` is the worker slot that runs it.
struct TaskPlan {
  std::vector<std::vector<std::size_t>> waves;
  std::vector<int> worker;
  int workers = 1;
};

/// Level-synchronous schedule: deepest level first, each level cut into
/// waves of at most `workers` nodes, nodes assigned round-robin.
inline TaskPlan task_schedule(const NDTree& t, int workers) {
  if (workers < 1) throw error(errc::precondition, "need at least one worker");
  TaskPlan plan;
  plan.workers = workers;
  plan.worker.assign(t.node_count(), 0);
  for (int depth = t.levels; depth >= 0; --depth) {
    const std::size_t first = (std::size_t{1} << depth) - 1;
    const std::size_t count = std::size_t{1} << depth;
    for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(workers)) {
      std::vector<std::size_t> wave;
      for (std::size_t q = start; q < std::min(count, start + workers); ++q) {
        wave.push_back(first + q);
        plan.worker[first + q] = static_cast<int>(q % static_cast<std::size_t>(workers));
      }
      plan.waves.push_back(std::move(wave));
    }
  }
  return plan;
}

/// Edge bookkeeping of one task. With `merged` counting edges summed into an
/// existing edge, received - stars + c1 - merged - dropped is the number of
/// edges left in the task's graph, which is zero after the block is done.
struct TaskStats {
  std::size_t received = 0;       // original plus child edges touching the block
  std::size_t passed_through = 0; // child edges forwarded untouched
  std::size_t eliminated = 0;     // vertices eliminated
  std::size_t star_edges = 0;     // edges removed with the stars
  std::size_t c1 = 0;
  std::size_t c2 = 0;
  std::size_t merged = 0;
  std::size_t dropped = 0;
  std::size_t left_over = 0;      // live local edges after the block
};

struct ParOptions {
  int workers = 1;
  bool pin_cores = false;
};

struct ParResult {
  CholFactor factor;
  std::vector<TaskStats> tasks;
  TaskPlan plan;
};

namespace detail {

inline void pin_to_core(std::thread& th, int worker) {
#if defined(__linux__)
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<unsigned>(worker) % cores, &set);
  pthread_setaffinity_np(th.native_handle(), sizeof(set), &set);
#else
  (void)th;
  (void)worker;
#endif
}

struct TaskOutput {
  CscData columns;  // global permuted rows; col_ptr relative to the block
  SchurBuffer up;
  TaskStats stats;
  double min_pivot = std::numeric_limits<double>::infinity();
  double final_diag = 0.0;
};

}  // namespace detail

/// Task-tree randomized Cholesky of an irreducible Laplacian.
///
/// The elimination order is tree_to_perm(t). Each node eliminates its block
/// after both children, seeded by (seed, node id), and ships sampled edges
/// that miss its block to the parent. The result depends on (L, t, seed) only.
inline ParResult par_rchol(const SparseSym& l, const NDTree& t, std::uint64_t seed,
                           const ParOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (t.n != l.size()) throw error(errc::dimension_mismatch, "tree does not match matrix size");
  detail::require_irreducible_laplacian(l);
  const index_t n = l.size();
  const Perm perm = tree_to_perm(t);
  const std::size_t nodes = t.node_count();

  // Contiguous position range of every node under the post-order.
  std::vector<index_t> begin(nodes), end(nodes);
  {
    index_t pos = 0;
    std::function<void(std::size_t)> visit = [&](std::size_t node) {
      if (!t.is_leaf(node)) {
        visit(NDTree::left(node));
        visit(NDTree::right(node));
      }
      begin[node] = pos;
      pos += static_cast<index_t>(t.nodes[node].size());
      end[node] = pos;
    };
    if (nodes) visit(0);
  }
  std::vector<index_t> owner(static_cast<std::size_t>(n));
  for (std::size_t node = 0; node < nodes; ++node)
    for (index_t k = begin[node]; k < end[node]; ++k) owner[k] = static_cast<index_t>(node);

  // Original off-diagonal edges go to the task that eliminates their first endpoint.
  const SparseSym pl = permute_sym(l, perm);
  std::vector<EdgeList> initial(nodes);
  for (index_t j = 0; j < n; ++j) {
    auto r = pl.rows(j);
    auto v = pl.vals(j);
    for (std::size_t q = 0; q < r.size(); ++q) {
      if (r[q] >= j) continue;
      const index_t i = r[q];
      if (!t.is_ancestor_or_self(static_cast<std::size_t>(owner[j]),
                                 static_cast<std::size_t>(owner[i])))
        throw error(errc::precondition, "tree separates an edge between sibling subtrees");
      initial[owner[i]].push_back({i, j, -v[q]});
    }
  }

  const TaskPlan plan = task_schedule(t, opt.workers);
  std::vector<detail::TaskOutput> out(nodes);

  auto run_task = [&](std::size_t node) {
    detail::TaskOutput& o = out[node];
    const index_t b = begin[node], e = end[node];
    auto in_block = [&](index_t v) { return v >= b && v < e; };

    EdgeList incoming = std::move(initial[node]);
    o.stats.received = incoming.size();
    if (!t.is_leaf(node)) {
      for (std::size_t child : {NDTree::left(node), NDTree::right(node)}) {
        for (const auto& edge : out[child].up.edges) {
          if (in_block(edge.i) || in_block(edge.j)) {
            incoming.push_back(edge);
            ++o.stats.received;
          } else {
            o.up.edges.push_back(edge);
            ++o.stats.passed_through;
          }
        }
        out[child].up.edges = {};
      }
    }

    // Local ids: the block first, then touched ancestor positions ascending.
    std::vector<index_t> outside;
    for (const auto& edge : incoming) {
      if (!in_block(edge.i)) outside.push_back(edge.i);
      if (!in_block(edge.j)) outside.push_back(edge.j);
    }
    std::sort(outside.begin(), outside.end());
    outside.erase(std::unique(outside.begin(), outside.end()), outside.end());
    const index_t len = e - b;
    auto to_local = [&](index_t v) {
      if (in_block(v)) return v - b;
      return len + static_cast<index_t>(std::lower_bound(outside.begin(), outside.end(), v) -
                                        outside.begin());
    };
    auto to_global = [&](index_t v) { return v < len ? b + v : outside[v - len]; };
    for (auto& edge : incoming) {
      edge.i = to_local(edge.i);
      edge.j = to_local(edge.j);
    }
    ElimGraph g(len + static_cast<index_t>(outside.size()), incoming);
    const std::size_t merged_on_build = incoming.size() - g.edge_count();
    incoming = {};

    RngStream rng = RngStream::derived(seed, node);
    detail::SampleScratch scratch;
    EdgeList sampled;
    CscData& cols = o.columns;
    cols.n = len;
    for (index_t k = 0; k < len; ++k) {
      const bool last = node == 0 && k + 1 == len;
      if (last) {
        o.final_diag = g.degree(k);
        cols.col_ptr.push_back(static_cast<offset_t>(cols.row_idx.size()));
        continue;
      }
      Star star = g.remove_star(k);
      ++o.stats.eliminated;
      o.stats.star_edges += star.neighbors.size();
      if (!(star.deg > 0.0))
        throw error(errc::zero_pivot, "nonpositive pivot at position " + std::to_string(b + k));
      o.min_pivot = std::min(o.min_pivot, star.deg);
      const double root = std::sqrt(star.deg);
      cols.row_idx.push_back(b + k);
      cols.values.push_back(root);
      for (const auto& nb : star.neighbors) {
        cols.row_idx.push_back(to_global(nb.id));
        cols.values.push_back(-nb.weight / root);
      }
      cols.col_ptr.push_back(static_cast<offset_t>(cols.row_idx.size()));

      sampled.clear();
      detail::sample_clique_into(star.neighbors, star.deg, rng, scratch, sampled);
      for (const auto& s : sampled) {
        if (s.i < len || s.j < len) {
          g.add_edge(s.i, s.j, s.w);
          ++o.stats.c1;
        } else {
          o.up.edges.push_back({to_global(s.i), to_global(s.j), s.w});
          ++o.stats.c2;
        }
      }
    }
    o.stats.merged = g.merged_edges() + merged_on_build;
    o.stats.dropped = g.dropped_edges();
    o.stats.left_over = g.edge_count();
    if (o.stats.left_over != 0 && node != 0)
      throw error(errc::precondition, "task finished with edges left in its block");
    o.up.canonicalize();
  };

  for (const auto& wave : plan.waves) {
    if (opt.workers == 1 || wave.size() == 1) {
      for (std::size_t node : wave) run_task(node);
      continue;
    }
    std::vector<std::exception_ptr> errors(wave.size());
    std::vector<std::thread> threads;
    threads.reserve(wave.size());
    for (std::size_t q = 0; q < wave.size(); ++q) {
      threads.emplace_back([&, q] {
        try {
          run_task(wave[q]);
        } catch (...) {
          errors[q] = std::current_exception();
        }
      });
      if (opt.pin_cores) detail::pin_to_core(threads.back(), plan.worker[wave[q]]);
    }
    for (auto& th : threads) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  // Assemble columns in position order.
  std::vector<std::size_t> by_position(nodes);
  for (std::size_t node = 0; node < nodes; ++node) by_position[node] = node;
  std::sort(by_position.begin(), by_position.end(),
            [&](std::size_t x, std::size_t y) { return begin[x] < begin[y]; });
  CscData d;
  d.n = n;
  d.col_ptr.reserve(static_cast<std::size_t>(n) + 1);
  ParResult res;
  res.factor.meta.min_pivot = std::numeric_limits<double>::infinity();
  for (std::size_t node : by_position) {
    const CscData& c = out[node].columns;
    const auto base = static_cast<offset_t>(d.row_idx.size());
    d.row_idx.insert(d.row_idx.end(), c.row_idx.begin(), c.row_idx.end());
    d.values.insert(d.values.end(), c.values.begin(), c.values.end());
    for (std::size_t q = 1; q < c.col_ptr.size(); ++q) d.col_ptr.push_back(base + c.col_ptr[q]);
    res.factor.meta.min_pivot = std::min(res.factor.meta.min_pivot, out[node].min_pivot);
  }
  res.tasks.resize(nodes);
  for (std::size_t node = 0; node < nodes; ++node) {
    res.tasks[node] = out[node].stats;
    res.factor.meta.merged_edges += out[node].stats.merged;
    res.factor.meta.dropped_edges += out[node].stats.dropped;
  }
  if (nodes) res.factor.meta.final_diag = out[0].final_diag;
  res.factor.perm = perm;
  res.factor.g = LowerTri::from_csc(std::move(d), /*singular_last=*/true);
  res.factor.meta.seed = seed;
  res.factor.meta.ordering = t.levels == 0 ? "mindeg" : "nd";
  res.factor.meta.nd_levels = t.levels;
  res.factor.meta.threads = opt.workers;
  res.factor.meta.matrix_nnz = l.nnz();
  for (index_t j = 0; j < n; ++j) res.factor.meta.max_diag = std::max(res.factor.meta.max_diag, l.diag(j));
  res.plan = plan;
  res.factor.meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Appends the border-extension vertex (id t.n) to the root separator.
inline NDTree extend_tree(NDTree t) {
  t.nodes[0].push_back(t.n);
  t.n += 1;
  return t;
}

/// Task-tree factor of an SDDM matrix through its border extension; `t` is
/// a tree over the vertices of `a`.
inline CholFactor par_rchol_sddm(const SparseSym& a, const NDTree& t, std::uint64_t seed,
                                 const ParOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (t.n != a.size()) throw error(errc::dimension_mismatch, "tree does not match matrix size");
  const SparseSym ext = extend_sddm(a);
  ParResult big = par_rchol(ext, extend_tree(t), seed, opt);
  CholFactor f = extract_leading_block(std::move(big.factor), tree_to_perm(t), a.nnz());
  f.meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return f;
}

/// Largest power of two not above p, and its base-2 logarithm.
inline int tree_levels_for_threads(int threads) {
  if (threads < 1) throw error(errc::precondition, "thread count must be >= 1");
  int levels = 0;
  while ((2 << levels) <= threads) ++levels;
  return levels;
}

/// Factorizer for the solve drivers: nested dissection with log2(threads)
/// levels and the task-tree factorization.
inline SddmFactorizer parallel_sddm_factorizer(bool pin_cores = false) {
  return [pin_cores](const SparseSym& a, const SolveOptions& opt, double& t_p, double& t_f) {
    const auto t0 = std::chrono::steady_clock::now();
    const int levels = tree_levels_for_threads(opt.threads);
    const NDTree tree = build_nd_tree(a, levels);
    const auto t1 = std::chrono::steady_clock::now();
    ParOptions po;
    po.workers = 1 << levels;
    po.pin_cores = pin_cores;
    CholFactor f = par_rchol_sddm(a, tree, opt.seed, po);
    t_p = std::chrono::duration<double>(t1 - t0).count();
    t_f = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    return f;
  };
}

}  // namespace rchol
