#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rchol/classify.hpp"
#include "rchol/error.hpp"
#include "rchol/factorization.hpp"
#include "rchol/ordering.hpp"
#include "rchol/rng.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

struct SolveStats {
  int iterations = 0;
  std::vector<double> history;  // relative residual after each iteration
  bool converged = false;
  bool stagnated = false;
  double relres = std::numeric_limits<double>::infinity();  // recomputed from x
  double fill_ratio = 0.0;
  double t_p = 0.0;  // ordering
  double t_f = 0.0;  // factorization
  double t_s = 0.0;  // PCG
  std::string path;  // sddm, laplacian, sign-flip, doubled
};

struct PcgOptions {
  double tol = 1e-10;
  int maxit = 2500;
  bool project_ones = false;
  int stagnation_window = 50;
  double stagnation_gain = 1e-3;
};

using Preconditioner = std::function<std::vector<double>(std::span<const double>)>;

inline void project_out_ones(std::span<double> x) {
  if (x.empty()) return;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double& v : x) v -= mean;
}

/// z = P G^{-T} G^{-1} P^T r.
inline std::vector<double> apply_factor(const CholFactor& f, std::span<const double> r) {
  const index_t n = f.size();
  if (static_cast<index_t>(r.size()) != n) throw error(errc::dimension_mismatch, "apply_factor");
  const auto& inv = f.perm.inverse();
  std::vector<double> y(r.size());
  for (index_t i = 0; i < n; ++i) y[i] = r[inv[i]];
  y = solve_upper(f.g, solve_lower(f.g, y));
  std::vector<double> z(r.size());
  for (index_t i = 0; i < n; ++i) z[inv[i]] = y[i];
  return z;
}

inline Preconditioner factor_preconditioner(const CholFactor& f) {
  return [&f](std::span<const double> r) { return apply_factor(f, r); };
}

inline Preconditioner identity_preconditioner() {
  return [](std::span<const double> r) { return std::vector<double>(r.begin(), r.end()); };
}

inline Preconditioner jacobi_preconditioner(const SparseSym& a) {
  std::vector<double> d(static_cast<std::size_t>(a.size()));
  for (index_t i = 0; i < a.size(); ++i) d[i] = a.diag(i);
  return [d = std::move(d)](std::span<const double> r) {
    std::vector<double> z(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
    return z;
  };
}

inline double relative_residual(const SparseSym& a, std::span<const double> x,
                                std::span<const double> b) {
  const auto ax = matvec(a, x);
  double rr = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    rr += (b[i] - ax[i]) * (b[i] - ax[i]);
    bb += b[i] * b[i];
  }
  return bb > 0.0 ? std::sqrt(rr / bb) : std::sqrt(rr);
}

/// Preconditioned conjugate gradient from x = 0.
///
/// Stops when ||b - Ax|| / ||b|| <= tol, confirmed against the explicit
/// residual, or after maxit iterations, or when the best residual has not
/// improved by the stagnation gain over the stagnation window. With
/// project_ones, b, the residuals, the preconditioned residuals and x are
/// kept orthogonal to the ones vector.
inline std::vector<double> pcg(const SparseSym& a, std::span<const double> b_in,
                               const Preconditioner& precond, const PcgOptions& opt,
                               SolveStats& stats) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = static_cast<std::size_t>(a.size());
  if (b_in.size() != n) throw error(errc::dimension_mismatch, "pcg right-hand side");
  std::vector<double> b(b_in.begin(), b_in.end());
  if (opt.project_ones) project_out_ones(b);

  std::vector<double> x(n, 0.0), r = b;
  const double bnorm = norm2(b);
  stats.iterations = 0;
  stats.history.clear();
  stats.converged = false;
  stats.stagnated = false;
  auto finish = [&]() {
    if (opt.project_ones) project_out_ones(x);
    stats.relres = relative_residual(a, x, opt.project_ones ? std::span<const double>(b) : b_in);
    stats.t_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return x;
  };
  if (bnorm == 0.0) {
    stats.converged = true;
    return finish();
  }

  auto precondition = [&](const std::vector<double>& res) {
    std::vector<double> z = precond(res);
    if (z.size() != n) throw error(errc::dimension_mismatch, "preconditioner output");
    if (opt.project_ones) project_out_ones(z);
    return z;
  };

  std::vector<double> z = precondition(r);
  double rz = dot(r, z);
  if (rz < 0.0) throw error(errc::indefinite_preconditioner, "z'r < 0 at iteration 0");
  std::vector<double> p = z;
  double best = 1.0;
  int best_at = 0;

  for (int it = 1; it <= opt.maxit; ++it) {
    const std::vector<double> q = matvec(a, p);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    if (opt.project_ones) {
      project_out_ones(x);
      project_out_ones(r);
    }
    stats.iterations = it;
    double rel = norm2(r) / bnorm;
    if (rel <= opt.tol) {
      // Replace the recurrence residual by the true one before accepting.
      const auto ax = matvec(a, x);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
      if (opt.project_ones) project_out_ones(r);
      rel = norm2(r) / bnorm;
      if (rel <= opt.tol) {
        stats.history.push_back(rel);
        stats.converged = true;
        break;
      }
    }
    stats.history.push_back(rel);
    if (rel < best * (1.0 - opt.stagnation_gain)) {
      best = rel;
      best_at = it;
    } else if (it - best_at >= opt.stagnation_window) {
      stats.stagnated = true;
      break;
    }
    z = precondition(r);
    const double rz_new = dot(r, z);
    if (rz_new < 0.0)
      throw error(errc::indefinite_preconditioner,
                  "z'r < 0 at iteration " + std::to_string(it));
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return finish();
}

inline std::vector<double> pcg(const SparseSym& a, std::span<const double> b,
                               const Preconditioner& precond, const PcgOptions& opt = {}) {
  SolveStats s;
  return pcg(a, b, precond, opt, s);
}

// ---------------------------------------------------------------------------
// Drivers

struct SolveOptions {
  PcgOptions pcg;
  OrderingSpec ordering;
  std::uint64_t seed = 0;
  int threads = 1;
  bool f32_factor = false;
};

/// Hook for building the SDDM factor; the default runs the sequential
/// factorization with `opt.ordering`. The parallel module supplies another.
using SddmFactorizer =
    std::function<CholFactor(const SparseSym&, const SolveOptions&, double& t_p, double& t_f)>;

inline CholFactor sequential_sddm_factor(const SparseSym& a, const SolveOptions& opt, double& t_p,
                                         double& t_f) {
  const auto t0 = std::chrono::steady_clock::now();
  const Perm p = compute_ordering(a, opt.ordering);
  const auto t1 = std::chrono::steady_clock::now();
  RngStream rng(opt.seed);
  CholFactor f = rchol_sddm(a, p, rng);
  f.meta.seed = opt.seed;
  f.meta.ordering = to_string(opt.ordering.kind);
  f.meta.nd_levels = opt.ordering.kind == OrderingKind::nd ? opt.ordering.levels : 0;
  const auto t2 = std::chrono::steady_clock::now();
  t_p = std::chrono::duration<double>(t1 - t0).count();
  t_f = std::chrono::duration<double>(t2 - t1).count();
  return f;
}

/// Solves an SDDM system with the leading block of the extended factor as
/// preconditioner.
inline std::vector<double> solve_sddm(const SparseSym& a, std::span<const double> b,
                                      const SolveOptions& opt, SolveStats& stats,
                                      const SddmFactorizer& factorize = sequential_sddm_factor) {
  detail::require_kind(a, MatrixKind::sddm, "solve_sddm");
  CholFactor f = factorize(a, opt, stats.t_p, stats.t_f);
  if (opt.f32_factor) f.round_to_f32();
  stats.fill_ratio = f.fill_ratio();
  PcgOptions po = opt.pcg;
  po.project_ones = false;
  auto x = pcg(a, b, factor_preconditioner(f), po, stats);
  stats.path = "sddm";
  return x;
}

/// Solves an irreducible Laplacian system in the space orthogonal to ones.
inline std::vector<double> solve_laplacian(const SparseSym& l, std::span<const double> b,
                                           const SolveOptions& opt, SolveStats& stats) {
  const auto t0 = std::chrono::steady_clock::now();
  const Perm p = compute_ordering(l, opt.ordering);
  const auto t1 = std::chrono::steady_clock::now();
  RngStream rng(opt.seed);
  CholFactor f = rchol_laplacian(l, p, rng);
  if (opt.f32_factor) f.round_to_f32();
  stats.t_p = std::chrono::duration<double>(t1 - t0).count();
  stats.t_f = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  stats.fill_ratio = f.fill_ratio();
  PcgOptions po = opt.pcg;
  po.project_ones = true;
  auto x = pcg(l, b, factor_preconditioner(f), po, stats);
  stats.path = "laplacian";
  return x;
}

/// Solves an irreducible SDD system with positive off-diagonals.
///
/// A diagonal sign similarity is tried first. Otherwise the doubled system
/// [[Ad+An, -Ap], [-Ap, Ad+An]] (y1; y2) = (b; -b) is solved and
/// x = (y1 - y2) / 2.
inline std::vector<double> solve_sdd(const SparseSym& a, std::span<const double> b,
                                     const SolveOptions& opt, SolveStats& stats,
                                     const SddmFactorizer& factorize = sequential_sddm_factor) {
  const auto c = classify(a);
  if (c.kind == MatrixKind::sddm) return solve_sddm(a, b, opt, stats, factorize);
  if (c.kind == MatrixKind::laplacian) return solve_laplacian(a, b, opt, stats);
  if (c.kind != MatrixKind::sdd_mixed)
    throw error(errc::precondition, std::string("solve_sdd expects an SDD matrix: ") + c.reason);
  const index_t n = a.size();
  if (static_cast<index_t>(b.size()) != n) throw error(errc::dimension_mismatch, "solve_sdd");

  if (auto flip = sign_flip_reduction(a)) {
    std::vector<double> bf(b.begin(), b.end());
    for (index_t i : flip->flipped) bf[i] = -bf[i];
    SolveStats inner;
    std::vector<double> x;
    if (c.scenario == Scenario::exactly_dominant)
      x = solve_laplacian(flip->reduced, bf, opt, inner);
    else
      x = solve_sddm(flip->reduced, bf, opt, inner, factorize);
    for (index_t i : flip->flipped) x[i] = -x[i];
    stats = inner;
    stats.path = "sign-flip";
    stats.relres = relative_residual(a, x, b);
    return x;
  }

  const SparseSym big = double_sdd(a);
  std::vector<double> bb(2 * static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) {
    bb[i] = b[i];
    bb[i + n] = -b[i];
  }
  SolveStats inner;
  std::vector<double> y;
  if (c.scenario == Scenario::exactly_dominant)
    y = solve_laplacian(big, bb, opt, inner);
  else
    y = solve_sddm(big, bb, opt, inner, factorize);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) x[i] = 0.5 * (y[i] - y[i + n]);
  stats = inner;
  stats.path = "doubled";
  stats.relres = relative_residual(a, x, b);
  return x;
}

/// Standard-uniform right-hand side.
inline std::vector<double> random_rhs(index_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> b(static_cast<std::size_t>(n));
  for (auto& v : b) v = rng.uniform();
  return b;
}

}  // namespace rchol
