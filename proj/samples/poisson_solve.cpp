// Solves a 3D Poisson problem with the randomized Cholesky preconditioner.

#include <cstdio>

#include "rchol/rchol.hpp"

int main() {
  using namespace rchol;
  const SparseSym a = poisson7(24);
  const auto b = random_rhs(a.size(), 1);

  SolveOptions opt;
  opt.ordering.kind = OrderingKind::mindeg;
  opt.seed = 1;
  SolveStats s;
  const auto x = solve_sddm(a, b, opt, s);

  std::printf("n = %d  fill/nnz = %.2f  iterations = %d  residual = %.2e\n", a.size(),
              s.fill_ratio, s.iterations, relative_residual(a, x, b));
  std::printf("t_p = %.3fs  t_f = %.3fs  t_s = %.3fs\n", s.t_p, s.t_f, s.t_s);
  return s.converged ? 0 : 1;
}
