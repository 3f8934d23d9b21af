// Task-tree factorization on a nested dissection tree with several workers.

#include <cstdio>

#include "rchol/rchol.hpp"

int main() {
  using namespace rchol;
  const SparseSym a = poisson7(20);
  const auto b = random_rhs(a.size(), 2);
  const NDTree tree = build_nd_tree(a, 2);

  int rc = 0;
  for (int workers : {1, 2, 4}) {
    const CholFactor f = par_rchol_sddm(a, tree, 5, {workers, false});
    SolveStats s;
    pcg(a, b, factor_preconditioner(f), {}, s);
    std::printf("workers %d  fill/nnz %.3f  iterations %d  build %.3fs\n", workers, f.fill_ratio(),
                s.iterations, f.meta.build_seconds);
    if (!s.converged) rc = 1;
  }
  return rc;
}
