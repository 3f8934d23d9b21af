// SDD systems with positive off-diagonals: a sign-flippable one and one
// with an odd cycle of positive entries that needs the doubled system.

#include <algorithm>
#include <cstdio>
#include <vector>

#include "rchol/rchol.hpp"

namespace {

// Cycle of length n; entries along the cycle carry the given signs.
rchol::SparseSym signed_cycle(rchol::index_t n, const std::vector<double>& sign) {
  std::vector<rchol::Triplet> t;
  for (rchol::index_t i = 0; i < n; ++i) {
    const rchol::index_t j = (i + 1) % n;
    t.push_back({std::max(i, j), std::min(i, j), sign[static_cast<std::size_t>(i)]});
    t.push_back({i, i, 2.5});
  }
  return rchol::SparseSym::from_coo(t, n);
}

int report(const char* name, const rchol::SparseSym& a) {
  using namespace rchol;
  const auto b = random_rhs(a.size(), 3);
  SolveStats s;
  const auto x = solve_sdd(a, b, {}, s);
  std::printf("%-10s class %-9s path %-9s iterations %2d residual %.2e\n", name,
              to_string(classify(a).kind), s.path.c_str(), s.iterations,
              relative_residual(a, x, b));
  return s.converged ? 0 : 1;
}

}  // namespace

int main() {
  const rchol::index_t n = 200;
  std::vector<double> even(n, -1.0), odd(n, -1.0);
  // Positive entries on every other edge of an even cycle can be flipped away.
  for (std::size_t i = 0; i < even.size(); i += 2) even[i] = 1.0;
  // Three positive entries on a cycle leave an odd positive cycle behind.
  odd[0] = odd[50] = odd[100] = 1.0;
  int rc = report("signable", signed_cycle(n, even));
  rc |= report("odd-cycle", signed_cycle(n, odd));
  return rc;
}
