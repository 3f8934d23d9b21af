#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace rchol;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> dense_of(const SparseSym& a) { return to_dense(a); }

}  // namespace

TEST_CASE("from_coo mirrors a single triangle", "[sparse]") {
  std::vector<Triplet> t{{0, 0, 2}, {0, 1, -1}, {1, 1, 2}};
  const auto a = SparseSym::from_coo(t, 2);
  CHECK(dense_of(a) == std::vector<double>{2, -1, -1, 2});
  CHECK(a.nnz() == 4);
}

TEST_CASE("from_coo sums duplicates per orientation", "[sparse]") {
  std::vector<Triplet> t{{0, 1, -0.5}, {0, 1, -0.5}, {1, 0, -1}, {0, 0, 1}, {1, 1, 1}};
  const auto a = SparseSym::from_coo(t, 2);
  CHECK(dense_of(a) == std::vector<double>{1, -1, -1, 1});
}

TEST_CASE("from_coo rejects out-of-range indices", "[sparse]") {
  std::vector<Triplet> t{{0, 2, 1}};
  try {
    (void)SparseSym::from_coo(t, 2);
    FAIL("no exception");
  } catch (const error& e) {
    CHECK(e.code() == errc::index_out_of_range);
  }
}

TEST_CASE("from_coo rejects conflicting triangles", "[sparse]") {
  std::vector<Triplet> t{{0, 1, -1}, {1, 0, -2}, {0, 0, 3}, {1, 1, 3}};
  try {
    (void)SparseSym::from_coo(t, 2);
    FAIL("no exception");
  } catch (const error& e) {
    CHECK(e.code() == errc::asymmetric);
  }
}

TEST_CASE("from_coo drops exact zeros and keeps rows sorted", "[sparse]") {
  std::vector<Triplet> t{{2, 0, 1}, {0, 0, 1}, {1, 0, 1}, {1, 0, -1}, {1, 1, 4}, {2, 2, 5}};
  const auto a = SparseSym::from_coo(t, 3);
  CHECK(a.nnz() == 5);
  for (index_t j = 0; j < 3; ++j) {
    auto r = a.rows(j);
    CHECK(std::is_sorted(r.begin(), r.end()));
    CHECK(std::adjacent_find(r.begin(), r.end()) == r.end());
  }
  CHECK(a(1, 0) == 0.0);
}

TEST_CASE("matvec examples", "[sparse]") {
  const std::vector<double> x{1, 2, 3};
  CHECK(matvec(SparseSym::identity(3), x) == x);
  std::vector<Triplet> t{{0, 0, 2}, {1, 0, -1}, {1, 1, 2}};
  CHECK(matvec(SparseSym::from_coo(t, 2), std::vector<double>{1, 1}) ==
        std::vector<double>{1, 1});
  CHECK(matvec(testsupport::path_laplacian(3), std::vector<double>{1, 1, 1}) ==
        std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(matvec(SparseSym::identity(3), std::vector<double>{1, 2}), error);
}

TEST_CASE("permute_sym examples", "[sparse]") {
  std::vector<Triplet> d{{0, 0, 1}, {1, 1, 2}};
  const auto a = SparseSym::from_coo(d, 2);
  CHECK(permute_sym(a, Perm::identity(2)) == a);
  const auto swapped = permute_sym(a, Perm::from_order({1, 0}));
  CHECK(dense_of(swapped) == std::vector<double>{2, 0, 0, 1});
  const auto p3 = testsupport::path_laplacian(3);
  CHECK(permute_sym(p3, Perm::from_order({2, 1, 0})) == p3);
  CHECK_THROWS_AS(permute_sym(a, Perm::identity(3)), error);
}

TEST_CASE("permute_sym entry rule and round trip", "[sparse][property]") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const index_t n = 30 + trial;
    const auto a = testsupport::random_connected_laplacian(n, 40, gen);
    std::vector<index_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    const Perm p = Perm::from_order(order);
    const auto b = permute_sym(a, p);
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < n; ++j) REQUIRE(b(i, j) == a(p.inverse(i), p.inverse(j)));
    CHECK(permute_sym(b, p.inverted()) == a);
  }
}

TEST_CASE("matvec is symmetric as a bilinear form", "[sparse][property]") {
  std::mt19937_64 gen(5);
  const auto a = testsupport::random_connected_laplacian(200, 600, gen);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testsupport::uniform_vector(200, gen);
    const auto y = testsupport::uniform_vector(200, gen);
    const double xay = dot(x, matvec(a, y));
    const double yax = dot(y, matvec(a, x));
    CHECK(std::abs(xay - yax) <= 1e-12 * std::max(std::abs(xay), 1.0));
  }
}

TEST_CASE("triangular solves", "[sparse]") {
  std::vector<Triplet> t{{0, 0, 2}, {1, 0, 1}, {1, 1, 1}};
  const auto g = LowerTri::from_coo(t, 2);
  CHECK(solve_lower(g, std::vector<double>{2, 2}) == std::vector<double>{1, 1});
  // G^T = [[2,1],[0,1]]: x = [0.5, 2] gives [3, 2]
  CHECK(solve_upper(g, std::vector<double>{3, 2}) == std::vector<double>{0.5, 2});

  std::vector<Triplet> id{{0, 0, 1}, {1, 1, 1}, {2, 2, 1}};
  const std::vector<double> b{4, 5, 6};
  CHECK(solve_lower(LowerTri::from_coo(id, 3), b) == b);

  std::vector<Triplet> sing{{0, 0, 1}};
  try {
    (void)solve_lower(LowerTri::from_coo(sing, 2), std::vector<double>{1, 1});
    FAIL("no exception");
  } catch (const error& e) {
    CHECK(e.code() == errc::zero_pivot);
  }
  // The designated last column may be empty.
  const auto pinned = LowerTri::from_coo(sing, 2, true);
  CHECK(solve_lower(pinned, std::vector<double>{1, 1}) == std::vector<double>{1, 0});
}

TEST_CASE("solve_lower inverts random well-conditioned factors", "[sparse][property]") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> diag(1.0, 2.0), off(-0.1, 0.1);
  std::bernoulli_distribution keep(0.01);
  const index_t n = 1000;
  std::vector<Triplet> t;
  for (index_t j = 0; j < n; ++j) {
    t.push_back({j, j, diag(gen)});
    for (index_t i = j + 1; i < n; ++i)
      if (keep(gen)) t.push_back({i, j, off(gen)});
  }
  const auto g = LowerTri::from_coo(t, n);
  const auto b = testsupport::uniform_vector(n, gen);
  CHECK(testsupport::rel_diff(g.multiply(solve_lower(g, b)), b) <= 1e-10);
  CHECK(testsupport::rel_diff(g.multiply_transpose(solve_upper(g, b)), b) <= 1e-10);
}

TEST_CASE("connected components", "[sparse]") {
  auto plus_one = [](const Components& c) {
    std::vector<index_t> v = c.labels;
    for (auto& x : v) ++x;
    return v;
  };
  std::vector<Triplet> k2k2{{0, 0, 1}, {1, 0, -1}, {1, 1, 1}, {2, 2, 1}, {3, 2, -1}, {3, 3, 1}};
  CHECK(plus_one(connected_components(SparseSym::from_coo(k2k2, 4))) ==
        std::vector<index_t>{1, 1, 2, 2});
  CHECK(plus_one(connected_components(testsupport::path_laplacian(4))) ==
        std::vector<index_t>{1, 1, 1, 1});
  const auto c = connected_components(SparseSym::identity(2));
  CHECK(plus_one(c) == std::vector<index_t>{1, 2});
  CHECK(c.count == 2);
}

TEST_CASE("perm stores both directions", "[sparse]") {
  const Perm p = Perm::from_order({2, 0, 1});
  CHECK(p.inverse() == std::vector<index_t>{2, 0, 1});
  CHECK(p.forward() == std::vector<index_t>{1, 2, 0});
  for (index_t k = 0; k < 3; ++k) CHECK(p.forward(p.inverse(k)) == k);
  CHECK(Perm::from_forward(p.forward()) == p);
  CHECK_THROWS_AS(Perm::from_order({0, 0, 1}), error);
}
