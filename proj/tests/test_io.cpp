#include <catch_amalgamated.hpp>

#include <filesystem>
#include <functional>
#include <sstream>

#include "support.hpp"

using namespace rchol;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rchol_test_io_" + name);
  std::filesystem::remove_all(p);
  return p;
}

errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return errc::io;
}

}  // namespace

TEST_CASE("matrix market round trip", "[io]") {
  std::mt19937_64 gen(1);
  const auto a = testsupport::random_connected_laplacian(60, 120, gen);
  std::stringstream s;
  write_matrix_market(a, s);
  const auto b = read_matrix_market(s);
  CHECK(a == b);
}

TEST_CASE("matrix market reads 1-based symmetric and general files", "[io]") {
  std::istringstream sym(
      "%%MatrixMarket matrix coordinate real symmetric\n"
      "% comment\n"
      "2 2 3\n"
      "1 1 2\n"
      "2 1 -1\n"
      "2 2 2\n");
  const auto a = read_matrix_market(sym);
  CHECK(testsupport::dense(a).a == std::vector<double>{2, -1, -1, 2});

  std::istringstream gen(
      "%%MatrixMarket matrix coordinate real general\n"
      "2 2 4\n"
      "1 1 2\n1 2 -1\n2 1 -1\n2 2 2\n");
  CHECK(read_matrix_market(gen) == a);
}

TEST_CASE("matrix market errors", "[io]") {
  std::istringstream pattern("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n1 1\n");
  try {
    read_matrix_market(pattern);
    FAIL("pattern accepted");
  } catch (const error& e) {
    CHECK(std::string(e.what()).find("pattern matrix: values required") != std::string::npos);
  }
  std::istringstream asym("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 1 3\n");
  CHECK(code_of([&] { read_matrix_market(asym); }) == errc::asymmetric);
  std::istringstream zero_based("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n0 0 1\n");
  CHECK(code_of([&] { read_matrix_market(zero_based); }) == errc::index_out_of_range);
  std::istringstream dense("%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n");
  CHECK(code_of([&] { read_matrix_market(dense); }) == errc::format);
  std::istringstream junk("hello\n");
  CHECK(code_of([&] { read_matrix_market(junk); }) == errc::format);
  CHECK(code_of([] { read_matrix_market(std::string("/nonexistent/a.mtx")); }) == errc::io);
}

TEST_CASE("permutation files are 1-based", "[io]") {
  const Perm p = Perm::from_order({2, 0, 1});
  std::stringstream s;
  write_perm(p, s);
  CHECK(s.str() == "3\n1\n2\n");
  CHECK(read_perm(s, 3) == p);
  std::istringstream bad("1\n1\n2\n");
  CHECK_THROWS_AS(read_perm(bad, 3), error);
  std::istringstream short_file("1\n2\n");
  CHECK_THROWS_AS(read_perm(short_file, 3), error);
}

TEST_CASE("vectors round trip exactly", "[io]") {
  const std::vector<double> v{0.1, -1e-300, 3.0, 1.0 / 3.0};
  std::stringstream s;
  write_vector(v, s);
  CHECK(read_vector(s) == v);
}

TEST_CASE("JSON formatting", "[io]") {
  JsonObject o;
  o.add("n", 3).add("res", 0.5).add("ok", true).add("path", std::string("a\"b"));
  CHECK(o.str() == R"({"n": 3, "res": 0.5, "ok": true, "path": "a\"b"})");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "null");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("factor archive round trip is bit-for-bit", "[io]") {
  const auto a = poisson7(6);
  RngStream rng(4);
  const auto f = rchol_sddm(a, mindeg_order(a), rng);
  std::stringstream s;
  write_archive(f, &a, s);
  const auto back = read_archive(s);
  REQUIRE(back.matrix);
  CHECK(*back.matrix == a);
  CHECK(back.factor.g == f.g);
  CHECK(back.factor.perm == f.perm);
  CHECK(*back.factor.ext_row == *f.ext_row);
  CHECK(back.factor.meta.matrix_nnz == f.meta.matrix_nnz);
  const auto r = random_rhs(a.size(), 1);
  CHECK(apply_factor(back.factor, r) == apply_factor(f, r));

  const auto dir = scratch_dir("dir");
  save_factor_dir(f, dir.string());
  const auto g = load_factor(dir.string());
  CHECK(g.g == f.g);
  CHECK(apply_factor(g, r) == apply_factor(f, r));
  std::filesystem::remove_all(dir);
}

TEST_CASE("Laplacian factor archive keeps the singular flag", "[io]") {
  const auto l = testsupport::path_laplacian(5);
  RngStream rng(1);
  const auto f = rchol_laplacian(l, Perm::identity(5), rng);
  std::stringstream s;
  write_archive(f, nullptr, s);
  const auto back = read_archive(s);
  CHECK(!back.matrix);
  CHECK(back.factor.g.singular_last());
  CHECK(back.factor.g == f.g);
}

TEST_CASE("f32 factor archive records its precision", "[io]") {
  const auto a = poisson7(4);
  RngStream rng(4);
  auto f = rchol_sddm(a, Perm::identity(a.size()), rng);
  f.round_to_f32();
  std::stringstream s;
  write_archive(f, nullptr, s);
  const auto back = read_archive(s);
  CHECK(back.factor.meta.f32);
  CHECK(back.factor.g == f.g);
}

TEST_CASE("archive errors", "[io]") {
  std::istringstream notarchive("%%MatrixMarket matrix coordinate real symmetric\n");
  CHECK(code_of([&] { read_archive(notarchive); }) == errc::format);
  std::istringstream missing("%%RcholArchive 1\n@@ meta\n{\"n\": 1}\n@@ end\n");
  CHECK(code_of([&] { read_archive(missing); }) == errc::format);
  std::istringstream unknown("%%RcholArchive 1\n@@ stuff\n@@ end\n");
  CHECK(code_of([&] { read_archive(unknown); }) == errc::format);
}
