#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run sh(const std::string& cmd) {
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const std::string cli = RCHOL_CLI_PATH;

std::filesystem::path workdir() {
  auto d = std::filesystem::temp_directory_path() / "rchol_test_cli";
  std::filesystem::create_directories(d);
  return d;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = workdir() / name;
  std::ofstream(p) << text;
  return p.string();
}

nlohmann::json last_json_line(const std::string& out) {
  const auto end = out.find_last_not_of('\n');
  const auto begin = out.rfind('\n', end);
  return nlohmann::json::parse(out.substr(begin == std::string::npos ? 0 : begin + 1));
}

}  // namespace

TEST_CASE("gen | factor | solve pipeline converges", "[cli]") {
  const auto r = sh(cli + " gen --n 32 | " + cli + " factor --ordering mindeg 2>/dev/null | " + cli +
                    " solve --tol 1e-10");
  REQUIRE(r.code == 0);
  const auto j = last_json_line(r.out);
  CHECK(j["converged"] == true);
  CHECK(j["n"] == 32768);
  CHECK(j["n_it"].get<int>() <= 60);
  CHECK(j["res"].get<double>() <= 1e-10);
  for (const char* key : {"n", "nnz", "fill_ratio", "t_p", "t_f", "t_s", "n_it", "res", "converged",
                          "seed", "ordering", "threads"})
    CHECK(j.contains(key));
  CHECK(j["ordering"] == "mindeg");
}

TEST_CASE("check reports NotSDD and solve exits 3", "[cli]") {
  const auto path = write_file("neg.mtx",
                               "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 2 -1\n");
  auto r = sh(cli + " check " + path);
  CHECK(r.code == 0);
  CHECK(last_json_line(r.out)["kind"] == "NotSDD");
  r = sh(cli + " solve " + path + " 2>/dev/null");
  CHECK(r.code == 3);
}

TEST_CASE("compensate makes an almost-SDD matrix solvable", "[cli]") {
  const auto path = write_file(
      "almost.mtx",
      "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 0.9\n2 1 -1\n2 2 2\n");
  CHECK(sh(cli + " solve " + path + " 2>/dev/null").code == 3);
  const auto r = sh(cli + " solve --compensate " + path);
  CHECK(r.code == 0);
  CHECK(last_json_line(r.out)["converged"] == true);
}

TEST_CASE("threaded solves are reproducible", "[cli]") {
  const auto mtx = (workdir() / "p16.mtx").string();
  REQUIRE(sh(cli + " gen --n 16 --out " + mtx).code == 0);
  auto a = last_json_line(sh(cli + " solve " + mtx + " --threads 4 --seed 7").out);
  auto b = last_json_line(sh(cli + " solve " + mtx + " --threads 4 --seed 7").out);
  for (const char* key : {"t_p", "t_f", "t_s"}) {
    a.erase(key);
    b.erase(key);
  }
  CHECK(a == b);
  CHECK(a["threads"] == 4);
  CHECK(a["seed"] == 7);
}

TEST_CASE("seed comes from the environment by default", "[cli]") {
  const auto mtx = (workdir() / "p8.mtx").string();
  REQUIRE(sh(cli + " gen --n 8 --out " + mtx).code == 0);
  const auto j = last_json_line(sh("RCHOL_SEED=42 " + cli + " solve " + mtx).out);
  CHECK(j["seed"] == 42);
}

TEST_CASE("unreadable input exits 2", "[cli]") {
  CHECK(sh(cli + " solve /nonexistent/matrix.mtx 2>/dev/null").code == 2);
  const auto junk = write_file("junk.mtx", "not a matrix\n");
  CHECK(sh(cli + " solve " + junk + " 2>/dev/null").code == 2);
  CHECK(sh(cli + " check " + junk + " 2>/dev/null").code == 2);
}

TEST_CASE("non-convergence exits 1", "[cli]") {
  const auto mtx = (workdir() / "p12.mtx").string();
  REQUIRE(sh(cli + " gen --n 12 --out " + mtx).code == 0);
  const auto r = sh(cli + " solve " + mtx + " --maxit 1 --tol 1e-14");
  CHECK(r.code == 1);
  CHECK(last_json_line(r.out)["converged"] == false);
}

TEST_CASE("factor directory and external permutation", "[cli]") {
  const auto mtx = (workdir() / "p6.mtx").string();
  const auto dir = (workdir() / "p6.factor").string();
  std::filesystem::remove_all(dir);
  REQUIRE(sh(cli + " gen --n 6 --out " + mtx).code == 0);
  std::string perm;
  for (int i = 216; i >= 1; --i) perm += std::to_string(i) + "\n";
  const auto pf = write_file("rev.perm", perm);
  REQUIRE(sh(cli + " factor " + mtx + " --perm-file " + pf + " --out-dir " + dir + " 2>/dev/null").code == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "meta.json"));
  const auto r = sh(cli + " solve " + dir + " --matrix " + mtx);
  CHECK(r.code == 0);
  CHECK(last_json_line(r.out)["ordering"] == "external");
}

TEST_CASE("gen writes the coefficient field", "[cli]") {
  const auto mtx = (workdir() / "c8.mtx").string();
  const auto raw = (workdir() / "c8.raw").string();
  REQUIRE(sh(cli + " gen --n 8 --contrast 100 --seed 3 --out " + mtx + " --field-out " + raw).code == 0);
  CHECK(std::filesystem::file_size(raw) == 8 * 8 * 8 * sizeof(double));
  CHECK(last_json_line(sh(cli + " check " + mtx).out)["kind"] == "SDDM");
}

TEST_CASE("bench ordering sweep has one row per ordering", "[cli]") {
  const auto r = sh(cli + " bench --sweep orderings --n 12");
  REQUIRE(r.code == 0);
  const auto rows = nlohmann::json::parse(r.out);
  REQUIRE(rows.size() == 4);
  std::vector<std::string> names;
  for (const auto& row : rows) names.push_back(row["ordering"]);
  CHECK(names == std::vector<std::string>{"natural", "random", "mindeg", "nd"});
  const auto csv = sh(cli + " bench --sweep threads --threads 1,2 --n 10 --format csv");
  CHECK(csv.code == 0);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 3);
}

TEST_CASE("bench contrast and thread sweeps", "[cli][slow]") {
  auto r = sh(cli + " bench --sweep contrasts --n 32 --contrasts 1,10,100,1000");
  REQUIRE(r.code == 0);
  const auto rows = nlohmann::json::parse(r.out);
  REQUIRE(rows.size() == 4);
  std::vector<int> its;
  for (const auto& row : rows) its.push_back(row["n_it"]);
  CHECK(its.back() > its.front());
  for (std::size_t q = 1; q < its.size(); ++q) CHECK(its[q] >= 0.9 * its[q - 1]);

  r = sh(cli + " bench --sweep threads --n 32 --threads 1,2,4");
  REQUIRE(r.code == 0);
  const auto trows = nlohmann::json::parse(r.out);
  REQUIRE(trows.size() == 3);
  double lo = 1e300, hi = 0.0;
  for (const auto& row : trows) {
    lo = std::min(lo, row["fill_ratio"].get<double>());
    hi = std::max(hi, row["fill_ratio"].get<double>());
  }
  CHECK((hi - lo) / lo < 0.05);
}
