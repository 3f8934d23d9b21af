// rchol command line: gen, check, factor, solve, bench.
//
// Exit codes: 0 success (solve: converged), 1 not converged or solver
// failure, 2 unreadable input, 3 matrix not SDD.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rchol/rchol.hpp"

using namespace rchol;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_not_converged = 1;
constexpr int exit_bad_input = 2;
constexpr int exit_not_sdd = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSddError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::stringstream s;
  if (path == "-") {
    s << std::cin.rdbuf();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    s << in.rdbuf();
  }
  return s.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::io, "cannot write '" + path + "'");
  out << text;
}

/// A Matrix Market file, a factor archive (matrix optionally embedded) or a
/// factor directory.
struct Loaded {
  std::optional<SparseSym> matrix;
  std::optional<CholFactor> factor;
};

Loaded load_input(const std::string& path) {
  Loaded l;
  try {
    if (path != "-" && std::filesystem::is_directory(path)) {
      l.factor = load_factor_dir(path);
      return l;
    }
    std::istringstream in(slurp(path));
    std::string first;
    std::getline(in, first);
    if (first == archive_banner) {
      Archive a = read_archive_body(in);
      l.factor = std::move(a.factor);
      l.matrix = std::move(a.matrix);
    } else {
      in.clear();
      in.seekg(0);
      l.matrix = read_matrix_market(in);
    }
  } catch (const error& e) {
    throw InputError(e.what());
  }
  return l;
}

SparseSym load_matrix(const std::string& path) {
  Loaded l = load_input(path);
  if (!l.matrix) throw InputError("'" + path + "' holds no matrix");
  return std::move(*l.matrix);
}

struct Preprocess {
  bool compensate = false;
  double drop_positive = 0.0;
};

SparseSym preprocess(SparseSym a, const Preprocess& p) {
  if (p.drop_positive > 0.0) a = drop_small_positive(a, p.drop_positive);
  if (p.compensate) a = compensate_diagonal(a);
  return a;
}

MatrixClass require_sdd(const SparseSym& a) {
  MatrixClass c = classify(a);
  if (c.kind == MatrixKind::not_sdd) throw NotSddError("matrix is NotSDD: " + c.reason);
  return c;
}

struct OrderingFlags {
  std::string ordering = "mindeg";
  int nd_levels = 1;
  std::string perm_file;

  void add(CLI::App* app) {
    app->add_option("--ordering", ordering, "natural|random|mindeg|nd|amd")
        ->check(CLI::IsMember({"natural", "random", "mindeg", "amd", "nd"}));
    app->add_option("--nd-levels", nd_levels, "nested dissection levels")->check(CLI::NonNegativeNumber);
    app->add_option("--perm-file", perm_file, "external elimination order, 1-based");
  }

  OrderingSpec spec(index_t n, std::uint64_t seed) const {
    OrderingSpec s;
    s.seed = seed;
    s.levels = nd_levels;
    if (!perm_file.empty()) {
      Perm p;
      try {
        p = read_perm(perm_file, n);
      } catch (const error& e) {
        throw InputError(e.what());
      }
      s.kind = OrderingKind::external;
      s.external = p.inverse();
      return s;
    }
    s.kind = ordering_kind_from_string(ordering);
    return s;
  }
};

struct ThreadFlags {
  int threads = 1;
  bool pin = false;

  void add(CLI::App* app) {
    app->add_option("--threads", threads, "workers, rounded down to a power of two")
        ->check(CLI::PositiveNumber);
    app->add_flag("--pin-cores", pin, "pin worker threads to cores");
  }

  int effective() const { return 1 << tree_levels_for_threads(threads); }
};

/// SDDM or Laplacian factor for `factor` and prebuilt solves.
CholFactor build_factor(const SparseSym& a, const MatrixClass& c, const OrderingSpec& spec,
                        const ThreadFlags& th, std::uint64_t seed, double& t_p, double& t_f) {
  if (c.kind == MatrixKind::sddm) {
    SolveOptions o;
    o.ordering = spec;
    o.seed = seed;
    o.threads = th.effective();
    if (th.effective() > 1) return parallel_sddm_factorizer(th.pin)(a, o, t_p, t_f);
    return sequential_sddm_factor(a, o, t_p, t_f);
  }
  if (c.kind == MatrixKind::laplacian) {
    const auto t0 = std::chrono::steady_clock::now();
    const Perm p = compute_ordering(a, spec);
    const auto t1 = std::chrono::steady_clock::now();
    RngStream rng(seed);
    CholFactor f = rchol_laplacian(a, p, rng);
    f.meta.seed = seed;
    f.meta.ordering = to_string(spec.kind);
    f.meta.nd_levels = spec.kind == OrderingKind::nd ? spec.levels : 0;
    t_p = std::chrono::duration<double>(t1 - t0).count();
    t_f = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    return f;
  }
  throw error(errc::precondition,
              "factor stores SDDM or Laplacian factors; solve handles SDD matrices directly");
}

JsonObject solve_json(const SparseSym& a, const SolveStats& s, std::uint64_t seed,
                      const std::string& ordering, int threads) {
  JsonObject j;
  j.add("n", static_cast<long long>(a.size()))
      .add("nnz", static_cast<unsigned long long>(a.nnz()))
      .add("fill_ratio", s.fill_ratio)
      .add("t_p", s.t_p)
      .add("t_f", s.t_f)
      .add("t_s", s.t_s)
      .add("n_it", s.iterations)
      .add("res", s.relres)
      .add("converged", s.converged)
      .add("seed", static_cast<unsigned long long>(seed))
      .add("ordering", ordering)
      .add("threads", threads)
      .add("path", s.path);
  return j;
}

struct SolveConfig {
  OrderingSpec ordering;
  ThreadFlags threads;
  std::uint64_t seed = 0;
  PcgOptions pcg;
  bool f32 = false;
};

/// Full pipeline on a matrix: dispatch by class, factor, PCG.
std::vector<double> run_solve(const SparseSym& a, std::span<const double> b,
                              const SolveConfig& cfg, SolveStats& s, std::string& ordering) {
  require_sdd(a);
  SolveOptions o;
  o.pcg = cfg.pcg;
  o.ordering = cfg.ordering;
  o.seed = cfg.seed;
  o.threads = cfg.threads.effective();
  o.f32_factor = cfg.f32;
  ordering = to_string(cfg.ordering.kind);
  if (o.threads > 1) {
    ordering = "nd";
    return solve_sdd(a, b, o, s, parallel_sddm_factorizer(cfg.threads.pin));
  }
  return solve_sdd(a, b, o, s);
}

std::vector<double> make_rhs(const std::string& rhs, index_t n, std::uint64_t seed) {
  if (rhs == "random") return random_rhs(n, seed);
  std::vector<double> b;
  try {
    b = read_vector(rhs);
  } catch (const error& e) {
    throw InputError(e.what());
  }
  if (static_cast<index_t>(b.size()) != n)
    throw InputError("right-hand side has " + std::to_string(b.size()) + " entries, expected " +
                     std::to_string(n));
  return b;
}

// ---------------------------------------------------------------------------

int cmd_gen(index_t n, double contrast, std::uint64_t seed, bool harmonic, const std::string& out,
            const std::string& field_out) {
  SparseSym a;
  if (contrast == 1.0 && field_out.empty()) {
    a = poisson7(n);
  } else {
    GridSpec g;
    g.n = n;
    g.contrast = contrast;
    g.seed = seed;
    g.average = harmonic ? FaceAverage::harmonic : FaceAverage::arithmetic;
    const auto field = contrast_field(g);
    if (!field_out.empty()) write_raw_f64(field, field_out);
    a = poisson_var(g, field);
  }
  std::ostringstream s;
  write_matrix_market(a, s);
  emit(out, s.str());
  return exit_ok;
}

int cmd_check(const std::string& input, const Preprocess& pre) {
  const SparseSym a = preprocess(load_matrix(input), pre);
  const MatrixClass c = classify(a);
  JsonObject j;
  j.add("n", static_cast<long long>(a.size()))
      .add("nnz", static_cast<unsigned long long>(a.nnz()))
      .add("kind", to_string(c.kind))
      .add("irreducible", c.irreducible)
      .add("components", static_cast<long long>(c.components))
      .add("scenario", to_string(c.scenario))
      .add("reason", c.reason);
  std::cout << j.str() << '\n';
  return exit_ok;
}

int cmd_factor(const std::string& input, const Preprocess& pre, const OrderingFlags& of,
               const ThreadFlags& th, std::uint64_t seed, bool f32, const std::string& out,
               const std::string& out_dir) {
  const SparseSym a = preprocess(load_matrix(input), pre);
  const MatrixClass c = require_sdd(a);
  double t_p = 0.0, t_f = 0.0;
  CholFactor f = build_factor(a, c, of.spec(a.size(), seed), th, seed, t_p, t_f);
  if (f32) f.round_to_f32();
  if (!out_dir.empty()) {
    save_factor_dir(f, out_dir);
  } else {
    std::ostringstream s;
    write_archive(f, &a, s);
    emit(out, s.str());
  }
  JsonObject j;
  j.add("n", static_cast<long long>(a.size()))
      .add("nnz", static_cast<unsigned long long>(a.nnz()))
      .add("fill_ratio", f.fill_ratio())
      .add("t_p", t_p)
      .add("t_f", t_f)
      .add("seed", static_cast<unsigned long long>(seed))
      .add("ordering", f.meta.ordering)
      .add("threads", f.meta.threads);
  std::cerr << j.str() << '\n';
  return exit_ok;
}

int cmd_solve(const std::string& input, const std::string& matrix_path, const Preprocess& pre,
              const SolveConfig& cfg, const std::string& rhs, const std::string& x_out) {
  Loaded in = load_input(input);
  if (!matrix_path.empty()) in.matrix = load_matrix(matrix_path);
  if (!in.matrix) throw InputError("solve needs a matrix: embed it in the archive or pass --matrix");
  const SparseSym a = preprocess(std::move(*in.matrix), pre);
  const auto b = make_rhs(rhs, a.size(), cfg.seed);

  SolveStats s;
  std::vector<double> x;
  std::string ordering;
  int threads = cfg.threads.effective();
  std::uint64_t seed = cfg.seed;
  if (in.factor) {
    const MatrixClass c = require_sdd(a);
    CholFactor& f = *in.factor;
    if (f.size() != a.size()) throw InputError("factor size does not match the matrix");
    if (cfg.f32) f.round_to_f32();
    PcgOptions po = cfg.pcg;
    po.project_ones = c.kind == MatrixKind::laplacian;
    x = pcg(a, b, factor_preconditioner(f), po, s);
    s.fill_ratio = f.fill_ratio();
    s.t_f = f.meta.build_seconds;
    s.path = "prebuilt";
    ordering = f.meta.ordering;
    threads = f.meta.threads;
    seed = f.meta.seed;
  } else {
    x = run_solve(a, b, cfg, s, ordering);
  }
  if (!x_out.empty()) {
    std::ostringstream o;
    write_vector(x, o);
    emit(x_out, o.str());
  }
  std::cout << solve_json(a, s, seed, ordering, threads).str() << '\n';
  return s.converged ? exit_ok : exit_not_converged;
}

struct BenchConfig {
  std::string sweep = "orderings";
  index_t n = 32;
  std::string input;
  std::vector<double> contrasts{1.0, 10.0, 100.0, 1000.0};
  std::vector<int> threads{1, 2, 4};
  std::string format = "json";
};

int cmd_bench(const BenchConfig& bc, const OrderingFlags& of, const SolveConfig& base) {
  auto problem = [&](double contrast) {
    if (!bc.input.empty()) return load_matrix(bc.input);
    if (contrast == 1.0) return poisson7(bc.n);
    GridSpec g;
    g.n = bc.n;
    g.contrast = contrast;
    g.seed = base.seed;
    return poisson_var(g);
  };
  struct Row {
    std::string label;
    double contrast;
    SolveStats s;
    std::string ordering;
    int threads;
  };
  std::vector<Row> table;
  auto record = [&](const std::string& label, double contrast, const SparseSym& a,
                    const SolveConfig& cfg) {
    const auto b = random_rhs(a.size(), cfg.seed);
    Row r{label, contrast, {}, {}, cfg.threads.effective()};
    run_solve(a, b, cfg, r.s, r.ordering);
    table.push_back(std::move(r));
  };

  if (bc.sweep == "orderings") {
    const SparseSym a = problem(1.0);
    for (const char* name : {"natural", "random", "mindeg", "nd"}) {
      SolveConfig cfg = base;
      cfg.ordering = of.spec(a.size(), base.seed);
      cfg.ordering.kind = ordering_kind_from_string(name);
      cfg.threads.threads = 1;
      record(name, 1.0, a, cfg);
    }
  } else if (bc.sweep == "contrasts") {
    for (double rho : bc.contrasts) {
      const SparseSym a = problem(rho);
      SolveConfig cfg = base;
      cfg.ordering = of.spec(a.size(), base.seed);
      record(format_double(rho), rho, a, cfg);
    }
  } else {
    const SparseSym a = problem(1.0);
    for (int p : bc.threads) {
      SolveConfig cfg = base;
      cfg.ordering = of.spec(a.size(), base.seed);
      cfg.threads.threads = p;
      record(std::to_string(p), 1.0, a, cfg);
    }
  }

  if (bc.format == "csv") {
    std::cout << "config,ordering,threads,contrast,fill_ratio,t_p,t_f,t_s,n_it,res,converged\n";
    for (const auto& r : table)
      std::cout << r.label << ',' << r.ordering << ',' << r.threads << ',' << format_double(r.contrast)
                << ',' << format_double(r.s.fill_ratio) << ',' << format_double(r.s.t_p) << ','
                << format_double(r.s.t_f) << ',' << format_double(r.s.t_s) << ','
                << r.s.iterations << ',' << format_double(r.s.relres) << ','
                << (r.s.converged ? "true" : "false") << '\n';
  } else {
    std::vector<JsonObject> out;
    for (const auto& r : table) {
      JsonObject j;
      j.add("config", r.label)
          .add("ordering", r.ordering)
          .add("threads", r.threads)
          .add("contrast", r.contrast)
          .add("fill_ratio", r.s.fill_ratio)
          .add("t_p", r.s.t_p)
          .add("t_f", r.s.t_f)
          .add("t_s", r.s.t_s)
          .add("n_it", r.s.iterations)
          .add("res", r.s.relres)
          .add("converged", r.s.converged);
      out.push_back(std::move(j));
    }
    std::cout << json_array(out) << '\n';
  }
  bool all = true;
  for (const auto& r : table) all = all && r.s.converged;
  return all ? exit_ok : exit_not_converged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"randomized Cholesky preconditioned solver for SDD systems"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed")->envname("RCHOL_SEED");
  };
  Preprocess pre;
  auto add_pre = [&](CLI::App* sub) {
    sub->add_flag("--compensate", pre.compensate, "raise short diagonals to the off-diagonal row sum");
    sub->add_option("--drop-positive", pre.drop_positive,
                    "drop positive off-diagonals below this fraction of the smaller diagonal");
  };

  // gen
  auto* gen = app.add_subcommand("gen", "generate a 3D Poisson matrix");
  index_t gen_n = 32;
  double contrast = 1.0;
  bool harmonic = false;
  std::string gen_out = "-", field_out;
  gen->add_option("--n", gen_n, "points per dimension")->check(CLI::PositiveNumber);
  gen->add_option("--contrast", contrast, "coefficient contrast rho >= 1");
  gen->add_flag("--harmonic", harmonic, "harmonic face averaging");
  gen->add_option("--out", gen_out, "Matrix Market output, - for stdout");
  gen->add_option("--field-out", field_out, "raw little-endian float64 coefficient field");
  add_seed(gen);

  // check
  auto* check = app.add_subcommand("check", "classify a matrix");
  std::string check_in = "-";
  check->add_option("input", check_in, "Matrix Market file or archive, - for stdin");
  add_pre(check);

  // factor
  auto* factor = app.add_subcommand("factor", "build a randomized Cholesky factor");
  std::string factor_in = "-", factor_out = "-", factor_dir;
  OrderingFlags of;
  ThreadFlags th;
  bool f32 = false;
  factor->add_option("input", factor_in, "Matrix Market file, - for stdin");
  factor->add_option("--out", factor_out, "archive output, - for stdout");
  factor->add_option("--out-dir", factor_dir, "write a factor directory instead");
  factor->add_flag("--f32-factor", f32, "store the factor in single precision");
  of.add(factor);
  th.add(factor);
  add_seed(factor);
  add_pre(factor);

  // solve
  auto* solve = app.add_subcommand("solve", "solve A x = b with preconditioned CG");
  std::string solve_in = "-", matrix_path, rhs = "random", x_out;
  SolveConfig cfg;
  OrderingFlags sof;
  ThreadFlags sth;
  solve->add_option("input", solve_in, "Matrix Market file, archive or factor directory");
  solve->add_option("--matrix", matrix_path, "matrix for a factor without one embedded");
  solve->add_option("--rhs", rhs, "right-hand side file or 'random'");
  solve->add_option("--x-out", x_out, "write the solution, one value per line");
  solve->add_option("--tol", cfg.pcg.tol, "relative residual tolerance");
  solve->add_option("--maxit", cfg.pcg.maxit, "iteration cap")->check(CLI::PositiveNumber);
  solve->add_flag("--f32-factor", cfg.f32, "round the factor to single precision");
  sof.add(solve);
  sth.add(solve);
  add_seed(solve);
  add_pre(solve);

  // bench
  auto* bench = app.add_subcommand("bench", "sweep orderings, contrasts or thread counts");
  BenchConfig bc;
  SolveConfig bcfg;
  OrderingFlags bof;
  bench->add_option("--sweep", bc.sweep, "orderings|contrasts|threads")
      ->check(CLI::IsMember({"orderings", "contrasts", "threads"}));
  bench->add_option("--n", bc.n, "Poisson points per dimension")->check(CLI::PositiveNumber);
  bench->add_option("--input", bc.input, "Matrix Market file instead of a Poisson problem");
  bench->add_option("--contrasts", bc.contrasts, "contrast values")->delimiter(',');
  bench->add_option("--threads", bc.threads, "thread counts")->delimiter(',');
  bench->add_option("--tol", bcfg.pcg.tol, "relative residual tolerance");
  bench->add_option("--maxit", bcfg.pcg.maxit, "iteration cap");
  bench->add_option("--format", bc.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  bof.add(bench);
  add_seed(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_n, contrast, seed, harmonic, gen_out, field_out);
    if (check->parsed()) return cmd_check(check_in, pre);
    if (factor->parsed()) return cmd_factor(factor_in, pre, of, th, seed, f32, factor_out, factor_dir);
    if (solve->parsed()) {
      cfg.seed = seed;
      cfg.threads = sth;
      cfg.ordering.kind = ordering_kind_from_string(sof.ordering);
      cfg.ordering.levels = sof.nd_levels;
      cfg.ordering.seed = seed;
      if (!sof.perm_file.empty()) {
        cfg.ordering.kind = OrderingKind::external;
        try {
          cfg.ordering.external = read_perm(sof.perm_file).inverse();
        } catch (const error& e) {
          throw InputError(e.what());
        }
      }
      return cmd_solve(solve_in, matrix_path, pre, cfg, rhs, x_out);
    }
    if (bench->parsed()) {
      bcfg.seed = seed;
      return cmd_bench(bc, bof, bcfg);
    }
  } catch (const InputError& e) {
    std::cerr << "rchol: " << e.what() << '\n';
    return exit_bad_input;
  } catch (const NotSddError& e) {
    std::cerr << "rchol: " << e.what() << '\n';
    return exit_not_sdd;
  } catch (const std::exception& e) {
    std::cerr << "rchol: " << e.what() << '\n';
    return exit_not_converged;
  }
  return exit_ok;
}
