// effop command-line driver. Exit codes: 0 ok, 1 validation/usage error,
// 2 numerical failure. Diagnostics go to stderr.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include <effop/effop.hpp>
#include <effop/harness/generate.hpp>
#include <effop/harness/io.hpp>
#include <effop/harness/report.hpp>
#include <effop/harness/verify.hpp>

using namespace effop;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

/// Thrown when a numerical check the command reports on fails.
struct CheckFailed {
  std::string what;
};

std::string num(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

void print_eigenvalues(std::ostream& out, std::vector<Complex> ev) {
  std::sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (const Complex& e : ev) out << "eigenvalue " << num(e.real()) << ' ' << num(e.imag()) << '\n';
}

ObservableMatrix load_observable(const std::string& path) {
  return validate_hermitian(io::read_matrix_file(path).matrix);
}

void print_input(std::ostream& out, const std::string& path, const ObservableMatrix& o) {
  out << "# input " << path << " N=" << o.dim() << " fnv1a=" << hex(fingerprint(o.matrix())) << '\n';
}

std::vector<Index> one_based_list(const std::string& text) { return io::parse_index_list(text); }

// ---- gen

struct GenOptions {
  std::string kind;
  Index dim = 8;
  std::uint64_t seed = 1;
  std::string out;
  double gap = 0.0;
  Index model_dim = 0;
  double coupling = 0.1;
  int family_size = 3;
  std::vector<double> spectrum;
};

int run_gen(const GenOptions& g) {
  ProblemSpec spec;
  spec.kind = parse_problem_kind(g.kind);
  spec.dim = g.dim;
  spec.seed = g.seed;
  spec.params.gap = g.gap;
  spec.params.model_dim = g.model_dim;
  spec.params.coupling = g.coupling;
  spec.params.family_size = g.family_size;
  spec.params.spectrum = g.spectrum;

  std::ostringstream header;
  header << "generated kind=" << to_string(spec.kind) << " dim=" << spec.dim << " seed=" << spec.seed
         << " rng=" << kRngAlgorithm;
  if (spec.params.gap > 0.0) header << " gap=" << num(spec.params.gap) << " model_dim=" << spec.params.model_dim;
  if (spec.kind != ProblemKind::PlantedSpectrum) header << " coupling=" << num(spec.params.coupling);

  const auto problem = generate(spec);
  if (const auto* o = std::get_if<ObservableMatrix>(&problem)) {
    io::write_matrix_file(g.out, o->matrix(), {header.str()});
    std::cout << "wrote " << g.out << " fnv1a=" << hex(fingerprint(o->matrix())) << '\n';
    return 0;
  }
  const auto& cs = std::get<CommutingSet>(problem);
  for (std::size_t s = 0; s < cs.size(); ++s) {
    const std::string path = g.out + "." + std::to_string(s + 1);
    io::write_matrix_file(path, cs[s].matrix(),
                          {header.str() + " member=" + std::to_string(s + 1) + "/" +
                           std::to_string(cs.size())});
    std::cout << "wrote " << path << " fnv1a=" << hex(fingerprint(cs[s].matrix())) << '\n';
  }
  return 0;
}

// ---- solve-direct

struct DirectOptions {
  std::string matrix, j, k, out_s;
};

int run_solve_direct(const DirectOptions& d) {
  const auto o = load_observable(d.matrix);
  const auto sel = select_eigenvectors(eigendecompose(o), io::to_zero_based(one_based_list(d.j)));
  const ModelSpace ms = d.k.empty() ? pivoted_model_space(sel.vectors)
                                    : ModelSpace::from_one_based(o.dim(), one_based_list(d.k));
  if (ms.dim() != sel.dim())
    throw Error(ErrorCode::DimensionMismatch, "|K| = " + std::to_string(ms.dim()) +
                                                  " but |J| = " + std::to_string(sel.dim()));
  const DecouplingMap dm = construct_s_direct(sel, ms);
  const EffectiveOperator eo = first_type(o, dm);

  print_input(std::cout, d.matrix, o);
  std::cout << "J=" << format_indices(sel.indices) << " K=" << format_indices(ms.indices()) << '\n';
  std::cout << "cond " << num(condition_number(p_rows(sel.vectors, ms))) << '\n';
  std::cout << "residual " << num(eo.residual) << '\n';
  print_eigenvalues(std::cout, eo.eigenvalues());
  if (!d.out_s.empty()) {
    io::write_decoupling_map_file(d.out_s, dm);
    std::cout << "wrote " << d.out_s << '\n';
  }
  return 0;
}

// ---- solve-iter

struct IterOptions {
  std::string matrix, k, initial_s, out_s;
  double tol = 1e-11;
  int max_iter = 500;
};

void print_history(std::ostream& out, const SolverTrace& trace) {
  for (const auto& st : trace.steps)
    out << "iteration " << st.iteration << " residual " << num(st.residual) << " step " << num(st.step)
        << '\n';
  if (!residual_history(trace).monotone_decreasing) out << "# residual history is not monotone\n";
}

int run_solve_iter(const IterOptions& it) {
  const auto o = load_observable(it.matrix);
  const ModelSpace ms = ModelSpace::from_one_based(o.dim(), one_based_list(it.k));
  SolverConfig cfg;
  cfg.tol = it.tol;
  cfg.max_iter = it.max_iter;
  if (!it.initial_s.empty()) {
    const auto init = io::read_decoupling_map_file(it.initial_s);
    if (!(init.model_space() == ms))
      throw Error(ErrorCode::DimensionMismatch, "initial s was written for a different K");
    cfg.initial_s = init.s();
  }

  print_input(std::cout, it.matrix, o);
  std::cout << "K=" << format_indices(ms.indices()) << " tol=" << num(cfg.tol)
            << " max_iter=" << cfg.max_iter << '\n';
  try {
    const auto res = solve_decoupling_fixed_point(o, ms, cfg);
    print_history(std::cout, res.trace);
    std::cout << "converged iterations=" << res.trace.steps.size() << '\n';
    std::cout << "s\n";
    io::write_matrix(std::cout, res.map.s());
    print_eigenvalues(std::cout, first_type(o, res.map).eigenvalues());
    if (!it.out_s.empty()) {
      io::write_decoupling_map_file(it.out_s, res.map);
      std::cout << "wrote " << it.out_s << '\n';
    }
  } catch (const SolverError& e) {
    print_history(std::cout, e.best().trace);
    const auto& best = e.best().map;
    std::cout << "best iteration=" << best.provenance().iterations
              << " residual=" << num(best.provenance().residual) << '\n';
    if (!it.out_s.empty()) io::write_decoupling_map_file(it.out_s, best);
    throw;
  }
  return 0;
}

// ---- effective

struct EffectiveOptions {
  std::string matrix, s, k, out;
  bool second = false;
};

int run_effective(const EffectiveOptions& e) {
  const auto o = load_observable(e.matrix);
  const DecouplingMap dm = io::read_decoupling_map_file(e.s);
  if (dm.total_dim() != o.dim())
    throw Error(ErrorCode::DimensionMismatch, "s file is for N=" + std::to_string(dm.total_dim()) +
                                                  ", matrix has N=" + std::to_string(o.dim()));
  if (!e.k.empty() && !(ModelSpace::from_one_based(o.dim(), one_based_list(e.k)) == dm.model_space()))
    throw Error(ErrorCode::DimensionMismatch,
                "--K disagrees with the s file (K=" + format_indices(dm.model_space().indices()) + ")");

  print_input(std::cout, e.matrix, o);
  const double residual = decoupling_residual(o, dm);
  std::cout << "K=" << format_indices(dm.model_space().indices()) << '\n';
  std::cout << "residual " << num(residual) << '\n';
  if (e.second) {
    const auto ot = second_type(o, dm);
    std::ofstream out(e.out);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + e.out);
    io::write_effective(out, ot.matrix, dm.model_space(), dm.provenance(), residual, "second");
    print_eigenvalues(std::cout, general_eigenvalues(ot.matrix));
  } else {
    const auto eo = first_type(o, dm);
    std::ofstream out(e.out);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + e.out);
    io::write_effective(out, eo.matrix, dm.model_space(), dm.provenance(), residual, "first");
    print_eigenvalues(std::cout, eo.eigenvalues());
  }
  std::cout << "wrote " << e.out << '\n';
  return 0;
}

// ---- enumerate

struct EnumerateOptions {
  std::string matrix, j;
  double cap = kDefaultCondCap;
};

int run_enumerate(const EnumerateOptions& en) {
  const auto o = load_observable(en.matrix);
  const auto sel = select_eigenvectors(eigendecompose(o), io::to_zero_based(one_based_list(en.j)));
  const auto found = enumerate_model_spaces(sel, en.cap);
  print_input(std::cout, en.matrix, o);
  std::cout << "J=" << format_indices(sel.indices) << " legitimate=" << found.size()
            << " of " << binomial(o.dim(), sel.dim()) << '\n';
  for (const auto& c : found)
    std::cout << "K=" << format_indices(c.space.indices()) << " cond " << num(c.condition_number) << '\n';
  return 0;
}

// ---- decompose

struct DecomposeOptions {
  std::string set, plan;
};

int run_decompose(const DecomposeOptions& dc) {
  std::vector<ObservableMatrix> members;
  std::stringstream paths(dc.set);
  std::vector<std::string> names;
  for (std::string p; std::getline(paths, p, ',');) {
    names.push_back(p);
    members.push_back(load_observable(p));
  }
  if (members.empty()) throw Error(ErrorCode::InvalidSpec, "--set names no files");
  const CommutingSet cs = verify_commuting(std::move(members));
  const Index n = cs.dim();

  std::vector<std::vector<Index>> selections;
  std::vector<ModelSpace> spaces;
  for (const auto& blk : io::read_plan_file(dc.plan)) {
    selections.push_back(io::to_zero_based(blk.j));
    spaces.push_back(ModelSpace::from_one_based(n, blk.k));
  }
  const auto dec = decompose_space(cs, selections, spaces);

  for (std::size_t s = 0; s < cs.size(); ++s) print_input(std::cout, names[s], cs[s]);
  Report rep;
  for (std::size_t r = 0; r < dec.blocks.size(); ++r) {
    const auto& blk = dec.blocks[r];
    std::cout << "block " << r + 1 << " J=" << format_indices(blk.selection)
              << " K=" << format_indices(blk.map.model_space().indices()) << '\n';
    for (std::size_t s = 0; s < cs.size(); ++s) {
      std::cout << "member " << s + 1 << '\n';
      print_eigenvalues(std::cout, blk.pairs[s].first.eigenvalues());
      rep.record("decompose.block_decoupling", decoupling_residual(cs[s], blk.map),
                 decoupling_tolerance(cs[s]));
    }
  }
  for (std::size_t s = 0; s < cs.size(); ++s) {
    const auto& m = dec.spectrum_union[s];
    rep.record("decompose.spectrum_union.member" + std::to_string(s + 1),
               m.matched ? m.max_relative_deviation : std::numeric_limits<double>::infinity(), 1e-9);
  }
  rep.print(std::cout);
  if (!rep.all_passed()) throw CheckFailed{"decomposition checks failed"};
  return 0;
}

// ---- verify

struct VerifyOptions {
  std::string matrix;
  VerifyConfig cfg;
};

int run_verify(const VerifyOptions& v) {
  const auto o = load_observable(v.matrix);
  print_input(std::cout, v.matrix, o);
  const Report rep = verify_invariants(o, v.cfg);
  rep.print(std::cout);
  std::size_t failed = 0;
  for (const auto& c : rep.checks()) failed += c.passed ? 0 : 1;
  std::cout << "SUMMARY " << (failed == 0 ? "pass" : "fail") << " checks=" << rep.checks().size()
            << " failed=" << failed << '\n';
  if (failed) throw CheckFailed{std::to_string(failed) + " invariant check(s) failed"};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"effop: effective operators by decoupling similarity transforms"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* c_gen = app.add_subcommand("gen", "generate a seeded test problem");
  c_gen->add_option("--kind", gen.kind, "random_hermitian|planted_spectrum|tridiagonal_chain|commuting_family")
      ->required();
  c_gen->add_option("--dim", gen.dim, "dimension N")->required();
  c_gen->add_option("--seed", gen.seed, "PRNG seed")->required();
  c_gen->add_option("--out", gen.out, "output file (commuting_family writes FILE.1 ... FILE.c)")
      ->required();
  c_gen->add_option("--gap", gen.gap, "random_hermitian: spectral gap above the model states");
  c_gen->add_option("--model-dim", gen.model_dim, "random_hermitian with --gap: number of low states");
  c_gen->add_option("--coupling", gen.coupling, "off-diagonal coupling strength");
  c_gen->add_option("--family-size", gen.family_size, "commuting_family: number of members");
  c_gen->add_option("--spectrum", gen.spectrum, "planted_spectrum: N eigenvalues")->delimiter(',');

  DirectOptions direct;
  auto* c_direct = app.add_subcommand("solve-direct", "s from selected eigenvectors");
  c_direct->add_option("--matrix", direct.matrix, "observable file")->required();
  c_direct->add_option("--J", direct.j, "eigenvector indices, 1-based ascending order")->required();
  c_direct->add_option("--K", direct.k, "model-space indices (default: pivoted choice)");
  c_direct->add_option("--out-s", direct.out_s, "write s to this file");

  IterOptions iter;
  auto* c_iter = app.add_subcommand("solve-iter", "s by fixed-point iteration");
  c_iter->add_option("--matrix", iter.matrix, "observable file")->required();
  c_iter->add_option("--K", iter.k, "model-space indices")->required();
  c_iter->add_option("--tol", iter.tol, "convergence tolerance");
  c_iter->add_option("--max-iter", iter.max_iter, "iteration cap");
  c_iter->add_option("--initial-s", iter.initial_s, "starting s file (default 0)");
  c_iter->add_option("--out-s", iter.out_s, "write s (or the best iterate) to this file");

  EffectiveOptions eff;
  auto* c_eff = app.add_subcommand("effective", "effective operator from an s file");
  c_eff->add_option("--matrix", eff.matrix, "observable file")->required();
  c_eff->add_option("--s", eff.s, "s file")->required();
  c_eff->add_option("--K", eff.k, "model-space indices (checked against the s file)");
  c_eff->add_flag("--second-type", eff.second, "Hermitian second-type representative");
  c_eff->add_option("--out", eff.out, "output file")->required();

  EnumerateOptions en;
  auto* c_en = app.add_subcommand("enumerate", "legitimate model spaces for J");
  c_en->add_option("--matrix", en.matrix, "observable file")->required();
  c_en->add_option("--J", en.j, "eigenvector indices")->required();
  c_en->add_option("--cap", en.cap, "condition-number cap");

  DecomposeOptions dc;
  auto* c_dc = app.add_subcommand("decompose", "block decomposition of a commuting set");
  c_dc->add_option("--set", dc.set, "comma-separated observable files")->required();
  c_dc->add_option("--plan", dc.plan, "plan file of 'block: J=.. K=..' lines")->required();

  VerifyOptions ver;
  auto* c_ver = app.add_subcommand("verify", "run the invariant suite");
  c_ver->add_option("--matrix", ver.matrix, "observable file")->required();
  c_ver->add_option("--d", ver.cfg.d, "model-space dimension");
  c_ver->add_option("--trials", ver.cfg.trials, "random trials");
  c_ver->add_option("--seed", ver.cfg.seed, "PRNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*c_gen) return run_gen(gen);
    if (*c_direct) return run_solve_direct(direct);
    if (*c_iter) return run_solve_iter(iter);
    if (*c_eff) return run_effective(eff);
    if (*c_en) return run_enumerate(en);
    if (*c_dc) return run_decompose(dc);
    if (*c_ver) return run_verify(ver);
  } catch (const Error& e) {
    std::cout.flush();
    std::cerr << "effop: " << e.what() << '\n';
    return is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const CheckFailed& e) {
    std::cout.flush();
    std::cerr << "effop: " << e.what << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "effop: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
