/// Command-line front end: quadrature inspection, problem summaries, limit laws,
/// analytic oracles and convergence runs with CSV output.

#include <CLI11.hpp>

#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "evohom/evohom.hpp"

namespace {

using namespace evohom;

constexpr int kExitSolver = 2;
constexpr int kExitValidation = 3;

std::string fmt(double v) { return csv_number(v); }

/// Options shared by `run` and `sweep`; unset options keep the config-file or default value.
struct RunOptions {
  std::string config;
  std::string example;
  std::string n_list;
  std::optional<int> n;
  std::optional<double> rho;
  std::optional<int> slabs;
  std::optional<int> degree;
  std::optional<int> ref_n;
  std::optional<int> ref_degree;
  unsigned threads = 0;
  std::string out;
  bool quiet = false;
};

ExperimentSpec make_spec(const RunOptions& o) {
  ExperimentSpec spec;
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    if (!is) throw ValidationError("cannot open config file '" + o.config + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    spec = parse_config(ss.str());
  }
  if (!o.example.empty()) spec.example = parse_example(o.example);
  if (!o.n_list.empty()) spec.n_list = parse_int_list(o.n_list);
  if (o.n) spec.n_list = {*o.n};
  if (o.rho) spec.rho = *o.rho;
  if (o.slabs) spec.slabs = *o.slabs;
  if (o.degree) spec.degree = *o.degree;
  if (o.ref_n) spec.ref_n = *o.ref_n;
  if (o.ref_degree) spec.ref_degree = *o.ref_degree;
  validate(spec);
  return spec;
}

int cmd_quadrature(double h, double rho, double t0) {
  const WeightedRadauRule r = build_radau_rule(t0, t0 + h, rho);
  const std::vector<double> mom = weighted_moments(h, rho, 3);
  std::cout << "kind,index,value\n";
  for (int i = 0; i < 2; ++i) std::cout << "node," << i << ',' << fmt(r.nodes[i]) << '\n';
  for (int i = 0; i < 2; ++i) std::cout << "weight," << i << ',' << fmt(r.weights[i]) << '\n';
  for (int k = 0; k <= 3; ++k) std::cout << "moment," << k << ',' << fmt(mom[k]) << '\n';
  return 0;
}

int cmd_describe(const std::string& example, int n, int degree) {
  const ExampleId id = parse_example(example);
  const Mesh mesh = example_mesh(id, n);
  const MaterialLaw law = sequence_law(id, n);
  ExperimentSpec spec;
  spec.example = id;
  spec.degree = degree;
  const EvolutionProblem p = make_problem(id, mesh, degree, law, spec);
  std::cout << "example " << to_string(id) << ", n = " << n << "\n";
  std::cout << "mesh: " << mesh.dimension << "D, " << mesh.x.cells() << " x " << mesh.y.cells() << " cells on ("
            << mesh.x.lo() << ", " << mesh.x.hi() << ")";
  if (mesh.dimension == 2) std::cout << " x (" << mesh.y.lo() << ", " << mesh.y.hi() << ")";
  std::cout << "\n";
  for (int s = 0; s < p.space.slot_count(); ++s) {
    const Slot& sl = p.space.slot(s);
    std::cout << "slot " << sl.name << " [offset " << sl.offset << "]: " << sl.space.describe() << "\n";
  }
  std::cout << "unknowns: " << p.space.ndofs() << " per time level, " << 2 * p.space.ndofs() << " per slab\n";
  std::cout << "operator: " << to_string(p.A.structure) << ", skew defect " << p.A.skew_defect() << "\n";
  for (const DecompositionPart& part : p.A.parts) {
    long count = 0;
    for (char c : part.mask) count += c;
    std::cout << "part " << part.name << ": " << count << " dofs\n";
  }
  std::cout << "law:\n" << law_to_text(p.law);
  return 0;
}

int cmd_limits(const std::string& example) {
  const ExampleId id = parse_example(example);
  const MaterialLaw law = build_limit_law(id);
  std::cout << law_to_text(law) << "\n";
  std::cout << "quantity,region,value\n";
  const Point inside{0.0, 0.0, 0.0};
  const Point outside{1.5, 1.5, 1.5};
  for (int s = 0; s < law.size(); ++s) {
    const std::string& name = law.slots[s];
    std::cout << "m0[" << name << "],inside," << fmt(law.entries[s].m0(inside)) << '\n';
    std::cout << "m1[" << name << "],inside," << fmt(law.entries[s].m1(inside)) << '\n';
    if (id == ExampleId::EX4 || id == ExampleId::EX5 || id == ExampleId::MAXWELL) {
      std::cout << "m0[" << name << "],outside," << fmt(law.entries[s].m0(outside)) << '\n';
      std::cout << "m1[" << name << "],outside," << fmt(law.entries[s].m1(outside)) << '\n';
    }
  }
  // Numeric homogenisation of the periodic cell coefficients behind the closed forms.
  const CoefficientField o = CoefficientField::stripe(1);
  const CoefficientField one = 1.0;
  if (id == ExampleId::EX2 || id == ExampleId::EX4) {
    std::cout << "mean(1_O),cell," << fmt(integral_mean(o)) << '\n';
    std::cout << "mean(1-1_O),cell," << fmt(integral_mean(one - o)) << '\n';
  }
  if (id == ExampleId::EX4) {
    const EffectiveTensor t = dual_stratified_limit({{one + o, 0.0}, {0.0, one + o}});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        std::cout << "dual_limit((1+1_O)I)(" << i << ',' << j << "),cell," << fmt(t.value(i, j)) << '\n';
  }
  if (id == ExampleId::EX5) std::cout << "mean(1+1_O),cell," << fmt(integral_mean(one + o)) << '\n';
  return 0;
}

int cmd_oracle(const std::string& which, int n, double t, double x, double zr, double zi, const std::string& signal) {
  const TimeSignal sig = signal == "sine" ? TimeSignal::sine() : TimeSignal::unit_step();
  if (signal != "sine" && signal != "step") throw ValidationError("oracle: --signal must be step or sine");
  std::cout << "quantity,value\n";
  if (which == "ode") {
    std::cout << "u_n(t;x)," << fmt(ode_exact(n, t, x, sig)) << '\n';
  } else if (which == "hom") {
    std::cout << "u_hom(t)," << fmt(ode_hom_exact(t, sig)) << '\n';
  } else if (which == "series") {
    const SeriesValue s = series_material_law({zr, zi});
    const std::complex<double> c = series_material_law_closed({zr, zi});
    std::cout << "re," << fmt(s.value.real()) << "\nim," << fmt(s.value.imag()) << "\ntail_bound," << fmt(s.tail_bound)
              << "\nclosed_re," << fmt(c.real()) << "\nclosed_im," << fmt(c.imag()) << '\n';
  } else if (which == "i0") {
    std::cout << "I0(x)," << fmt(bessel_i0(x)) << "\nint_0^x I0," << fmt(bessel_i0_integral(x)) << '\n';
  } else {
    throw ValidationError("oracle: --which must be one of ode, hom, series, i0");
  }
  return 0;
}

int cmd_sweep(const RunOptions& o) {
  const ExperimentSpec spec = make_spec(o);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw ValidationError("cannot open output file '" + o.out + "'");
    os = &file;
  }
  write_csv_header(*os);
  const ProgressFn progress = o.quiet ? ProgressFn{} : [](const std::string& s) { std::cerr << s << "\n"; };
  convergence_sweep(spec, progress, os, o.threads);
  return 0;
}

void add_run_options(CLI::App* sub, RunOptions& o, bool single) {
  sub->add_option("--config", o.config, "key = value file mirroring the experiment fields");
  sub->add_option("--example", o.example, "EX1 .. EX5");
  if (single)
    sub->add_option("--n", o.n, "oscillation index")->required();
  else
    sub->add_option("--n-list", o.n_list, "comma separated oscillation indices");
  sub->add_option("--rho", o.rho, "exponential weight of the time quadrature");
  sub->add_option("--slabs", o.slabs, "number of time slabs M");
  sub->add_option("--degree", o.degree, "element degree k (H1: P_{k+1}, flux: RT_k)");
  sub->add_option("--ref-n", o.ref_n, "mesh index of the homogenised reference");
  sub->add_option("--ref-degree", o.ref_degree, "element degree of the reference");
  sub->add_option("--threads", o.threads, "worker threads for sweep items (0: all cores)");
  sub->add_option("--out", o.out, "CSV output file (default: stdout)");
  sub->add_flag("--quiet", o.quiet, "suppress progress lines on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evohom: homogenisation experiments for evolutionary equations"};
  app.require_subcommand(1);

  double qh = 1.0, qrho = 0.0, qt0 = 0.0;
  auto* quad = app.add_subcommand("quadrature", "weighted Radau nodes, weights and moments of one slab");
  quad->add_option("--length", qh, "slab length h")->required();
  quad->add_option("--rho", qrho, "weight exponent rho (weight exp(-2 rho (t - t0)))")->required();
  quad->add_option("--t0", qt0, "slab start");

  std::string dex = "EX1";
  int dn = 1, ddeg = 0;
  auto* desc = app.add_subcommand("describe", "mesh, spaces and operator summary of a sequence problem");
  desc->add_option("--example", dex, "EX1 .. EX5");
  desc->add_option("--n", dn, "oscillation index");
  desc->add_option("--degree", ddeg, "element degree k");

  std::string lex;
  auto* lim = app.add_subcommand("limits", "limit law in the text grammar plus effective tensors as CSV");
  lim->add_option("--example", lex, "EX2 .. EX5 or MAXWELL")->required();

  std::string which, signal = "step";
  int on = 1;
  double ot = 1.0, ox = 0.25, ozr = 3.0, ozi = 0.0;
  auto* orc = app.add_subcommand("oracle", "analytic oracle values");
  orc->add_option("--which", which, "ode | hom | series | i0")->required();
  orc->add_option("--n", on, "oscillation index (ode)");
  orc->add_option("--t", ot, "time (ode, hom)");
  orc->add_option("--x", ox, "position (ode) or argument (i0)");
  orc->add_option("--z-re", ozr, "Re z (series)");
  orc->add_option("--z-im", ozi, "Im z (series)");
  orc->add_option("--signal", signal, "step | sine");

  RunOptions ro, so;
  auto* run = app.add_subcommand("run", "solve one sequence problem and report its measurements");
  add_run_options(run, ro, true);
  auto* sweep = app.add_subcommand("sweep", "convergence sweep over an n-list");
  add_run_options(sweep, so, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*quad) return cmd_quadrature(qh, qrho, qt0);
    if (*desc) return cmd_describe(dex, dn, ddeg);
    if (*lim) return cmd_limits(lex);
    if (*orc) return cmd_oracle(which, on, ot, ox, ozr, ozi, signal);
    if (*run) return cmd_sweep(ro);
    if (*sweep) return cmd_sweep(so);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
