#include "nlts/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "nlts/errors.hpp"
#include "nlts/solver.hpp"

namespace nlts::cli {

namespace {

// ---------------------------------------------------------------------------
// Config document: "section.key = value" lines, '#' comments, strict keys.
// ---------------------------------------------------------------------------

struct ConfigDoc {
  // nonlocal.term repeats; everything else is single-valued.
  std::map<std::string, std::vector<std::pair<int, std::string>>> entries;

  bool has(const std::string& key) const { return entries.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end() || it->second.empty()) {
      throw ConfigError("missing required key '" + key + "'");
    }
    if (it->second.size() > 1) {
      throw ConfigError("key '" + key + "' given more than once");
    }
    return it->second.front().second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "operator.kind",      "operator.eigenvalues", "operator.L",
      "operator.nx",        "operator.u_const",     "operator.u_file",
      "operator.smoothness",
      "problem.T",          "problem.psi0",
      "nonlocal.term",
      "potential.kind",     "potential.c",          "potential.a",
      "potential.f",        "potential.phase",      "potential.profile_file",
      "solver.N",           "solver.n",             "solver.delta",
      "solver.err_tol",     "solver.max_it",        "solver.panels",
      "solver.workers",     "solver.strict_alg1",   "solver.route",
      "solver.zero_box",
      "propagate.s",        "propagate.phi",
      "converge.target",    "converge.n_values",    "converge.N_values",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

ConfigDoc parse_config(const std::string& text) {
  ConfigDoc doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!known_keys().count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (key != "nonlocal.term" && doc.entries.count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
    }
    doc.entries[key].emplace_back(lineno, value);
  }
  return doc;
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("could not parse '" + s + "' as a number for " + what);
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("could not parse '" + s + "' as an integer for " + what);
  }
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("could not parse '" + s + "' as a boolean for " + what);
}

// "a", "a+bi" or "a-bi".
Complex parse_complex(const std::string& raw, const std::string& what) {
  std::string s;
  for (char c : raw) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.empty()) throw ConfigError("empty complex value for " + what);
  if (s.back() == 'i') {
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size() - 1; k > 0; --k) {
      const char c = s[k];
      if ((c == '+' || c == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
        split = k;
        break;
      }
    }
    if (split == std::string::npos) {
      throw ConfigError("could not parse '" + raw + "' as complex for " + what +
                        " (use a+bi)");
    }
    const double re = parse_real(s.substr(0, split), what);
    std::string im_str = s.substr(split, s.size() - split - 1);
    if (im_str == "+" || im_str == "-") im_str += "1";
    const double im = parse_real(im_str, what);
    return Complex(re, im);
  }
  return Complex(parse_real(s, what), 0.0);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<Complex> parse_complex_list(const std::string& s, const std::string& what) {
  std::vector<Complex> out;
  for (const std::string& item : split(s, ',')) {
    if (item.empty()) throw ConfigError("empty item in list for " + what);
    out.push_back(parse_complex(item, what));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& item : split(s, ',')) {
    if (item.empty()) throw ConfigError("empty item in list for " + what);
    out.push_back(parse_int(item, what));
  }
  return out;
}

std::vector<Complex> read_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("could not open profile file '" + path + "'");
  std::vector<Complex> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    values.push_back(parse_complex(s, path + ":" + std::to_string(lineno)));
  }
  if (values.empty()) throw ConfigError("profile file '" + path + "' is empty");
  return values;
}

// ---------------------------------------------------------------------------
// Problem construction.
// ---------------------------------------------------------------------------

struct LoadedProblem {
  NonlocalProblem problem;
  SolverConfig solver;
  bool diagonal = false;
  std::vector<Complex> eigenvalues;
};

State eigenvector_psi0(int nx, int k) {
  if (k < 1 || k > nx) throw ConfigError("problem.psi0: eigen index out of range");
  State v(nx);
  const double pi = std::acos(-1.0);
  double vmax = 0.0;
  for (int j = 0; j < nx; ++j) {
    v[j] = Complex(std::sin(k * pi * (j + 1) / (nx + 1)), 0.0);
    vmax = std::max(vmax, std::abs(v[j]));
  }
  for (Complex& c : v) c /= vmax;
  return v;
}

LoadedProblem load_problem(const ConfigDoc& doc, int workers_override) {
  LoadedProblem lp;

  const std::string kind = doc.get("operator.kind");
  int dim = 0;
  if (kind == "diagonal") {
    lp.diagonal = true;
    lp.eigenvalues = parse_complex_list(doc.get("operator.eigenvalues"),
                                        "operator.eigenvalues");
    dim = static_cast<int>(lp.eigenvalues.size());
  } else if (kind == "fd") {
    dim = parse_int(doc.get("operator.nx"), "operator.nx");
    if (dim < 1) throw ConfigError("operator.nx must be >= 1");
  } else {
    throw ConfigError("operator.kind must be 'diagonal' or 'fd'");
  }
  const int smoothness = parse_int(doc.get_or("operator.smoothness", "8"),
                                   "operator.smoothness");
  if (smoothness < 2 || smoothness > 8) {
    throw ConfigError("operator.smoothness must lie in [2, 8]");
  }

  if (lp.diagonal) {
    lp.problem.op = std::make_shared<DiagonalOperator>(lp.eigenvalues, smoothness);
  } else {
    const double L = parse_real(doc.get("operator.L"), "operator.L");
    std::vector<double> U(dim, 0.0);
    if (doc.has("operator.u_file")) {
      const auto prof = read_profile_file(doc.get("operator.u_file"));
      if (static_cast<int>(prof.size()) != dim) {
        throw ConfigError("operator.u_file must contain nx samples");
      }
      for (int j = 0; j < dim; ++j) {
        if (prof[j].imag() != 0.0) {
          throw ConfigError("operator.u_file: static potential must be real");
        }
        U[j] = prof[j].real();
      }
    } else if (doc.has("operator.u_const")) {
      const double c = parse_real(doc.get("operator.u_const"), "operator.u_const");
      std::fill(U.begin(), U.end(), c);
    }
    lp.problem.op = std::make_shared<TridiagonalOperator>(
        fd_build(L, dim, U, smoothness));
  }

  lp.problem.T = parse_real(doc.get_or("problem.T", "1.0"), "problem.T");
  if (lp.problem.T <= 0.0) throw ConfigError("problem.T must be positive");

  std::vector<NonlocalTerm> terms;
  if (doc.has("nonlocal.term")) {
    for (const auto& [lineno, value] : doc.entries.at("nonlocal.term")) {
      const auto parts = split(value, '@');
      if (parts.size() != 2) {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": nonlocal.term must be 'alpha @ t'");
      }
      NonlocalTerm term;
      term.alpha = parse_complex(parts[0], "nonlocal.term");
      term.t = parse_real(parts[1], "nonlocal.term");
      terms.push_back(term);
    }
  }
  lp.problem.cond = NonlocalCondition(std::move(terms), lp.problem.T);

  const std::string psi0 = doc.get_or("problem.psi0", "");
  if (psi0.rfind("eigen", 0) == 0) {
    if (lp.diagonal) throw ConfigError("problem.psi0 'eigen k' requires operator.kind=fd");
    lp.problem.psi0 = eigenvector_psi0(dim, parse_int(trim(psi0.substr(5)),
                                                      "problem.psi0"));
  } else if (!psi0.empty()) {
    lp.problem.psi0 = parse_complex_list(psi0, "problem.psi0");
    if (static_cast<int>(lp.problem.psi0.size()) != dim) {
      throw ConfigError("problem.psi0 must have operator dimension (" +
                        std::to_string(dim) + ") entries");
    }
  } else {
    throw ConfigError("missing required key 'problem.psi0'");
  }

  const std::string pot = doc.get_or("potential.kind", "none");
  if (pot == "none") {
    lp.problem.potential = zero_potential(dim);
  } else if (pot == "constant") {
    lp.problem.potential =
        constant_potential(dim, parse_complex(doc.get("potential.c"), "potential.c"));
  } else if (pot == "cosine") {
    lp.problem.potential = cosine_potential(
        dim, parse_real(doc.get("potential.a"), "potential.a"),
        parse_real(doc.get("potential.f"), "potential.f"),
        parse_real(doc.get_or("potential.phase", "0"), "potential.phase"));
  } else if (pot == "separable") {
    auto profile = read_profile_file(doc.get("potential.profile_file"));
    if (static_cast<int>(profile.size()) != dim) {
      throw ConfigError("potential.profile_file must contain operator-dimension samples");
    }
    lp.problem.potential = separable_potential(
        parse_real(doc.get("potential.a"), "potential.a"),
        parse_real(doc.get("potential.f"), "potential.f"), std::move(profile));
  } else {
    throw ConfigError("potential.kind must be none|constant|cosine|separable");
  }

  SolverConfig& sc = lp.solver;
  sc.N = parse_int(doc.get_or("solver.N", "8"), "solver.N");
  if (sc.N < 1) throw ConfigError("solver.N must be >= 1");
  sc.n = parse_int(doc.get_or("solver.n", "80"), "solver.n");
  if (sc.n < 1) throw ConfigError("solver.n must be >= 1");
  sc.delta = parse_real(doc.get_or("solver.delta", "4"), "solver.delta");
  if (sc.delta < 2.0) throw ConfigError("solver.delta must be >= 2");
  sc.err_tol = parse_real(doc.get_or("solver.err_tol", "1e-8"), "solver.err_tol");
  if (sc.err_tol <= 0.0) throw ConfigError("solver.err_tol must be positive");
  sc.max_it = parse_int(doc.get_or("solver.max_it", "50"), "solver.max_it");
  if (sc.max_it < 1) throw ConfigError("solver.max_it must be >= 1");
  sc.panels = parse_int(doc.get_or("solver.panels", "4"), "solver.panels");
  if (sc.panels < 1) throw ConfigError("solver.panels must be >= 1");
  sc.strict_alg1 =
      parse_bool(doc.get_or("solver.strict_alg1", "false"), "solver.strict_alg1");
  const std::string route = doc.get_or("solver.route", "auto");
  if (route == "auto") {
    sc.route = IterationRoute::kAuto;
  } else if (route == "fused") {
    sc.route = IterationRoute::kFused;
  } else if (route == "composite") {
    sc.route = IterationRoute::kComposite;
  } else {
    throw ConfigError("solver.route must be auto|fused|composite");
  }
  if (doc.has("solver.zero_box")) {
    std::istringstream bs(doc.get("solver.zero_box"));
    Box box;
    if (!(bs >> box.re_lo >> box.re_hi >> box.im_lo >> box.im_hi)) {
      throw ConfigError("solver.zero_box must be 're_lo re_hi im_lo im_hi'");
    }
    if (!(box.re_hi > box.re_lo) || !(box.im_hi > box.im_lo)) {
      throw ConfigError("solver.zero_box: degenerate rectangle");
    }
    sc.zero_box = box;
  }

  // Worker precedence: config < NLTS_WORKERS < --workers.
  sc.workers = parse_int(doc.get_or("solver.workers", "1"), "solver.workers");
  if (const char* env = std::getenv("NLTS_WORKERS")) {
    sc.workers = parse_int(env, "NLTS_WORKERS");
  }
  if (workers_override > 0) sc.workers = workers_override;
  if (sc.workers < 1) throw ConfigError("workers must be >= 1");

  return lp;
}

// ---------------------------------------------------------------------------
// Output helpers.
// ---------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class ReportWriter {
public:
  void add(const std::string& key, const std::string& value) {
    lines_.push_back(key + " = " + value);
  }
  void add(const std::string& key, double value) { add(key, fmt(value)); }
  void add(const std::string& key, long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    for (const std::string& line : lines_) out << line << "\n";
  }

private:
  std::vector<std::string> lines_;
};

std::filesystem::path ensure_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

void add_iteration_report(ReportWriter& report, const IterationReport& rep) {
  report.add("iterations", rep.iterations);
  report.add("converged", rep.converged ? 1 : 0);
  report.add("resolvent_solves", rep.resolvent_solve_count);
  report.add("h_used", rep.h_used);
  report.add("h_inhom", rep.h_used);  // single step size, recorded explicitly
  report.add("d_c", rep.d_c);
  report.add("sigma", rep.sigma);
  report.add("eta", rep.eta);
  report.add("z0", rep.z0);
  report.add("route", rep.route_used);
  report.add("separation_ok", rep.separation.ok ? 1 : 0);
  report.add("separation_min_distance", rep.separation.min_distance);
  for (std::size_t k = 0; k < rep.errors.size(); ++k) {
    report.add("err_" + std::to_string(k + 1), rep.errors[k]);
  }
  for (std::size_t k = 0; k < rep.contraction_estimates.size(); ++k) {
    report.add("contraction_" + std::to_string(k + 2), rep.contraction_estimates[k]);
  }
}

// Scalar ODE reference psi' = (-i lambda + V(t)) psi used by cmd_converge.
Complex scalar_fundamental(Complex lambda, const Potential& pot, double t) {
  if (t == 0.0) return Complex(1.0, 0.0);
  const int steps = std::max(2000, static_cast<int>(std::ceil(t * 200000.0)));
  const double h = t / steps;
  auto rhs = [&](double s, Complex y) {
    const Complex v = pot.zero ? Complex(0.0) : pot.factor_at(s);
    return (Complex(0.0, -1.0) * lambda + v) * y;
  };
  Complex y(1.0, 0.0);
  double s = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Complex k1 = rhs(s, y);
    const Complex k2 = rhs(s + h / 2, y + h / 2 * k1);
    const Complex k3 = rhs(s + h / 2, y + h / 2 * k2);
    const Complex k4 = rhs(s + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s += h;
  }
  return y;
}

std::vector<Complex> scalar_oracle_trajectory(const LoadedProblem& lp,
                                              const std::vector<double>& times) {
  const Complex lambda = lp.eigenvalues.at(0);
  Complex denom(1.0, 0.0);
  for (const NonlocalTerm& term : lp.problem.cond.terms) {
    denom += term.alpha * scalar_fundamental(lambda, lp.problem.potential, term.t);
  }
  const Complex psi_start = lp.problem.psi0.at(0) / denom;
  std::vector<Complex> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    out[k] = scalar_fundamental(lambda, lp.problem.potential, times[k]) * psi_start;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int cmd_solve(const LoadedProblem& lp, const std::filesystem::path& out_dir) {
  SolveContext ctx = assemble(lp.problem, lp.solver);
  const SolveResult result = solve(ctx);

  std::ofstream csv(out_dir / "trajectory.csv");
  csv << "t,node_index,component_index,re,im\n";
  const int N = result.trajectory.grid.N;
  for (int p = 0; p <= N; ++p) {
    for (std::size_t j = 0; j < result.trajectory.values[p].size(); ++j) {
      const Complex v = result.trajectory.values[p][j];
      csv << fmt(result.trajectory.times[p]) << ',' << p << ',' << j << ','
          << fmt(v.real()) << ',' << fmt(v.imag()) << "\n";
    }
  }

  ReportWriter report;
  report.add("command", "solve");
  report.add("status", result.report.converged ? "converged" : "not_converged");
  report.add("grid_N", lp.solver.N);
  report.add("quadrature_n", lp.solver.n);
  report.add("delta", lp.solver.delta);
  report.add("workers", lp.solver.workers);
  add_iteration_report(report, result.report);
  report.write(out_dir / "report.txt");

  if (!result.report.converged) {
    std::cerr << "solve: not converged after " << result.report.iterations
              << " iterations (err = " << result.report.errors.back() << ")\n";
    return 3;
  }
  return 0;
}

int cmd_zeros(const LoadedProblem& lp, const std::filesystem::path& out_dir) {
  const ZeroScan scan = scan_zeros(lp.problem, lp.solver);

  std::ofstream csv(out_dir / "zeros.csv");
  csv << "function,re,im,residual\n";
  for (const Complex& zk : scan.zeros_b) {
    csv << "b," << fmt(zk.real()) << ',' << fmt(zk.imag()) << ','
        << fmt(std::abs(b_of_z(lp.problem.cond, zk))) << "\n";
  }
  for (const Complex& zk : scan.zeros_bN) {
    csv << "b_N," << fmt(zk.real()) << ',' << fmt(zk.imag()) << ','
        << fmt(std::abs(bN_of_z(scan.grid, scan.a, zk))) << "\n";
  }

  ReportWriter report;
  report.add("command", "zeros");
  report.add("status", scan.separation.ok ? "ok" : "separation_failure");
  report.add("zeros_b_count", static_cast<int>(scan.zeros_b.size()));
  report.add("zeros_bN_count", static_cast<int>(scan.zeros_bN.size()));
  report.add("separation_ok", scan.separation.ok ? 1 : 0);
  report.add("separation_min_distance", scan.separation.min_distance);
  if (scan.separation.offending) {
    report.add("offending_zero_re", scan.separation.offending->real());
    report.add("offending_zero_im", scan.separation.offending->imag());
  }
  report.write(out_dir / "report.txt");

  if (!scan.separation.ok) {
    const Complex bad = *scan.separation.offending;
    std::cerr << "zeros: separation failure, zero at (" << bad.real() << ", "
              << bad.imag() << ") inside the region bounded by Gamma_0\n";
    return 2;
  }
  return 0;
}

int cmd_contour(const LoadedProblem& lp, const std::filesystem::path& out_dir) {
  const ZeroScan scan = scan_zeros(lp.problem, lp.solver);
  if (!scan.separation.ok) {
    const Complex bad = *scan.separation.offending;
    std::cerr << "contour: separation failure, zero at (" << bad.real() << ", "
              << bad.imag() << ")\n";
    return 2;
  }
  const auto [contour, d_c] = adjust_for_zeros(scan.base_contour, scan.zeros_union_s);

  std::ofstream csv(out_dir / "contour.csv");
  csv << "curve,nu,re,im\n";
  const int count = 513;
  for (int i = 0; i < count; ++i) {
    const double nu = -8.0 + 16.0 * i / (count - 1);
    const Complex zi = z(contour, nu);
    csv << "gamma_I," << fmt(nu) << ',' << fmt(zi.real()) << ',' << fmt(zi.imag())
        << "\n";
  }
  for (int i = 0; i < count; ++i) {
    const double nu = -8.0 + 16.0 * i / (count - 1);
    const Complex gi = gamma0(scan.base_contour, nu);
    csv << "gamma_0," << fmt(nu) << ',' << fmt(gi.real()) << ',' << fmt(gi.imag())
        << "\n";
  }

  ReportWriter report;
  report.add("command", "contour");
  report.add("status", "ok");
  report.add("c_I", contour.c_I);
  report.add("a_I", contour.a_I);
  report.add("d_I", contour.d_I);
  report.add("d", contour.d);
  report.add("d_c", d_c);
  report.add("sigma", contour.sigma);
  report.add("eta", contour.eta);
  report.add("separation_min_distance", scan.separation.min_distance);
  report.write(out_dir / "report.txt");
  return 0;
}

int cmd_propagate(const LoadedProblem& lp, const ConfigDoc& doc,
                  const std::filesystem::path& out_dir) {
  const double s = parse_real(doc.get_or("propagate.s", "1.0"), "propagate.s");
  if (s < 0.0) throw ConfigError("propagate.s must be >= 0");
  State phi = lp.problem.psi0;
  if (doc.has("propagate.phi")) {
    phi = parse_complex_list(doc.get("propagate.phi"), "propagate.phi");
    if (static_cast<int>(phi.size()) != lp.problem.op->dim()) {
      throw ConfigError("propagate.phi must have operator dimension entries");
    }
  }

  const HyperbolicContour contour =
      build_contour(lp.problem.op->envelope(), std::acos(-1.0) / 6.0);
  const QuadratureParams rule =
      make_quadrature(lp.solver.n, lp.solver.delta, std::acos(-1.0) / 6.0);
  PropagatorEngine engine(lp.problem.op, contour, rule, lp.solver.workers);
  const State result = engine.propagate_hom(s, phi);

  std::ofstream csv(out_dir / "propagate.csv");
  const bool oracle = lp.diagonal;
  csv << "component_index,re,im" << (oracle ? ",oracle_re,oracle_im,abs_error" : "")
      << "\n";
  double max_err = 0.0;
  for (std::size_t j = 0; j < result.size(); ++j) {
    csv << j << ',' << fmt(result[j].real()) << ',' << fmt(result[j].imag());
    if (oracle) {
      const Complex expect = std::exp(Complex(0.0, -s) * lp.eigenvalues[j]) * phi[j];
      const double err = std::abs(result[j] - expect);
      max_err = std::max(max_err, err);
      csv << ',' << fmt(expect.real()) << ',' << fmt(expect.imag()) << ',' << fmt(err);
    }
    csv << "\n";
  }

  ReportWriter report;
  report.add("command", "propagate");
  report.add("status", "ok");
  report.add("s", s);
  report.add("h_used", rule.h);
  report.add("quadrature_n", rule.n);
  report.add("resolvent_solves", lp.problem.op->solve_count());
  if (oracle) report.add("max_abs_error", max_err);
  report.write(out_dir / "report.txt");
  return 0;
}

int cmd_converge(const LoadedProblem& lp, const ConfigDoc& doc,
                 const std::filesystem::path& out_dir) {
  if (!lp.diagonal) {
    throw ConfigError("converge: the oracle sweep requires operator.kind=diagonal");
  }
  const std::string target = doc.get_or("converge.target", "propagator");
  const std::vector<int> n_values =
      parse_int_list(doc.get("converge.n_values"), "converge.n_values");

  std::ofstream csv(out_dir / "converge.csv");
  ReportWriter report;
  report.add("command", "converge");
  report.add("target", target);
  bool monotone = true;
  double prev = 0.0;

  if (target == "propagator") {
    const double s = parse_real(doc.get_or("propagate.s", "1.0"), "propagate.s");
    csv << "n,error\n";
    const HyperbolicContour contour =
        build_contour(lp.problem.op->envelope(), std::acos(-1.0) / 6.0);
    for (std::size_t k = 0; k < n_values.size(); ++k) {
      const QuadratureParams rule =
          make_quadrature(n_values[k], lp.solver.delta, std::acos(-1.0) / 6.0);
      PropagatorEngine engine(lp.problem.op, contour, rule, lp.solver.workers);
      const State result = engine.propagate_hom(s, lp.problem.psi0);
      double err = 0.0;
      for (std::size_t j = 0; j < result.size(); ++j) {
        const Complex expect =
            std::exp(Complex(0.0, -s) * lp.eigenvalues[j]) * lp.problem.psi0[j];
        err = std::max(err, std::abs(result[j] - expect));
      }
      csv << n_values[k] << ',' << fmt(err) << "\n";
      if (k > 0 && err >= prev) monotone = false;
      prev = err;
    }
  } else if (target == "solver") {
    if (lp.problem.op->dim() != 1) {
      throw ConfigError("converge: target=solver requires a one-dimensional operator");
    }
    const std::vector<int> N_values =
        parse_int_list(doc.get("converge.N_values"), "converge.N_values");
    if (N_values.size() != n_values.size()) {
      throw ConfigError("converge: N_values and n_values must have equal length");
    }
    csv << "N,n,error\n";
    for (std::size_t k = 0; k < n_values.size(); ++k) {
      SolverConfig sc = lp.solver;
      sc.N = N_values[k];
      sc.n = n_values[k];
      const SolveResult result = solve(lp.problem, sc);
      const auto oracle = scalar_oracle_trajectory(lp, result.trajectory.times);
      double err = 0.0;
      for (std::size_t p = 0; p < oracle.size(); ++p) {
        err = std::max(err, std::abs(result.trajectory.values[p][0] - oracle[p]));
      }
      csv << N_values[k] << ',' << n_values[k] << ',' << fmt(err) << "\n";
      if (k > 0 && err >= prev) monotone = false;
      prev = err;
    }
  } else {
    throw ConfigError("converge.target must be propagator|solver");
  }

  report.add("status", "ok");
  report.add("monotone_decrease", monotone ? 1 : 0);
  report.write(out_dir / "report.txt");
  return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Collocation + contour-quadrature solver for nonlocal-in-time "
               "Schrodinger problems"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  int workers_override = 0;

  app.add_option("--config", config_path, "Path to the run configuration")->required();
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--workers", workers_override, "Worker thread count override");

  // Subcommands share the global options; they carry no options of their own.
  CLI::App* sub_solve = app.add_subcommand("solve", "Run the nonlocal solver");
  CLI::App* sub_zeros = app.add_subcommand("zeros", "Locate zeros of b and b_N");
  CLI::App* sub_contour = app.add_subcommand("contour", "Emit contour traces");
  CLI::App* sub_propagate =
      app.add_subcommand("propagate", "Single propagator evaluation");
  CLI::App* sub_converge = app.add_subcommand("converge", "Error sweep over N / n");
  for (CLI::App* sub : {sub_solve, sub_zeros, sub_contour, sub_propagate, sub_converge}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << "\n";
    return 4;
  }

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "could not open config file '" << config_path << "'\n";
      return 4;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const ConfigDoc doc = parse_config(buffer.str());
    const LoadedProblem lp = load_problem(doc, workers_override);
    const std::filesystem::path out = ensure_out_dir(out_dir);

    if (sub_solve->parsed()) return cmd_solve(lp, out);
    if (sub_zeros->parsed()) return cmd_zeros(lp, out);
    if (sub_contour->parsed()) return cmd_contour(lp, out);
    if (sub_propagate->parsed()) return cmd_propagate(lp, doc, out);
    if (sub_converge->parsed()) return cmd_converge(lp, doc, out);
    std::cerr << "no subcommand selected\n";
    return 4;
  } catch (const SeparationError& e) {
    std::cerr << "separation failure: " << e.what() << " [zero at ("
              << e.offending_zero.real() << ", " << e.offending_zero.imag() << ")]\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("nlts");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace nlts::cli
