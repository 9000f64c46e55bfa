#include "nlts/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nlts/errors.hpp"
#include "nlts/gauss.hpp"
#include "nlts/parallel.hpp"

namespace nlts {

namespace {

constexpr double kPi = std::numbers::pi;

// Scalar symbol of the k-th column of S^{-1} at output time s:
//   e^{-i zeta (s - s_k)} / b_N(zeta) * bracket_k,
// bracket from the Sherman-Morrison expansion, branch selected by s >= s_k.
Complex sinv_weight(const ChebyshevGrid& grid, const std::vector<Complex>& a,
                    double s, Complex zeta, int k) {
  double amp = 0.0;
  for (const Complex& al : a) amp += std::abs(al);
  const Complex bN = bN_of_z(grid, a, zeta);
  if (std::abs(bN) < 1e-12 * (1.0 + amp)) {
    throw SeparationError("apply_S_inverse: b_N vanishes at a quadrature point", zeta);
  }
  Complex bracket(0.0, 0.0);
  if (s >= grid.nodes[k]) {
    bracket = Complex(1.0, 0.0);
    for (int p = 0; p < k; ++p) {
      bracket += a[p] * std::exp(Complex(0.0, -(grid.nodes[p] - grid.nodes[0])) * zeta);
    }
  } else {
    for (int p = k; p <= grid.N; ++p) {
      bracket -= a[p] * std::exp(Complex(0.0, -(grid.nodes[p] - grid.nodes[0])) * zeta);
    }
  }
  return std::exp(Complex(0.0, -(s - grid.nodes[k])) * zeta) * bracket / bN;
}

Potential transform_potential(const Potential& v, double T) {
  if (v.zero) return v;
  Potential out = v;
  const double gamma = T / 2.0;
  auto tf = v.time_factor;
  out.time_factor = [tf, gamma, T](double s) {
    return gamma * tf((s + 1.0) * T / 2.0);
  };
  out.lipschitz_K = gamma * gamma * v.lipschitz_K;
  out.bound_MV = gamma * v.bound_MV;
  return out;
}

void precompute_fused_weights(SolveContext& ctx) {
  const int N = ctx.grid.N;
  const int nodes = ctx.engine->node_count();
  const int panels = ctx.config.panels;
  // q_{l,j,m} = int_{s_{l-1}}^{s_l} e^{i z_m t} tf(t) L_j(t) dt  (scalar part),
  // then fused_w[k][j][m] = sum_{l=1}^{N} f(s_k, z_m, l) q_{l,j,m}.
  ctx.fused_w.assign(static_cast<std::size_t>(N + 1) * (N + 1) * nodes, Complex(0.0));
  std::vector<Complex> q(static_cast<std::size_t>(N) * (N + 1) * nodes);
  parallel_for(0, nodes, ctx.config.workers, [&](int idx) {
    const Complex zeta = ctx.engine->node_z(idx);
    for (int l = 1; l <= N; ++l) {
      for (int j = 0; j <= N; ++j) {
        Complex integral(0.0, 0.0);
        gauss8_panels(ctx.grid.nodes[l - 1], ctx.grid.nodes[l], panels,
                      [&](double t, double w) {
                        integral += w * std::exp(Complex(0.0, t) * zeta) *
                                    ctx.potential_s.factor_at(t) *
                                    lagrange(ctx.grid, j, t);
                      });
        q[(static_cast<std::size_t>(l - 1) * (N + 1) + j) * nodes + idx] = integral;
      }
    }
    const Complex bN = bN_of_z(ctx.grid, ctx.a, zeta);
    for (int k = 0; k <= N; ++k) {
      for (int l = 1; l <= N; ++l) {
        const Complex fl = f_weight(ctx.grid.nodes[k], zeta, l, ctx.grid, ctx.a, bN);
        for (int j = 0; j <= N; ++j) {
          ctx.fused_w[(static_cast<std::size_t>(k) * (N + 1) + j) * nodes + idx] +=
              fl * q[(static_cast<std::size_t>(l - 1) * (N + 1) + j) * nodes + idx];
        }
      }
    }
  });
}

std::string route_name(bool fused) { return fused ? "fused" : "composite"; }

} // namespace

double max_norm(const BlockVec& v) {
  if (v.empty()) throw ConfigError("max_norm: empty input");
  double norm = 0.0;
  for (const State& block : v) {
    for (const Complex& c : block) norm = std::max(norm, std::abs(c));
  }
  return norm;
}

namespace {

void validate_inputs(const NonlocalProblem& problem, const SolverConfig& config) {
  if (!problem.op) throw ConfigError("assemble: missing operator");
  if (problem.T <= 0.0) throw ConfigError("assemble: T must be positive");
  if (config.N < 1) throw ConfigError("assemble: N must be >= 1");
  if (config.n < 1) throw ConfigError("assemble: n must be >= 1");
  if (config.delta < 2.0) throw ConfigError("assemble: delta must be >= 2");
  if (config.err_tol <= 0.0) throw ConfigError("assemble: err_tol must be positive");
  if (config.max_it < 1) throw ConfigError("assemble: max_it must be >= 1");
  if (config.panels < 1) throw ConfigError("assemble: panels must be >= 1");
  if (static_cast<int>(problem.psi0.size()) != problem.op->dim()) {
    throw ConfigError("assemble: psi0 dimension mismatch");
  }
  if (!problem.cond.empty() && std::abs(problem.cond.T - problem.T) > 1e-14) {
    throw ConfigError("assemble: condition horizon differs from problem T");
  }
  if (!problem.potential.zero && problem.potential.dim != problem.op->dim()) {
    throw ConfigError("assemble: potential dimension mismatch");
  }
}

} // namespace

ZeroScan scan_zeros(const NonlocalProblem& problem, const SolverConfig& config) {
  validate_inputs(problem, config);
  ZeroScan scan;
  scan.grid = build_grid(config.N);
  scan.a = a_coeffs(scan.grid, problem.cond);
  const double gamma = problem.T / 2.0;
  const ScaledOperator op_s(problem.op, gamma);
  scan.base_contour = build_contour(op_s.envelope(), kPi / 6.0);

  if (!problem.cond.empty()) {
    double t_min = problem.cond.terms[0].t;
    double alpha_sum = 0.0;
    for (const NonlocalTerm& term : problem.cond.terms) {
      t_min = std::min(t_min, term.t);
      alpha_sum += std::abs(term.alpha);
    }
    const Box box_b = config.zero_box.value_or(
        default_zero_box(scan.base_contour.c_I / gamma, t_min, alpha_sum));
    scan.zeros_b = find_zeros(b_function(problem.cond), box_b);

    double w_min = 2.0;
    for (const auto& [alpha, sk] : problem.cond.s_terms) {
      w_min = std::min(w_min, sk + 1.0);
    }
    double a_sum = 0.0;
    for (const Complex& al : scan.a) a_sum += std::abs(al);
    const Box box_bN =
        config.zero_box.value_or(default_zero_box(scan.base_contour.c_I, w_min, a_sum));
    scan.zeros_bN = find_zeros(bN_function(scan.grid, scan.a), box_bN);

    for (const Complex& zb : scan.zeros_b) scan.zeros_union_s.push_back(gamma * zb);
    scan.zeros_union_s.insert(scan.zeros_union_s.end(), scan.zeros_bN.begin(),
                              scan.zeros_bN.end());
    std::sort(scan.zeros_union_s.begin(), scan.zeros_union_s.end(),
              [](const Complex& x, const Complex& y) {
                return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
              });
  }
  scan.separation = check_separation(scan.zeros_union_s, scan.base_contour);
  return scan;
}

SolveContext assemble(const NonlocalProblem& problem, const SolverConfig& config) {
  ZeroScan scan = scan_zeros(problem, config);

  SolveContext ctx;
  ctx.config = config;
  ctx.T = problem.T;
  ctx.psi0 = problem.psi0;
  ctx.grid = scan.grid;
  ctx.cond = problem.cond;
  const double gamma = problem.T / 2.0;
  ctx.op_s = std::make_shared<ScaledOperator>(problem.op, gamma);
  ctx.potential_s = transform_potential(problem.potential, problem.T);
  if (ctx.potential_s.zero) ctx.potential_s.dim = problem.op->dim();
  ctx.a = std::move(scan.a);
  ctx.zeros_b = std::move(scan.zeros_b);
  ctx.zeros_bN = std::move(scan.zeros_bN);

  ctx.separation = scan.separation;
  if (!ctx.separation.ok) {
    const Complex bad = *ctx.separation.offending;
    std::ostringstream msg;
    msg << "assemble: zero of the nonlocal symbol at (" << bad.real() << ", "
        << bad.imag() << ") lies inside the region bounded by Gamma_0";
    throw SeparationError(msg.str(), bad);
  }

  auto [adjusted, d_c] = adjust_for_zeros(scan.base_contour, scan.zeros_union_s);
  ctx.contour = adjusted;
  ctx.d_c = d_c;
  ctx.rule = make_quadrature(config.n, config.delta, kPi / 6.0);
  ctx.engine = std::make_unique<PropagatorEngine>(ctx.op_s, ctx.contour, ctx.rule,
                                                  config.workers);

  switch (config.route) {
    case IterationRoute::kFused: ctx.fused = true; break;
    case IterationRoute::kComposite: ctx.fused = false; break;
    case IterationRoute::kAuto:
      ctx.fused = ctx.potential_s.zero || ctx.potential_s.uniform() || ctx.dim() == 1;
      break;
  }
  // The literal row zeroing lives in the O_F applications of the composite
  // chain; it has no counterpart in the streamed weights.
  if (config.strict_alg1) {
    if (config.route == IterationRoute::kFused) {
      throw ConfigError("assemble: strict_alg1 requires the composite route");
    }
    ctx.fused = false;
  }
  if (ctx.fused && !ctx.potential_s.zero) precompute_fused_weights(ctx);
  return ctx;
}

BlockVec apply_C(const SolveContext& ctx, const BlockVec& phi) {
  const int N = ctx.grid.N;
  if (static_cast<int>(phi.size()) != N + 1) {
    throw ConfigError("apply_C: input must have N + 1 blocks");
  }
  BlockVec out(N + 1, State(ctx.dim(), Complex(0.0)));
  const Potential& pot = ctx.potential_s;
  for (int p = 1; p <= N; ++p) {
    auto source = [&](double t) {
      State v = interpolate(ctx.grid, phi, t);
      if (pot.zero) {
        std::fill(v.begin(), v.end(), Complex(0.0));
        return v;
      }
      const Complex f = pot.factor_at(t);
      if (pot.uniform()) {
        for (Complex& c : v) c *= f;
      } else {
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= f * pot.profile[j];
      }
      return v;
    };
    out[p] = ctx.engine->propagate_inhom(ctx.grid.nodes[p - 1], ctx.grid.nodes[p], source,
                                         ctx.config.panels);
  }
  return out;
}

BlockVec apply_S_inverse(const SolveContext& ctx, const BlockVec& y) {
  const int N = ctx.grid.N;
  if (static_cast<int>(y.size()) != N + 1) {
    throw ConfigError("apply_S_inverse: input must have N + 1 blocks");
  }
  BlockVec out(N + 1, State(ctx.dim(), Complex(0.0)));
  for (int k = 0; k <= N; ++k) {
    const auto samples = ctx.engine->sample_resolvents(y[k]);
    const auto weight = [&ctx](double s, Complex zeta, int col) {
      return sinv_weight(ctx.grid, ctx.a, s, zeta, col);
    };
    const BlockVec contrib =
        ctx.engine->of_apply(*samples, weight, ctx.grid, k, ctx.config.strict_alg1);
    for (int l = 0; l <= N; ++l) {
      for (int j = 0; j < ctx.dim(); ++j) out[l][j] += contrib[l][j];
    }
  }
  return out;
}

BlockVec compute_F_term(const SolveContext& ctx) {
  const auto samples = ctx.engine->cached_samples(ctx.psi0);
  const auto weight = [&ctx](double s, Complex zeta, int col) {
    return sinv_weight(ctx.grid, ctx.a, s, zeta, col);
  };
  return ctx.engine->of_apply(*samples, weight, ctx.grid, 0, ctx.config.strict_alg1);
}

BlockVec apply_SinvC_fused(const SolveContext& ctx, const BlockVec& phi) {
  const int N = ctx.grid.N;
  if (static_cast<int>(phi.size()) != N + 1) {
    throw ConfigError("apply_SinvC_fused: input must have N + 1 blocks");
  }
  const int nodes = ctx.engine->node_count();
  const int dim = ctx.dim();
  BlockVec out(N + 1, State(dim, Complex(0.0)));
  if (ctx.potential_s.zero) return out;
  if (ctx.fused_w.empty()) {
    throw ConfigError("apply_SinvC_fused: fused weights were not precomputed");
  }

  // The spatial profile multiplies the data before the resolvent acts,
  // matching the operator ordering of the streamed formula.
  const std::vector<Complex>& u = ctx.potential_s.profile;
  std::vector<std::shared_ptr<const ResolventSampleSet>> samples(N + 1);
  for (int j = 0; j <= N; ++j) {
    if (u.empty()) {
      samples[j] = ctx.engine->sample_resolvents(phi[j]);
    } else {
      State uphi(dim);
      for (int x = 0; x < dim; ++x) uphi[x] = u[x] * phi[j][x];
      samples[j] = ctx.engine->sample_resolvents(uphi);
    }
  }

  const Complex scale = ctx.engine->quadrature_scale();
  parallel_for(0, N + 1, ctx.config.workers, [&](int k) {
    State acc(dim, Complex(0.0));
    for (int j = 0; j <= N; ++j) {
      const std::size_t base = (static_cast<std::size_t>(k) * (N + 1) + j) * nodes;
      for (int idx = 0; idx < nodes; ++idx) {
        const Complex c = ctx.engine->node_dz(idx) * ctx.fused_w[base + idx];
        const State& phi_m = samples[j]->samples[idx];
        for (int x = 0; x < dim; ++x) acc[x] += c * phi_m[x];
      }
    }
    for (int x = 0; x < dim; ++x) out[k][x] = scale * acc[x];
  });
  return out;
}

SolveResult solve(SolveContext& ctx) {
  ctx.op_s->reset_solve_count();
  ctx.engine->clear_cache();
  const int N = ctx.grid.N;
  const int dim = ctx.dim();

  IterationReport report;
  report.h_used = ctx.rule.h;
  report.separation = ctx.separation;
  report.d_c = ctx.d_c;
  report.sigma = ctx.contour.sigma;
  report.eta = ctx.contour.eta;
  report.z0 = ctx.engine->correction_center();
  report.route_used = route_name(ctx.fused);

  const BlockVec sf = compute_F_term(ctx);
  BlockVec phi(N + 1, State(dim, Complex(0.0)));

  if (ctx.potential_s.zero) {
    // C vanishes identically: the map is constant and the first iterate is
    // the fixed point.
    phi = sf;
    report.iterations = 1;
    report.errors.push_back(max_norm(phi));
    report.converged = true;
  } else {
    int grow_streak = 0;
    for (int it = 1; it <= ctx.config.max_it; ++it) {
      BlockVec next = ctx.fused ? apply_SinvC_fused(ctx, phi)
                                : apply_S_inverse(ctx, apply_C(ctx, phi));
      for (int l = 0; l <= N; ++l) {
        for (int j = 0; j < dim; ++j) next[l][j] += sf[l][j];
      }
      BlockVec diff(N + 1, State(dim, Complex(0.0)));
      for (int l = 0; l <= N; ++l) {
        for (int j = 0; j < dim; ++j) diff[l][j] = next[l][j] - phi[l][j];
      }
      const double err = max_norm(diff);
      if (!report.errors.empty() && err > 2.0 * report.errors.back()) {
        if (++grow_streak >= 3) {
          std::ostringstream msg;
          msg << "solve: error grew by a factor > 2 for three consecutive iterations "
                 "(err = "
              << err << "); contraction condition violated";
          throw DivergenceError(msg.str());
        }
      } else {
        grow_streak = 0;
      }
      report.errors.push_back(err);
      phi = std::move(next);
      if (err <= ctx.config.err_tol) {
        report.converged = true;
        break;
      }
    }
    report.iterations = static_cast<int>(report.errors.size());
  }

  for (std::size_t k = 1; k < report.errors.size(); ++k) {
    report.contraction_estimates.push_back(report.errors[k] / report.errors[k - 1]);
  }
  report.resolvent_solve_count = ctx.op_s->solve_count();

  TrajectorySolution traj;
  traj.grid = ctx.grid;
  traj.values = std::move(phi);
  traj.times.resize(N + 1);
  for (int p = 0; p <= N; ++p) traj.times[p] = s_to_time(ctx.grid.nodes[p], ctx.T);
  return SolveResult{std::move(traj), std::move(report)};
}

SolveResult solve(const NonlocalProblem& problem, const SolverConfig& config) {
  SolveContext ctx = assemble(problem, config);
  return solve(ctx);
}

} // namespace nlts
