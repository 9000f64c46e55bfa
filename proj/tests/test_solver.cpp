#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "nlts/errors.hpp"
#include "nlts/solver.hpp"
#include "support.hpp"

using namespace nlts;
using test_support::dense_solve;
using test_support::random_state;
using test_support::scalar_fundamental;

namespace {
constexpr double kPi = std::numbers::pi;

std::shared_ptr<DiagonalOperator> scalar_op(double lambda = 1.0) {
  return std::make_shared<DiagonalOperator>(std::vector<Complex>{Complex(lambda, 0.0)});
}

// T = 2 keeps the s-domain generator equal to the operator itself.
NonlocalProblem scalar_problem_T2(const NonlocalCondition& cond, const Potential& pot,
                                  Complex psi0 = Complex(1.0, 0.0)) {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = cond;
  p.potential = pot;
  p.psi0 = State{psi0};
  p.T = 2.0;
  return p;
}

SolverConfig fast_config(int N, int n, double delta = 4.0) {
  SolverConfig c;
  c.N = N;
  c.n = n;
  c.delta = delta;
  c.err_tol = 1e-9;
  c.max_it = 40;
  c.panels = 4;
  return c;
}

// Dense scalar S built from oracle exponentials e^{-i lambda tau}.
std::vector<std::vector<Complex>> dense_S(const ChebyshevGrid& grid,
                                          const std::vector<Complex>& a, Complex lambda) {
  const int N = grid.N;
  std::vector<std::vector<Complex>> S(N + 1, std::vector<Complex>(N + 1, Complex(0.0)));
  for (int l = 0; l <= N; ++l) S[0][l] = a[l];
  S[0][0] += 1.0;
  for (int p = 1; p <= N; ++p) {
    S[p][p] += 1.0;
    S[p][p - 1] -= std::exp(Complex(0.0, -grid.steps[p - 1]) * lambda);
  }
  return S;
}
} // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("max_norm") {
  CHECK(max_norm(BlockVec{State{Complex(0.0), Complex(0.0)}}) == 0.0);
  CHECK(max_norm(BlockVec{State{Complex(3.0, 0.0), Complex(0.0, -4.0)},
                          State{Complex(1.0, 0.0), Complex(1.0, 0.0)}}) == 4.0);
  // Homogeneity.
  std::mt19937_64 rng(4);
  BlockVec v{random_state(rng, 3), random_state(rng, 3)};
  BlockVec cv = v;
  const Complex c(1.3, -2.2);
  for (State& blk : cv) {
    for (Complex& x : blk) x *= c;
  }
  CHECK(max_norm(cv) == doctest::Approx(std::abs(c) * max_norm(v)).epsilon(1e-14));
  CHECK_THROWS_AS(max_norm(BlockVec{}), ConfigError);
}

TEST_CASE("assemble gathers zeros and passes separation") {
  // alpha = 0.5 at t = T = 1: zeros (2k+1) pi + i ln 2 in the t plane.
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(0.5, 0.0), 1.0}}, 1.0);
  p.potential = zero_potential(1);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;
  const SolveContext ctx = assemble(p, fast_config(4, 40));
  CHECK(ctx.separation.ok);
  REQUIRE(!ctx.zeros_b.empty());
  CHECK(std::abs(ctx.zeros_b[0] - Complex(kPi, std::log(2.0))) <= 1e-8);
  CHECK(!ctx.zeros_bN.empty());
  // b_N approximates the transformed symbol, so its first zero is near
  // (T/2) * (pi + i ln 2).
  CHECK(std::abs(ctx.zeros_bN[0] - 0.5 * Complex(kPi, std::log(2.0))) <= 0.05);
  CHECK(ctx.d_c == kPi / 6.0);  // zeros unreachable by the thin band family

  // Empty condition: no zeros, trivially separated.
  NonlocalProblem p0 = p;
  p0.cond = NonlocalCondition({}, 1.0);
  const SolveContext ctx0 = assemble(p0, fast_config(4, 40));
  CHECK(ctx0.separation.ok);
  CHECK(ctx0.zeros_b.empty());
  CHECK(std::isinf(ctx0.separation.min_distance));
}

TEST_CASE("assemble aborts when b vanishes inside the protected region") {
  // alpha = -1 at t = T: b(z) = 1 - e^{-i z} has a zero at the origin, and an
  // envelope containing the origin puts it inside Gamma_0.
  NonlocalProblem p;
  p.op = scalar_op(0.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(-1.0, 0.0), 1.0}}, 1.0);
  p.potential = zero_potential(1);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;
  try {
    (void)assemble(p, fast_config(4, 40));
    FAIL("expected SeparationError");
  } catch (const SeparationError& e) {
    CHECK(std::abs(e.offending_zero) <= 1e-8);
  }
}

TEST_CASE("assemble validates inputs") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({}, 1.0);
  p.potential = zero_potential(1);
  p.psi0 = State{Complex(1.0, 0.0), Complex(0.0, 0.0)};  // wrong dimension
  p.T = 1.0;
  CHECK_THROWS_AS(assemble(p, fast_config(4, 40)), ConfigError);
  p.psi0 = State{Complex(1.0, 0.0)};
  CHECK_THROWS_AS(assemble(p, fast_config(0, 40)), ConfigError);
  SolverConfig bad = fast_config(4, 40);
  bad.delta = 1.5;
  CHECK_THROWS_AS(assemble(p, bad), ConfigError);
  NonlocalProblem mismatched = p;
  mismatched.cond = NonlocalCondition({NonlocalTerm{Complex(0.1, 0.0), 0.5}}, 0.5);
  CHECK_THROWS_AS(assemble(mismatched, fast_config(4, 40)), ConfigError);
}

TEST_CASE("apply_C row-wise Duhamel terms") {
  // T = 2, lambda = 1, V = 0.1, Phi = 1: closed form 0.1 (1 - e^{-i tau_p}) / i.
  const auto cond = NonlocalCondition({}, 2.0);
  auto p = scalar_problem_T2(cond, constant_potential(1, Complex(0.1, 0.0)));
  SolveContext ctx = assemble(p, fast_config(4, 160));
  const BlockVec ones(5, State{Complex(1.0, 0.0)});
  ctx.op_s->reset_solve_count();
  const BlockVec rows = apply_C(ctx, ones);
  CHECK(ctx.op_s->solve_count() == 4 * (2 * 160 + 1));
  CHECK(std::abs(rows[0][0]) == 0.0);
  for (int p_row = 1; p_row <= 4; ++p_row) {
    const double tau = ctx.grid.steps[p_row - 1];
    const Complex oracle =
        Complex(0.1, 0.0) * (1.0 - std::exp(Complex(0.0, -tau))) / Complex(0.0, 1.0);
    CHECK(std::abs(rows[p_row][0] - oracle) <= 2e-4);
  }

  // V = 0 or Phi = 0 gives zero rows.
  auto pz = scalar_problem_T2(cond, zero_potential(1));
  SolveContext ctxz = assemble(pz, fast_config(4, 40));
  for (const State& row : apply_C(ctxz, ones)) CHECK(std::abs(row[0]) == 0.0);
  const BlockVec zeros(5, State{Complex(0.0, 0.0)});
  for (const State& row : apply_C(ctx, zeros)) CHECK(std::abs(row[0]) <= 1e-16);
}

TEST_CASE("apply_S_inverse on the empty condition is the lower-triangular flow") {
  const auto cond = NonlocalCondition({}, 2.0);
  auto p = scalar_problem_T2(cond, zero_potential(1));
  SolveContext ctx = assemble(p, fast_config(5, 160));
  std::mt19937_64 rng(21);
  BlockVec y(6);
  for (State& blk : y) blk = random_state(rng, 1);

  ctx.op_s->reset_solve_count();
  const BlockVec x = apply_S_inverse(ctx, y);
  CHECK(ctx.op_s->solve_count() == 6 * (2 * 160 + 1));

  for (int k = 0; k <= 5; ++k) {
    Complex oracle(0.0);
    for (int l = 0; l <= k; ++l) {
      oracle += std::exp(Complex(0.0, -(ctx.grid.nodes[k] - ctx.grid.nodes[l]))) * y[l][0];
    }
    CHECK(std::abs(x[k][0] - oracle) <= 1e-3);
  }

  // Zero input maps to zero.
  const BlockVec zeros(6, State{Complex(0.0, 0.0)});
  for (const State& row : apply_S_inverse(ctx, zeros)) CHECK(std::abs(row[0]) == 0.0);
}

TEST_CASE("apply_S_inverse matches the dense oracle under a general condition") {
  const auto cond = NonlocalCondition({NonlocalTerm{Complex(0.15, 0.1), 0.8},
                                       NonlocalTerm{Complex(-0.1, 0.05), 1.9}},
                                      2.0);
  auto p = scalar_problem_T2(cond, zero_potential(1));
  SolveContext ctx = assemble(p, fast_config(4, 160));
  REQUIRE(ctx.separation.ok);

  std::mt19937_64 rng(33);
  BlockVec y(5);
  for (State& blk : y) blk = random_state(rng, 1);
  const BlockVec x = apply_S_inverse(ctx, y);

  auto S = dense_S(ctx.grid, ctx.a, Complex(1.0, 0.0));
  std::vector<Complex> rhs(5);
  for (int k = 0; k <= 4; ++k) rhs[k] = y[k][0];
  const auto oracle = dense_solve(S, rhs);
  for (int k = 0; k <= 4; ++k) {
    CHECK(std::abs(x[k][0] - oracle[k]) <= 2e-3);
  }
}

TEST_CASE("compute_F_term") {
  // Empty condition: rows e^{-i lambda (s_p + 1)} Psi_0.
  const auto cond = NonlocalCondition({}, 2.0);
  const Complex psi0(0.7, -0.3);
  auto p = scalar_problem_T2(cond, zero_potential(1), psi0);
  SolveContext ctx = assemble(p, fast_config(4, 160));
  ctx.op_s->reset_solve_count();
  const BlockVec sf = compute_F_term(ctx);
  CHECK(ctx.op_s->solve_count() == 2 * 160 + 1);
  for (int k = 0; k <= 4; ++k) {
    const Complex oracle = std::exp(Complex(0.0, -(ctx.grid.nodes[k] + 1.0))) * psi0;
    CHECK(std::abs(sf[k][0] - oracle) <= 2e-4);
  }

  // Single on-grid term at t = T: rows e^{-i lambda (s_p+1)} Psi0 / (1 + a e^{-2 i lambda}).
  const Complex alpha(0.4, 0.0);
  const auto cond1 = NonlocalCondition({NonlocalTerm{alpha, 2.0}}, 2.0);
  auto p1 = scalar_problem_T2(cond1, zero_potential(1), psi0);
  SolveContext ctx1 = assemble(p1, fast_config(4, 160));
  const BlockVec sf1 = compute_F_term(ctx1);
  const Complex bn = 1.0 + alpha * std::exp(Complex(0.0, -2.0));
  for (int k = 0; k <= 4; ++k) {
    const Complex oracle =
        std::exp(Complex(0.0, -(ctx1.grid.nodes[k] + 1.0))) * psi0 / bn;
    CHECK(std::abs(sf1[k][0] - oracle) <= 2e-4);
  }

  // Psi_0 = 0 maps to zero.
  auto p0 = scalar_problem_T2(cond, zero_potential(1), Complex(0.0, 0.0));
  SolveContext ctx0 = assemble(p0, fast_config(4, 80));
  for (const State& row : compute_F_term(ctx0)) CHECK(std::abs(row[0]) == 0.0);
}

TEST_CASE("solve with V = 0 converges in one iteration to the F term") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(0.5, 0.0), 1.0}}, 1.0);
  p.potential = zero_potential(1);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;
  SolveContext ctx = assemble(p, fast_config(6, 320));
  const SolveResult res = solve(ctx);

  CHECK(res.report.converged);
  CHECK(res.report.iterations == 1);
  CHECK(res.report.errors.size() == 1);
  CHECK(res.report.errors[0] == doctest::Approx(max_norm(res.trajectory.values)));
  // Solve count: only the F-term sweep runs.
  CHECK(res.report.resolvent_solve_count == 2 * 320 + 1);

  // Second pass confirms the fixed point within quadrature noise.
  const BlockVec again = apply_S_inverse(ctx, apply_C(ctx, res.trajectory.values));
  const BlockVec sf = compute_F_term(ctx);
  for (int k = 0; k <= 6; ++k) {
    CHECK(std::abs(again[k][0] + sf[k][0] - res.trajectory.values[k][0]) <= 1e-10);
  }

  // Closed-form nonlocal value at t = 0 and free flow afterwards.
  const Complex oracle = 1.0 / (1.0 + 0.5 * std::exp(Complex(0.0, -1.0)));
  CHECK(std::abs(res.trajectory.values[0][0] - oracle) <= 1e-4);
  for (int k = 0; k <= 6; ++k) {
    const Complex expect = std::exp(Complex(0.0, -res.trajectory.times[k])) * oracle;
    CHECK(std::abs(res.trajectory.values[k][0] - expect) <= 1e-4);
  }
  CHECK(res.trajectory.times[0] == 0.0);
  CHECK(res.trajectory.times[6] == 1.0);
}

TEST_CASE("solve with a commuting potential against the scalar oracle") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(0.5, 0.0), 1.0}}, 1.0);
  p.potential = cosine_potential(1, 0.2, 1.0, 0.0);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;

  SolverConfig cfg = fast_config(8, 160);
  cfg.err_tol = 1e-10;
  const SolveResult res = solve(p, cfg);
  CHECK(res.report.converged);
  CHECK(res.report.iterations >= 2);
  CHECK(res.report.route_used == "fused");
  // Solve count: (N+1)(2n+1) per iteration plus the F sweep.
  CHECK(res.report.resolvent_solve_count ==
        (2 * 160 + 1) * (9 * res.report.iterations + 1));
  // Contraction after the second iteration.
  for (std::size_t k = 1; k < res.report.contraction_estimates.size(); ++k) {
    CHECK(res.report.contraction_estimates[k] < 1.0);
  }

  const auto potential = [](double t) { return Complex(0.2 * std::cos(t), 0.0); };
  Complex denom = 1.0 + 0.5 * scalar_fundamental(Complex(1.0, 0.0), potential, 1.0);
  const Complex start = Complex(1.0, 0.0) / denom;
  double err = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const Complex oracle =
        scalar_fundamental(Complex(1.0, 0.0), potential, res.trajectory.times[k]) * start;
    err = std::max(err, std::abs(res.trajectory.values[k][0] - oracle));
  }
  CHECK(err <= 5e-4);  // frozen from the first oracle run
}

TEST_CASE("fused and composite routes agree on commuting input") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(0.5, 0.0), 1.0}}, 1.0);
  p.potential = cosine_potential(1, 0.2, 1.0, 0.0);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;

  SolverConfig fused_cfg = fast_config(6, 160);
  fused_cfg.route = IterationRoute::kFused;
  SolverConfig comp_cfg = fused_cfg;
  comp_cfg.route = IterationRoute::kComposite;

  const SolveResult a = solve(p, fused_cfg);
  const SolveResult b = solve(p, comp_cfg);
  CHECK(a.report.route_used == "fused");
  CHECK(b.report.route_used == "composite");
  // Composite costs the extra apply_C sweeps.
  CHECK(b.report.resolvent_solve_count ==
        (2 * 160 + 1) * ((6 + 7) * b.report.iterations + 1));
  double diff = 0.0;
  for (int k = 0; k <= 6; ++k) {
    diff = std::max(diff, std::abs(a.trajectory.values[k][0] - b.trajectory.values[k][0]));
  }
  CHECK(diff <= 1e-4);
}

TEST_CASE("solver error decreases with N at fixed large n") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({NonlocalTerm{Complex(0.5, 0.0), 1.0}}, 1.0);
  p.potential = cosine_potential(1, 0.2, 1.0, 0.0);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;

  const auto potential = [](double t) { return Complex(0.2 * std::cos(t), 0.0); };
  const Complex start =
      Complex(1.0, 0.0) /
      (1.0 + 0.5 * scalar_fundamental(Complex(1.0, 0.0), potential, 1.0));

  // n grows with N so the quadrature floor falls together with the
  // collocation error.
  double prev = 1e300;
  for (const auto& [N, n] : {std::pair{2, 60}, std::pair{4, 120}, std::pair{8, 240}}) {
    SolverConfig cfg = fast_config(N, n);
    cfg.err_tol = 1e-11;
    const SolveResult res = solve(p, cfg);
    double err = 0.0;
    for (int k = 0; k <= N; ++k) {
      const Complex oracle =
          scalar_fundamental(Complex(1.0, 0.0), potential, res.trajectory.times[k]) *
          start;
      err = std::max(err, std::abs(res.trajectory.values[k][0] - oracle));
    }
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("non-convergence is reported, divergence is trapped") {
  NonlocalProblem p;
  p.op = scalar_op(1.0);
  p.cond = NonlocalCondition({}, 1.0);
  p.psi0 = State{Complex(1.0, 0.0)};
  p.T = 1.0;

  // Moderately strong potential: contraction fails, errors plateau or shrink
  // too slowly for the 3-iteration budget.
  p.potential = constant_potential(1, Complex(2.4, 0.0));
  SolverConfig cfg = fast_config(4, 60);
  cfg.err_tol = 1e-12;
  cfg.max_it = 3;
  const SolveResult res = solve(p, cfg);
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.iterations == 3);

  // A violently non-contractive potential trips the divergence guard.
  p.potential = constant_potential(1, Complex(12.0, 0.0));
  SolverConfig cfg2 = fast_config(4, 60);
  cfg2.max_it = 30;
  CHECK_THROWS_AS(solve(p, cfg2), DivergenceError);
}


TEST_CASE("noncommuting separable potential against a matrix-ODE oracle") {
  // x-dependent multiplication potential on the finite-difference backend:
  // V(t) does not commute with H. The composite route is auto-selected.
  const int nx = 3;
  const double T = 0.4, a = 0.15, f = 1.0;
  const Complex alpha(0.3, 0.0);
  const auto H = fd_build(1.0, nx, std::vector<double>(nx, 0.0));
  std::vector<Complex> u(nx);
  State psi0(nx);
  for (int j = 0; j < nx; ++j) {
    u[j] = Complex(std::sin(kPi * (j + 1) / (nx + 1)), 0.0);
    psi0[j] = u[j];
  }

  NonlocalProblem p;
  p.op = std::make_shared<TridiagonalOperator>(H);
  p.cond = NonlocalCondition({NonlocalTerm{alpha, T}}, T);
  p.potential = separable_potential(a, f, u);
  p.psi0 = psi0;
  p.T = T;

  SolverConfig cfg = fast_config(16, 1400);
  cfg.err_tol = 1e-10;
  cfg.max_it = 60;
  const SolveResult res = solve(p, cfg);
  REQUIRE(res.report.converged);
  CHECK(res.report.route_used == "composite");

  // Fundamental-matrix oracle: M' = (-iH + V(t)) M, M(0) = I, RK4.
  using Mat = std::vector<State>;
  auto rhs = [&](double t, const Mat& M) {
    Mat R(nx, State(nx));
    const double vf = a * std::cos(f * t);
    for (int c = 0; c < nx; ++c) {
      for (int r = 0; r < nx; ++r) {
        Complex hv = H.diagonal()[r] * M[r][c];
        if (r > 0) hv += H.off_diagonal()[r - 1] * M[r - 1][c];
        if (r < nx - 1) hv += H.off_diagonal()[r] * M[r + 1][c];
        R[r][c] = Complex(0.0, -1.0) * hv + vf * u[r] * M[r][c];
      }
    }
    return R;
  };
  auto axpy = [&](const Mat& M, double w, const Mat& K) {
    Mat R = M;
    for (int r = 0; r < nx; ++r) {
      for (int c = 0; c < nx; ++c) R[r][c] += w * K[r][c];
    }
    return R;
  };
  const int steps = 50000;
  const double h = T / steps;
  Mat M(nx, State(nx, Complex(0.0)));
  for (int j = 0; j < nx; ++j) M[j][j] = Complex(1.0, 0.0);
  std::vector<Mat> snaps;
  std::size_t next = 0;
  auto maybe_snap = [&](double t) {
    while (next < res.trajectory.times.size() &&
           t >= res.trajectory.times[next] - 1e-12) {
      snaps.push_back(M);
      ++next;
    }
  };
  double t = 0.0;
  maybe_snap(t);
  for (int k = 0; k < steps; ++k) {
    const Mat k1 = rhs(t, M);
    const Mat k2 = rhs(t + h / 2, axpy(M, h / 2, k1));
    const Mat k3 = rhs(t + h / 2, axpy(M, h / 2, k2));
    const Mat k4 = rhs(t + h, axpy(M, h, k3));
    for (int r = 0; r < nx; ++r) {
      for (int c = 0; c < nx; ++c) {
        M[r][c] += h / 6.0 * (k1[r][c] + 2.0 * k2[r][c] + 2.0 * k3[r][c] + k4[r][c]);
      }
    }
    t += h;
    maybe_snap(t);
  }
  maybe_snap(T + 1.0);
  REQUIRE(snaps.size() == res.trajectory.times.size());

  // psi(0) from the nonlocal condition: (I + alpha M(T)) psi(0) = psi0.
  std::vector<std::vector<Complex>> A(nx, std::vector<Complex>(nx));
  for (int r = 0; r < nx; ++r) {
    for (int c = 0; c < nx; ++c) {
      A[r][c] = (r == c ? Complex(1.0) : Complex(0.0)) + alpha * snaps.back()[r][c];
    }
  }
  const auto start = dense_solve(A, psi0);
  double err = 0.0;
  for (std::size_t kk = 0; kk < snaps.size(); ++kk) {
    for (int r = 0; r < nx; ++r) {
      Complex oracle(0.0);
      for (int c = 0; c < nx; ++c) oracle += snaps[kk][r][c] * start[c];
      err = std::max(err, std::abs(res.trajectory.values[kk][r] - oracle));
    }
  }
  CHECK(err <= 2e-4);  // frozen: measured 2.5e-5
}

TEST_SUITE_END();
