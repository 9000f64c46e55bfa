#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlts/nonlocal.hpp"
#include "nlts/operator.hpp"
#include "nlts/propagator.hpp"
#include "nlts/types.hpp"

namespace nlts {

/// Complete problem statement: i psi_t - (H + v(t)) psi = 0 in mild form with
/// potential V = -i v, horizon T, datum Psi_0 and the nonlocal condition.
struct NonlocalProblem {
  std::shared_ptr<const OperatorDescriptor> op;
  NonlocalCondition cond;
  Potential potential;
  State psi0;
  double T = 1.0;
};

enum class IterationRoute {
  kAuto,       // fused when the potential is spatially uniform, else composite
  kFused,      // streamed g-weight evaluation of S^{-1} C Phi
  kComposite,  // apply_C followed by apply_S_inverse
};

struct SolverConfig {
  int N = 8;            // collocation degree
  int n = 80;           // quadrature half-size
  double delta = 4.0;   // smoothness order used by the step rule / correction
  double err_tol = 1e-8;
  int max_it = 50;
  int panels = 4;       // inner Gauss-Legendre panels per subinterval
  int workers = 1;
  bool strict_alg1 = false;  // literal row zeroing in the O_F loop
  IterationRoute route = IterationRoute::kAuto;
  std::optional<Box> zero_box;  // overrides the default search rectangle
};

struct TrajectorySolution {
  ChebyshevGrid grid;
  BlockVec values;            // psi(t_p)
  std::vector<double> times;  // t_p = (s_p + 1) T / 2
};

struct IterationReport {
  int iterations = 0;
  std::vector<double> errors;                 // successive-difference max norms
  std::vector<double> contraction_estimates;  // err_{k+1} / err_k
  long resolvent_solve_count = 0;
  SeparationReport separation;
  double h_used = 0.0;
  bool converged = false;
  double d_c = 0.0;
  double sigma = 1.0;
  double eta = 0.0;
  double z0 = 0.0;
  std::string route_used;
};

/// Outer max over blocks of the componentwise-magnitude maximum.
double max_norm(const BlockVec& v);

/// Everything assemble() derives from a problem/config pair.
struct SolveContext {
  std::shared_ptr<const OperatorDescriptor> op_s;  // generator of the s-domain flow
  ChebyshevGrid grid;
  NonlocalCondition cond;
  std::vector<Complex> a;       // first-row coefficients
  Potential potential_s;        // potential in the s variable (rescaled)
  State psi0;
  double T = 1.0;
  HyperbolicContour contour;    // after the critical-strip adjustment
  QuadratureParams rule;
  double d_c = 0.0;
  SeparationReport separation;
  std::vector<Complex> zeros_b;   // zeros of b, original time plane
  std::vector<Complex> zeros_bN;  // zeros of b_N, s plane
  std::unique_ptr<PropagatorEngine> engine;
  SolverConfig config;
  bool fused = false;             // effective iteration route
  std::vector<Complex> fused_w;   // (N+1)^2 (2n+1) streamed weights, row-major

  int dim() const { return op_s->dim(); }
};

/// Zero sets of b and b_N with the separation verdict, before the solvability
/// gate fires. Union zeros live in the s plane (b zeros rescaled by T/2).
struct ZeroScan {
  ChebyshevGrid grid;
  std::vector<Complex> a;
  HyperbolicContour base_contour;
  std::vector<Complex> zeros_b;        // original time plane
  std::vector<Complex> zeros_bN;       // s plane
  std::vector<Complex> zeros_union_s;  // s plane
  SeparationReport separation;
};

ZeroScan scan_zeros(const NonlocalProblem& problem, const SolverConfig& config);

/// Builds grid, coefficients, contour, zero sets, separation check, adjusted
/// contour and quadrature rule. Throws SeparationError when a zero of b / b_N
/// violates the solvability condition.
SolveContext assemble(const NonlocalProblem& problem, const SolverConfig& config);

/// Row-wise C Phi: Upsilon_0 = 0,
/// Upsilon_p = int_{s_{p-1}}^{s_p} e^{-i (s_p - t) H} V(t) P_N(t; Phi) dt.
/// Costs exactly N (2n+1) resolvent solves.
BlockVec apply_C(const SolveContext& ctx, const BlockVec& phi);

/// S^{-1} Y through one operator-function evaluation per column; exactly
/// (N+1)(2n+1) resolvent solves.
BlockVec apply_S_inverse(const SolveContext& ctx, const BlockVec& y);

/// S^{-1} F = (B_N^{-1} Psi_0, ..., e^{-i H (s_N - s_0)} B_N^{-1} Psi_0);
/// 2n+1 resolvent solves, cached inside the engine.
BlockVec compute_F_term(const SolveContext& ctx);

/// Streamed evaluation of S^{-1} C Phi using the precomputed g-weights;
/// exactly (N+1)(2n+1) resolvent solves.
BlockVec apply_SinvC_fused(const SolveContext& ctx, const BlockVec& phi);

struct SolveResult {
  TrajectorySolution trajectory;
  IterationReport report;
};

/// Fixed-point iteration Phi <- S^{-1} C Phi + S^{-1} F from Phi = 0.
SolveResult solve(const NonlocalProblem& problem, const SolverConfig& config);

/// Variant that reuses an assembled context (the context's solve counter is
/// reset at entry).
SolveResult solve(SolveContext& ctx);

} // namespace nlts
