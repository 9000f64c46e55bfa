#pragma once

namespace nlts {

/// Positive branch of the Lambert-W function: unique w >= 0 with w e^w = x.
double lambert_w(double x);

/// Euler beta function B(a, b), a, b > 0.
double beta_fn(double a, double b);

/// beta constant of the trapezoid step-size rule:
/// min{ 2 pi / delta / sin(pi/delta), (2/d)^(delta-1) B(delta/2 - 1/2, delta/2 + 1/2) }.
double quad_beta(double delta, double d);

/// Trapezoid step h for an integrand decaying like |x|^-delta that is
/// analytic in the horizontal strip |Im| < d, using 2n+1 nodes.
double step_h(int n, double delta, double d);

/// Shape of the quadrature error bound, (n+1)^(1-delta) h^(1-delta) / (delta-1),
/// without the problem-dependent constant. Predicts convergence order only.
double error_shape(int n, double delta, double d);

/// Trapezoid rule parameters: nodes m h, m = -n..n.
struct QuadratureParams {
  int n = 0;
  double h = 0.0;
  double delta = 2.0;  // decay / smoothness order
  double d = 0.0;      // analyticity strip half-width
  double beta = 0.0;
};

QuadratureParams make_quadrature(int n, double delta, double d);

} // namespace nlts
