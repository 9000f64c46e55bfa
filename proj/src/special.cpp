#include "nlts/special.hpp"

#include <cmath>
#include <numbers>

#include "nlts/errors.hpp"

namespace nlts {

double lambert_w(double x) {
  if (x < 0.0) throw ConfigError("lambert_w: argument must be >= 0");
  if (x == 0.0) return 0.0;
  // Log-based seed, accurate over the whole positive axis.
  const double l = std::log1p(x);
  double w = l * (1.0 - std::log1p(l) / (2.0 + l));
  for (int it = 0; it < 100; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    if (std::abs(f) <= 1e-15 * std::max(1.0, x)) break;
    w -= f / (ew * (1.0 + w));
    if (w < 0.0) w = 0.0;
  }
  return w;
}

double beta_fn(double a, double b) {
  if (a <= 0.0 || b <= 0.0) throw ConfigError("beta_fn: arguments must be positive");
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double quad_beta(double delta, double d) {
  if (delta <= 1.0) throw ConfigError("quad_beta: delta must be > 1");
  if (d <= 0.0) throw ConfigError("quad_beta: d must be positive");
  const double pi = std::numbers::pi;
  const double first = (2.0 * pi / delta) / std::sin(pi / delta);
  const double second =
      std::pow(2.0 / d, delta - 1.0) * beta_fn(delta / 2.0 - 0.5, delta / 2.0 + 0.5);
  return std::min(first, second);
}

double step_h(int n, double delta, double d) {
  if (n < 1) throw ConfigError("step_h: n must be >= 1");
  if (delta <= 1.0) throw ConfigError("step_h: delta must be > 1");
  const double pi = std::numbers::pi;
  if (d <= 0.0 || d > pi / 6.0 + 1e-15) {
    throw ConfigError("step_h: d must lie in (0, pi/6]");
  }
  const double a = 2.0 * pi * d / (delta - 1.0);
  const double arg =
      a * std::pow(quad_beta(delta, d) * (delta - 1.0) / (pi * d), 1.0 / (delta - 1.0)) *
      (n + 1.0);
  return a / lambert_w(arg);
}

double error_shape(int n, double delta, double d) {
  const double h = step_h(n, delta, d);
  return std::pow(n + 1.0, 1.0 - delta) / (delta - 1.0) * std::pow(h, 1.0 - delta);
}

QuadratureParams make_quadrature(int n, double delta, double d) {
  QuadratureParams q;
  q.n = n;
  q.delta = delta;
  q.d = d;
  q.beta = quad_beta(delta, d);
  q.h = step_h(n, delta, d);
  return q;
}

} // namespace nlts
