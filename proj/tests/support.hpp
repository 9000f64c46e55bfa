#pragma once

// Shared test-side oracles, independent of the library's solve paths.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "nlts/types.hpp"

namespace test_support {

using nlts::Complex;
using nlts::State;

/// Dense complex solve with partial pivoting (Gaussian elimination).
inline std::vector<Complex> dense_solve(std::vector<std::vector<Complex>> a,
                                        std::vector<Complex> b) {
  const int n = static_cast<int>(a.size());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    }
    if (std::abs(a[piv][k]) == 0.0) throw std::runtime_error("dense_solve: singular");
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (int i = k + 1; i < n; ++i) {
      const Complex m = a[i][k] / a[k][k];
      for (int j = k; j < n; ++j) a[i][j] -= m * a[k][j];
      b[i] -= m * b[k];
    }
  }
  std::vector<Complex> x(n);
  for (int k = n - 1; k >= 0; --k) {
    Complex s = b[k];
    for (int j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

/// RK4 integration of psi' = (-i lambda + V(t)) psi, psi(0) = 1, to time t.
inline Complex scalar_fundamental(Complex lambda,
                                  const std::function<Complex(double)>& potential,
                                  double t, int steps_per_unit = 200000) {
  if (t == 0.0) return Complex(1.0, 0.0);
  const int steps = std::max(2000, static_cast<int>(std::ceil(t * steps_per_unit)));
  const double h = t / steps;
  auto rhs = [&](double s, Complex y) {
    return (Complex(0.0, -1.0) * lambda + potential(s)) * y;
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

inline State random_state(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  State v(dim);
  for (Complex& c : v) c = Complex(u(rng), u(rng));
  return v;
}

} // namespace test_support
