#pragma once

#include <vector>

#include "nlts/types.hpp"

namespace nlts {

/// Chebyshev-Gauss-Lobatto grid on [-1, 1]: nodes s_p = -cos(p*pi/N).
///
/// Nodes are symmetrized so that s_p == -s_{N-p} holds bitwise and the
/// midpoint of an even grid is exactly zero.
struct ChebyshevGrid {
  int N = 0;                     // polynomial degree, nodes = N + 1
  std::vector<double> nodes;     // s_0 = -1 < ... < s_N = 1
  std::vector<double> steps;     // tau_p = s_p - s_{p-1}, p = 1..N
  std::vector<double> weights;   // barycentric weights, (-1)^p, halved at ends

  double tau_max() const;
};

ChebyshevGrid build_grid(int N);

/// Lagrange fundamental polynomial L_l at s, barycentric second form.
double lagrange(const ChebyshevGrid& grid, int l, double s);

/// P_N(s; values) = sum_p values_p * L_p(s).
State interpolate(const ChebyshevGrid& grid, const BlockVec& values, double s);

/// Max over a uniform probe mesh of sum_l |L_l(s)|. Diagnostic only.
double lebesgue_constant(const ChebyshevGrid& grid, int resolution);

/// Change of variable t = (s + 1) T / 2 between [0, T] and [-1, 1].
double time_to_s(double t, double T);
double s_to_time(double s, double T);

} // namespace nlts
