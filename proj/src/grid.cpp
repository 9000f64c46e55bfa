#include "nlts/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nlts/errors.hpp"

namespace nlts {

namespace {

// Index of s among the grid nodes, or -1. Exact comparison on purpose:
// the barycentric form needs the stored value at a hit, anything else
// goes through the regular formula.
int node_index(const ChebyshevGrid& grid, double s) {
  for (int p = 0; p <= grid.N; ++p) {
    if (s == grid.nodes[p]) return p;
  }
  return -1;
}

} // namespace

double ChebyshevGrid::tau_max() const {
  return *std::max_element(steps.begin(), steps.end());
}

ChebyshevGrid build_grid(int N) {
  if (N < 1) throw ConfigError("build_grid: N must be >= 1");
  ChebyshevGrid grid;
  grid.N = N;
  grid.nodes.resize(N + 1);
  std::vector<double> raw(N + 1);
  for (int p = 0; p <= N; ++p) {
    raw[p] = -std::cos(p * std::numbers::pi / N);
  }
  // Antisymmetrize so s_p == -s_{N-p} exactly.
  for (int p = 0; p <= N; ++p) {
    grid.nodes[p] = 0.5 * (raw[p] - raw[N - p]);
  }
  grid.steps.resize(N);
  for (int p = 1; p <= N; ++p) {
    grid.steps[p - 1] = grid.nodes[p] - grid.nodes[p - 1];
  }
  grid.weights.resize(N + 1);
  for (int p = 0; p <= N; ++p) {
    double w = (p % 2 == 0) ? 1.0 : -1.0;
    if (p == 0 || p == N) w *= 0.5;
    grid.weights[p] = w;
  }
  return grid;
}

double lagrange(const ChebyshevGrid& grid, int l, double s) {
  if (l < 0 || l > grid.N) throw ConfigError("lagrange: node index out of range");
  const int hit = node_index(grid, s);
  if (hit >= 0) return hit == l ? 1.0 : 0.0;
  double num = grid.weights[l] / (s - grid.nodes[l]);
  double den = 0.0;
  for (int p = 0; p <= grid.N; ++p) {
    den += grid.weights[p] / (s - grid.nodes[p]);
  }
  return num / den;
}

State interpolate(const ChebyshevGrid& grid, const BlockVec& values, double s) {
  if (static_cast<int>(values.size()) != grid.N + 1) {
    throw ConfigError("interpolate: values length must be N + 1");
  }
  const std::size_t dim = values[0].size();
  for (const State& v : values) {
    if (v.size() != dim) throw ConfigError("interpolate: dimension mismatch");
  }
  const int hit = node_index(grid, s);
  if (hit >= 0) return values[hit];

  State out(dim, Complex(0.0, 0.0));
  double den = 0.0;
  for (int p = 0; p <= grid.N; ++p) {
    const double c = grid.weights[p] / (s - grid.nodes[p]);
    den += c;
    for (std::size_t j = 0; j < dim; ++j) out[j] += c * values[p][j];
  }
  for (std::size_t j = 0; j < dim; ++j) out[j] /= den;
  return out;
}

double lebesgue_constant(const ChebyshevGrid& grid, int resolution) {
  if (resolution < 10 * (grid.N + 1)) {
    throw ConfigError("lebesgue_constant: resolution must be >= 10 (N + 1)");
  }
  double lambda = 0.0;
  for (int i = 0; i < resolution; ++i) {
    const double s = -1.0 + 2.0 * i / (resolution - 1);
    double sum = 0.0;
    for (int l = 0; l <= grid.N; ++l) sum += std::abs(lagrange(grid, l, s));
    lambda = std::max(lambda, sum);
  }
  return lambda;
}

double time_to_s(double t, double T) {
  if (T <= 0.0) throw ConfigError("time_to_s: T must be positive");
  if (t < 0.0 || t > T) throw ConfigError("time_to_s: t outside [0, T]");
  return 2.0 * t / T - 1.0;
}

double s_to_time(double s, double T) {
  if (T <= 0.0) throw ConfigError("s_to_time: T must be positive");
  if (s < -1.0 || s > 1.0) throw ConfigError("s_to_time: s outside [-1, 1]");
  return (s + 1.0) * T / 2.0;
}

} // namespace nlts
