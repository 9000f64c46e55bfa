#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "nlts/errors.hpp"
#include "nlts/operator.hpp"
#include "support.hpp"

using namespace nlts;
using test_support::dense_solve;
using test_support::random_state;

namespace {

std::vector<std::vector<Complex>> dense_shifted(const TridiagonalOperator& op,
                                                Complex zeta) {
  const int n = op.dim();
  std::vector<std::vector<Complex>> a(n, std::vector<Complex>(n, Complex(0.0)));
  for (int j = 0; j < n; ++j) {
    a[j][j] = zeta - op.diagonal()[j];
    if (j > 0) a[j][j - 1] = -op.off_diagonal()[j - 1];
    if (j < n - 1) a[j][j + 1] = -op.off_diagonal()[j];
  }
  return a;
}

double residual_inf(const OperatorDescriptor& op, Complex zeta, const State& phi,
                    const State& rhs) {
  // || (zeta I - H) phi - rhs ||_inf
  State hphi = op.apply(phi);
  double r = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    r = std::max(r, std::abs(zeta * phi[j] - hphi[j] - rhs[j]));
  }
  return r;
}

} // namespace

TEST_SUITE_BEGIN("operator");

TEST_CASE("diagonal resolvent") {
  DiagonalOperator op({Complex(1.0, 0.0), Complex(2.0, 0.0)});
  const State rhs{Complex(1.0, 0.0), Complex(1.0, 0.0)};
  const State phi = op.resolvent_solve(Complex(0.0, 1.0), rhs);
  CHECK(std::abs(phi[0] - Complex(-0.5, -0.5)) <= 1e-14);
  CHECK(std::abs(phi[1] - Complex(-0.4, -0.2)) <= 1e-14);

  // Zero rhs stays zero.
  const State zero = op.resolvent_solve(Complex(0.0, 1.0), State{Complex(0.0), Complex(0.0)});
  CHECK(std::abs(zero[0]) == 0.0);
  CHECK(std::abs(zero[1]) == 0.0);

  // Envelope proximity rejected.
  CHECK_THROWS_AS(op.resolvent_solve(Complex(1.5, 0.0), rhs), SpectralProximityError);
  CHECK_THROWS_AS(op.resolvent_solve(Complex(1.0, 1e-8), rhs), SpectralProximityError);
}

TEST_CASE("apply and apply_power") {
  DiagonalOperator op({Complex(2.0, 0.0)});
  CHECK(op.apply_power(0, State{Complex(1.0)})[0] == Complex(1.0));
  CHECK(std::abs(op.apply_power(3, State{Complex(1.0)})[0] - Complex(8.0)) <= 1e-14);
  CHECK_THROWS_AS(op.apply_power(9, State{Complex(1.0)}), ConfigError);
  CHECK_THROWS_AS(op.apply_power(-1, State{Complex(1.0)}), ConfigError);

  // Resolvent identity H R(z) phi = z R(z) phi - phi on random data.
  std::mt19937_64 rng(11);
  DiagonalOperator dop({Complex(1.0, 0.2), Complex(3.0, -0.1), Complex(0.5, 0.0)});
  const Complex zeta(-2.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const State phi = random_state(rng, 3);
    const State r = dop.resolvent_solve(zeta, phi);
    const State hr = dop.apply(r);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(hr[j] - (zeta * r[j] - phi[j])) <= 1e-9);
    }
  }
}

TEST_CASE("fd_build") {
  const auto op1 = fd_build(1.0, 1, {0.0});
  CHECK(op1.diagonal()[0] == Complex(8.0, 0.0));

  const auto op3 = fd_build(1.0, 3, {0.0, 0.0, 0.0});
  // Known tridiagonal Toeplitz spectrum: 2 (1 - cos(k pi / 4)) / dx^2.
  const double dx = 0.25;
  for (int k = 1; k <= 3; ++k) {
    const double lam = 2.0 * (1.0 - std::cos(k * std::numbers::pi / 4.0)) / (dx * dx);
    State v(3);
    for (int j = 0; j < 3; ++j) {
      v[j] = Complex(std::sin(k * std::numbers::pi * (j + 1) / 4.0), 0.0);
    }
    const State hv = op3.apply(v);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(hv[j] - lam * v[j]) <= 1e-10);
  }

  // Constant shift of U moves eigenvalues by the same constant.
  const auto shifted = fd_build(1.0, 3, {2.5, 2.5, 2.5});
  State v{Complex(0.3, 0.1), Complex(-0.2, 0.5), Complex(1.0, -1.0)};
  const State a = op3.apply(v);
  const State b = shifted.apply(v);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(b[j] - (a[j] + 2.5 * v[j])) <= 1e-12);

  CHECK(op3.envelope().d_s == 0.0);
  CHECK(op3.envelope().b_s <= 0.0);
  CHECK_THROWS_AS(fd_build(0.0, 3, {0.0, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(fd_build(1.0, 0, {}), ConfigError);
}

TEST_CASE("tridiagonal solve matches the dense oracle") {
  std::mt19937_64 rng(23);
  for (int nx : {1, 2, 3, 7, 16}) {
    std::vector<double> U(nx);
    std::uniform_real_distribution<double> uu(-3.0, 3.0);
    for (double& u : U) u = uu(rng);
    const auto op = fd_build(1.0, nx, U);
    for (const Complex zeta : {Complex(0.0, 50.0), Complex(-20.0, 5.0),
                               Complex(100.0, 30.0)}) {
      const State rhs = random_state(rng, nx);
      const State phi = op.resolvent_solve(zeta, rhs);
      const State oracle = dense_solve(dense_shifted(op, zeta), rhs);
      double scale = 0.0, diff = 0.0;
      for (int j = 0; j < nx; ++j) {
        scale = std::max(scale, std::abs(oracle[j]));
        diff = std::max(diff, std::abs(phi[j] - oracle[j]));
      }
      CHECK(diff <= 1e-10 * std::max(1.0, scale));
      CHECK(residual_inf(op, zeta, phi, rhs) <= 1e-10 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("first resolvent identity on both backends") {
  std::mt19937_64 rng(31);
  const Complex z1(-4.0, 6.0), z2(2.0, -9.0);

  DiagonalOperator diag({Complex(1.0, 0.1), Complex(2.5, -0.3), Complex(4.0, 0.0)});
  const auto tri = fd_build(2.0, 8, std::vector<double>(8, 1.0));

  auto check_identity = [&](const OperatorDescriptor& op) {
    const State phi = random_state(rng, op.dim());
    const State r1 = op.resolvent_solve(z1, phi);
    const State r2 = op.resolvent_solve(z2, phi);
    const State r12 = op.resolvent_solve(z1, r2);
    for (int j = 0; j < op.dim(); ++j) {
      CHECK(std::abs((r1[j] - r2[j]) - (z2 - z1) * r12[j]) <= 1e-8);
    }
  };
  check_identity(diag);
  check_identity(tri);
}

TEST_CASE("scaled operator") {
  auto inner = std::make_shared<DiagonalOperator>(
      std::vector<Complex>{Complex(1.0, 0.0), Complex(3.0, 0.0)});
  ScaledOperator half(inner, 0.5);
  CHECK(half.envelope().b_s == doctest::Approx(0.5).epsilon(1e-15));
  const State phi{Complex(1.0, 0.0), Complex(2.0, 0.0)};
  const State hphi = half.apply(phi);
  CHECK(std::abs(hphi[0] - Complex(0.5, 0.0)) <= 1e-15);
  CHECK(std::abs(hphi[1] - Complex(3.0, 0.0)) <= 1e-15);
  const Complex zeta(0.0, 2.0);
  const State r = half.resolvent_solve(zeta, phi);
  for (int j = 0; j < 2; ++j) {
    const Complex lam = 0.5 * inner->eigenvalues()[j];
    CHECK(std::abs(r[j] - phi[j] / (zeta - lam)) <= 1e-14);
  }
  // Both the wrapper and the inner operator counted one solve each.
  CHECK(half.solve_count() == 1);
  CHECK(inner->solve_count() == 1);
}

TEST_CASE("solve counter") {
  DiagonalOperator op({Complex(1.0, 0.0)});
  op.reset_solve_count();
  const State rhs{Complex(1.0, 0.0)};
  for (int k = 0; k < 7; ++k) (void)op.resolvent_solve(Complex(0.0, 2.0 + k), rhs);
  CHECK(op.solve_count() == 7);
  op.reset_solve_count();
  CHECK(op.solve_count() == 0);
}

TEST_SUITE_END();
