#include "nlts/operator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlts/errors.hpp"

namespace nlts {

double envelope_distance(const SpectralEnvelope& env, Complex zeta) {
  const double dy = std::max(0.0, std::abs(zeta.imag()) - env.d_s);
  if (zeta.real() >= env.b_s) return dy;
  return std::hypot(env.b_s - zeta.real(), dy);
}

State OperatorDescriptor::resolvent_solve(Complex zeta, const State& rhs) const {
  if (static_cast<int>(rhs.size()) != dim()) {
    throw ConfigError("resolvent_solve: rhs dimension mismatch");
  }
  if (envelope_distance(envelope(), zeta) < 1e-6) {
    std::ostringstream msg;
    msg << "resolvent_solve: zeta = (" << zeta.real() << ", " << zeta.imag()
        << ") within 1e-6 of the declared spectral envelope";
    throw SpectralProximityError(msg.str());
  }
  State out(rhs.size());
  do_resolvent_solve(zeta, rhs, out);
  solves_.fetch_add(1, std::memory_order_relaxed);
  return out;
}

State OperatorDescriptor::apply(const State& phi) const {
  if (static_cast<int>(phi.size()) != dim()) {
    throw ConfigError("apply: dimension mismatch");
  }
  State out(phi.size());
  do_apply(phi, out);
  return out;
}

State OperatorDescriptor::apply_power(int r, const State& phi) const {
  if (r < 0) throw ConfigError("apply_power: power must be >= 0");
  if (r > smoothness_order()) {
    throw ConfigError("apply_power: power exceeds declared smoothness order");
  }
  State out = phi;
  for (int k = 0; k < r; ++k) out = apply(out);
  return out;
}

DiagonalOperator::DiagonalOperator(std::vector<Complex> eigenvalues, int smoothness,
                                   std::optional<SpectralEnvelope> envelope)
    : eigenvalues_(std::move(eigenvalues)), smoothness_(smoothness) {
  if (eigenvalues_.empty()) throw ConfigError("DiagonalOperator: empty spectrum");
  double b_s = eigenvalues_[0].real();
  double d_s = 0.0;
  for (const Complex& lam : eigenvalues_) {
    b_s = std::min(b_s, lam.real());
    d_s = std::max(d_s, std::abs(lam.imag()));
  }
  if (envelope) {
    if (envelope->b_s > b_s || envelope->d_s < d_s) {
      throw ConfigError("DiagonalOperator: declared envelope does not contain the spectrum");
    }
    env_ = *envelope;
  } else {
    env_ = SpectralEnvelope{b_s, d_s, 1.0};
  }
}

void DiagonalOperator::do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                                          std::span<Complex> out) const {
  for (std::size_t j = 0; j < rhs.size(); ++j) {
    out[j] = rhs[j] / (zeta - eigenvalues_[j]);
  }
}

void DiagonalOperator::do_apply(std::span<const Complex> phi,
                                std::span<Complex> out) const {
  for (std::size_t j = 0; j < phi.size(); ++j) out[j] = eigenvalues_[j] * phi[j];
}

TridiagonalOperator::TridiagonalOperator(std::vector<Complex> diag,
                                         std::vector<Complex> off, int smoothness)
    : diag_(std::move(diag)), off_(std::move(off)), smoothness_(smoothness) {
  const int n = static_cast<int>(diag_.size());
  if (n < 1) throw ConfigError("TridiagonalOperator: empty diagonal");
  if (static_cast<int>(off_.size()) != std::max(0, n - 1)) {
    throw ConfigError("TridiagonalOperator: off-diagonal must have dim - 1 entries");
  }
  double b_s = diag_[0].real();
  double d_s = 0.0;
  bool real_entries = true;
  for (int j = 0; j < n; ++j) {
    double radius = 0.0;
    if (j > 0) radius += std::abs(off_[j - 1]);
    if (j < n - 1) radius += std::abs(off_[j]);
    b_s = std::min(b_s, diag_[j].real() - radius);
    if (diag_[j].imag() != 0.0) real_entries = false;
    d_s = std::max(d_s, std::abs(diag_[j].imag()) + radius);
  }
  for (const Complex& c : off_) {
    if (c.imag() != 0.0) real_entries = false;
  }
  // Hermitian case: spectrum on the real axis regardless of Gershgorin radii.
  env_ = SpectralEnvelope{b_s, real_entries ? 0.0 : d_s, 1.0};
}

void TridiagonalOperator::do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                                             std::span<Complex> out) const {
  // Tridiagonal elimination with partial pivoting (one fill-in superdiagonal).
  // The contour can pass close to individual Gershgorin discs, so the
  // pivot-free variant is not safe here.
  const int n = dim();
  std::vector<Complex> dl(n), dd(n), du(n, Complex(0.0)), du2(n, Complex(0.0));
  std::vector<Complex> x(rhs.begin(), rhs.end());
  for (int i = 0; i < n; ++i) dd[i] = zeta - diag_[i];
  for (int i = 1; i < n; ++i) dl[i] = -off_[i - 1];
  for (int i = 0; i + 1 < n; ++i) du[i] = -off_[i];

  for (int k = 0; k + 1 < n; ++k) {
    if (std::abs(dd[k]) >= std::abs(dl[k + 1])) {
      if (dd[k] == Complex(0.0)) {
        throw NumericsError("tridiagonal solve: zero pivot (operator singular at zeta)");
      }
      const Complex m = dl[k + 1] / dd[k];
      dd[k + 1] -= m * du[k];
      du[k + 1] -= m * du2[k];
      du2[k + 1] = Complex(0.0);
      x[k + 1] -= m * x[k];
    } else {
      // Swap rows k and k+1, then eliminate. The swapped-in row brings a
      // fill-in entry at column k+2.
      const Complex m = dd[k] / dl[k + 1];
      const Complex old_du = du[k];
      const Complex old_du2 = du2[k];
      const Complex next_dd = dd[k + 1];
      const Complex next_du = du[k + 1];
      dd[k] = dl[k + 1];
      du[k] = next_dd;
      du2[k] = next_du;
      dd[k + 1] = old_du - m * next_dd;
      du[k + 1] = old_du2 - m * next_du;
      du2[k + 1] = Complex(0.0);
      const Complex xk = x[k];
      x[k] = x[k + 1];
      x[k + 1] = xk - m * x[k];
    }
  }
  if (dd[n - 1] == Complex(0.0)) {
    throw NumericsError("tridiagonal solve: zero pivot (operator singular at zeta)");
  }
  x[n - 1] /= dd[n - 1];
  if (n >= 2) x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2];
  for (int k = n - 3; k >= 0; --k) {
    x[k] = (x[k] - du[k] * x[k + 1] - du2[k] * x[k + 2]) / dd[k];
  }
  std::copy(x.begin(), x.end(), out.begin());
}

void TridiagonalOperator::do_apply(std::span<const Complex> phi,
                                   std::span<Complex> out) const {
  const int n = dim();
  for (int j = 0; j < n; ++j) {
    Complex v = diag_[j] * phi[j];
    if (j > 0) v += off_[j - 1] * phi[j - 1];
    if (j < n - 1) v += off_[j] * phi[j + 1];
    out[j] = v;
  }
}

TridiagonalOperator fd_build(double L, int nx, const std::vector<double>& U,
                             int smoothness) {
  if (L <= 0.0) throw ConfigError("fd_build: L must be positive");
  if (nx < 1) throw ConfigError("fd_build: nx must be >= 1");
  if (static_cast<int>(U.size()) != nx) {
    throw ConfigError("fd_build: potential must have nx samples");
  }
  const double dx = L / (nx + 1);
  const double inv2 = 1.0 / (dx * dx);
  std::vector<Complex> diag(nx), off(std::max(0, nx - 1), Complex(-inv2));
  for (int j = 0; j < nx; ++j) diag[j] = Complex(2.0 * inv2 + U[j], 0.0);
  return TridiagonalOperator(std::move(diag), std::move(off), smoothness);
}

ScaledOperator::ScaledOperator(std::shared_ptr<const OperatorDescriptor> inner,
                               double gamma)
    : inner_(std::move(inner)), gamma_(gamma) {
  if (!inner_) throw ConfigError("ScaledOperator: null inner operator");
  if (gamma_ <= 0.0) throw ConfigError("ScaledOperator: gamma must be positive");
}

SpectralEnvelope ScaledOperator::envelope() const {
  const SpectralEnvelope e = inner_->envelope();
  return SpectralEnvelope{gamma_ * e.b_s, gamma_ * e.d_s, e.M};
}

void ScaledOperator::do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                                        std::span<Complex> out) const {
  // (zeta - gamma H)^{-1} = gamma^{-1} (zeta/gamma - H)^{-1}
  State tmp = inner_->resolvent_solve(zeta / gamma_, State(rhs.begin(), rhs.end()));
  for (std::size_t j = 0; j < tmp.size(); ++j) out[j] = tmp[j] / gamma_;
}

void ScaledOperator::do_apply(std::span<const Complex> phi, std::span<Complex> out) const {
  State tmp = inner_->apply(State(phi.begin(), phi.end()));
  for (std::size_t j = 0; j < tmp.size(); ++j) out[j] = gamma_ * tmp[j];
}

} // namespace nlts
