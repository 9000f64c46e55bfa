#include "nlts/contour.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nlts/errors.hpp"

namespace nlts {

namespace {

constexpr double kPi = std::numbers::pi;

// Effective envelope half-height used when the declared d_s degenerates.
// The contour opens at rate a_I ~ d_s, so the trapezoid rule only reaches its
// algebraic order once n h a_I clears the spectral scale; a floor much below
// 0.1 pushes that point beyond any practical n, while a floor much above it
// lets the protected region around the spectrum swallow nearby zeros of the
// nonlocal symbol.
constexpr double kHermitianFloor = 0.1;

bool is_pi_sixth(double d) { return std::abs(d - kPi / 6.0) < 1e-14; }

} // namespace

Complex HyperbolicContour::map(Complex xi) const {
  // pi/2 + xi^2 stays clear of the sqrt branch cut for |Im xi| <= pi/6.
  return c_I + a_I * std::sqrt(Complex(kPi / 2.0, 0.0) + xi * xi) -
         Complex(0.0, d_I) * std::tanh(xi);
}

Complex HyperbolicContour::map_deriv(Complex xi) const {
  const Complex t = std::tanh(xi);
  return a_I * xi / std::sqrt(Complex(kPi / 2.0, 0.0) + xi * xi) +
         Complex(0.0, d_I) * (t * t - 1.0);
}

HyperbolicContour build_contour(const SpectralEnvelope& env, double d) {
  if (!(d > 0.0) || d > kPi / 6.0 + 1e-15) {
    throw ConfigError("build_contour: d must lie in (0, pi/6]");
  }
  if (env.d_s < 0.0) throw ConfigError("build_contour: d_s must be >= 0");
  const double ds_eff = std::max(env.d_s, kHermitianFloor);
  HyperbolicContour c;
  c.d = d;
  c.a_I = ds_eff / (kPi / 2.0 - d);
  c.d_I = ds_eff * kPi / (kPi - 2.0 * d);
  c.c_I = env.b_s - c.a_I * std::sqrt(kPi / 2.0 - d * d) - c.d_I * std::tan(d);
  c.sigma = 1.0;
  c.eta = 0.0;
  return c;
}

Complex z(const HyperbolicContour& contour, double nu) {
  return contour.map(Complex(contour.sigma * nu, contour.eta));
}

Complex dz(const HyperbolicContour& contour, double nu) {
  return contour.map_deriv(Complex(contour.sigma * nu, contour.eta)) * contour.sigma;
}

double z0(const SpectralEnvelope& env, const HyperbolicContour& contour) {
  return std::min(0.0, env.b_s -
                           contour.a_I * std::sqrt(kPi / 2.0 - contour.d * contour.d) -
                           1.0);
}

Complex gamma0(const HyperbolicContour& contour, double nu) {
  if (!is_pi_sixth(contour.d)) {
    throw ConfigError("gamma0: contour must be built with d = pi/6");
  }
  if (!contour.is_identity()) {
    throw ConfigError("gamma0: contour must carry the identity reparametrization");
  }
  return contour.map(Complex(nu, kPi / 6.0));
}

std::vector<Complex> sample_gamma0(const HyperbolicContour& contour, double nu_max,
                                   int count) {
  std::vector<Complex> pts(count);
  for (int i = 0; i < count; ++i) {
    const double nu = -nu_max + 2.0 * nu_max * i / (count - 1);
    pts[i] = contour.map(Complex(nu, kPi / 6.0));
  }
  return pts;
}

std::vector<Complex> sample_trace(const HyperbolicContour& contour, double nu_max,
                                  int count) {
  std::vector<Complex> pts(count);
  for (int i = 0; i < count; ++i) {
    const double nu = -nu_max + 2.0 * nu_max * i / (count - 1);
    pts[i] = z(contour, nu);
  }
  return pts;
}

bool right_region_contains(const std::vector<Complex>& trace, Complex pt) {
  // Close the curve to the right and run an even-odd crossing test.
  const double re_max =
      std::max(pt.real(),
               std::max(trace.front().real(), trace.back().real())) +
      10.0;
  std::vector<Complex> poly = trace;
  poly.emplace_back(re_max, trace.back().imag());
  poly.emplace_back(re_max, trace.front().imag());

  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double yi = poly[i].imag(), yj = poly[j].imag();
    const double xi = poly[i].real(), xj = poly[j].real();
    if ((yi > pt.imag()) != (yj > pt.imag())) {
      const double x_cross = xj + (pt.imag() - yj) / (yi - yj) * (xi - xj);
      if (pt.real() < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polyline(const std::vector<Complex>& trace, Complex pt) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const Complex a = trace[i], b = trace[i + 1];
    const Complex ab = b - a;
    const double len2 = std::norm(ab);
    double t = 0.0;
    if (len2 > 0.0) {
      t = std::clamp(((pt - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
    }
    best = std::min(best, std::abs(pt - (a + t * ab)));
  }
  return best;
}

namespace {

// Largest admissible nu range: far enough that the curve's real part passes
// every query point.
double trace_extent(const HyperbolicContour& contour, const std::vector<Complex>& zeros) {
  double re_needed = contour.c_I + 1.0;
  for (const Complex& zk : zeros) re_needed = std::max(re_needed, zk.real());
  const double nu_for_re =
      contour.a_I > 0.0 ? (re_needed + 2.0 - contour.c_I) / contour.a_I : 8.0;
  return std::max(8.0, nu_for_re);
}

struct Preimage {
  bool found = false;
  Complex w;
};

// Newton search for w with map(w) == target and Im(w) in (-pi/6, 0).
// Returns the preimage with the largest imaginary part (the first one a
// downward-growing band would touch).
Preimage band_preimage(const HyperbolicContour& contour, Complex target, double x_max) {
  const double tol = 1e-11 * (1.0 + std::abs(target));
  const int nx = 192, ny = 24;
  // Rank coarse-grid cells by residual, then polish the best few.
  std::vector<std::pair<double, Complex>> seeds;
  for (int i = 0; i <= nx; ++i) {
    const double x = -x_max + 2.0 * x_max * i / nx;
    for (int j = 1; j < ny; ++j) {
      const double y = -kPi / 6.0 * j / ny;
      const Complex w(x, y);
      seeds.emplace_back(std::abs(contour.map(w) - target), w);
    }
  }
  std::partial_sort(seeds.begin(), seeds.begin() + 8, seeds.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });

  Preimage best;
  bool any_converged = false;
  const double coarse_min = seeds.front().first;
  for (int k = 0; k < 8; ++k) {
    Complex w = seeds[k].second;
    bool converged = false;
    for (int it = 0; it < 80; ++it) {
      const Complex f = contour.map(w) - target;
      if (std::abs(f) <= tol) {
        converged = true;
        break;
      }
      const Complex df = contour.map_deriv(w);
      if (std::abs(df) < 1e-300) break;
      w -= f / df;
      if (std::abs(w.imag()) > kPi / 2.0 || std::abs(w.real()) > 4.0 * x_max) break;
    }
    if (!converged) continue;
    any_converged = true;  // a preimage outside the band is a determinate answer
    if (w.imag() <= -kPi / 6.0 + 1e-9 || w.imag() >= -1e-12) continue;
    if (!best.found || w.imag() > best.w.imag()) {
      best.found = true;
      best.w = w;
    }
  }
  if (!best.found && !any_converged &&
      coarse_min < 0.02 * (1.0 + std::abs(target))) {
    throw NumericsError(
        "adjust_for_zeros: preimage iteration did not converge near a candidate zero");
  }
  return best;
}

} // namespace

std::pair<HyperbolicContour, double> adjust_for_zeros(const HyperbolicContour& contour,
                                                      const std::vector<Complex>& zeros) {
  if (!contour.is_identity() || !is_pi_sixth(contour.d)) {
    throw ConfigError("adjust_for_zeros: expects an identity contour with d = pi/6");
  }
  const double dc_full = kPi / 6.0;
  if (zeros.empty()) return {contour, dc_full};

  const double nu_max = trace_extent(contour, zeros);
  const auto g0 = sample_gamma0(contour, nu_max, 2048);
  for (const Complex& zk : zeros) {
    if (right_region_contains(g0, zk)) {
      throw SeparationError("adjust_for_zeros: zero inside the region bounded by Gamma_0",
                            zk);
    }
  }

  double d_c = dc_full;
  for (const Complex& zk : zeros) {
    const Preimage p = band_preimage(contour, zk, nu_max);
    if (p.found) d_c = std::min(d_c, -p.w.imag());
  }
  if (d_c >= dc_full) return {contour, dc_full};

  HyperbolicContour adjusted = contour;
  adjusted.sigma = 3.0 * d_c / kPi + 0.5;
  adjusted.eta = kPi / 12.0 - d_c / 2.0;
  return {adjusted, d_c};
}

} // namespace nlts
