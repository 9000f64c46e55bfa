#include "nlts/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nlts/errors.hpp"
#include "nlts/gauss.hpp"

namespace nlts {

namespace {
constexpr double kPi = std::numbers::pi;
}

NonlocalCondition::NonlocalCondition(std::vector<NonlocalTerm> terms_in, double T_in)
    : terms(std::move(terms_in)), T(T_in) {
  if (T <= 0.0) throw ConfigError("NonlocalCondition: T must be positive");
  s_terms.reserve(terms.size());
  for (const NonlocalTerm& term : terms) {
    if (term.t <= 0.0 || term.t > T) {
      throw ConfigError("NonlocalCondition: every t_k must lie in (0, T]");
    }
    s_terms.emplace_back(term.alpha, 2.0 * term.t / T - 1.0);
  }
}

State Potential::action(double t) const {
  State out(dim, Complex(0.0));
  if (zero) return out;
  const Complex f = time_factor(t);
  if (profile.empty()) {
    std::fill(out.begin(), out.end(), f);
  } else {
    for (int j = 0; j < dim; ++j) out[j] = f * profile[j];
  }
  return out;
}

Potential zero_potential(int dim) {
  Potential v;
  v.dim = dim;
  v.zero = true;
  return v;
}

Potential constant_potential(int dim, Complex c) {
  Potential v;
  v.dim = dim;
  v.zero = false;
  v.time_factor = [c](double) { return c; };
  v.lipschitz_K = 0.0;
  v.bound_MV = std::abs(c);
  return v;
}

Potential cosine_potential(int dim, double a, double f, double phase) {
  Potential v;
  v.dim = dim;
  v.zero = false;
  v.time_factor = [a, f, phase](double t) { return Complex(a * std::cos(f * t + phase)); };
  v.lipschitz_K = std::abs(a * f);
  v.bound_MV = std::abs(a);
  return v;
}

Potential separable_potential(double a, double f, std::vector<Complex> profile) {
  Potential v;
  v.dim = static_cast<int>(profile.size());
  v.zero = false;
  v.time_factor = [a, f](double t) { return Complex(a * std::cos(f * t)); };
  v.profile = std::move(profile);
  double umax = 0.0;
  for (const Complex& u : v.profile) umax = std::max(umax, std::abs(u));
  v.lipschitz_K = std::abs(a * f) * umax;
  v.bound_MV = std::abs(a) * umax;
  return v;
}

std::vector<Complex> a_coeffs(const ChebyshevGrid& grid, const NonlocalCondition& cond) {
  std::vector<Complex> a(grid.N + 1, Complex(0.0));
  for (const auto& [alpha, sk] : cond.s_terms) {
    for (int l = 0; l <= grid.N; ++l) {
      a[l] += alpha * lagrange(grid, l, sk);
    }
  }
  return a;
}

Complex b_of_z(const NonlocalCondition& cond, Complex zeta) {
  Complex b(1.0, 0.0);
  for (const NonlocalTerm& term : cond.terms) {
    b += term.alpha * std::exp(Complex(0.0, -term.t) * zeta);
  }
  return b;
}

Complex bN_of_z(const ChebyshevGrid& grid, const std::vector<Complex>& a, Complex zeta) {
  Complex b(1.0, 0.0);
  for (int l = 0; l <= grid.N; ++l) {
    b += a[l] * std::exp(Complex(0.0, -(grid.nodes[l] - grid.nodes[0])) * zeta);
  }
  return b;
}

AnalyticFn b_function(const NonlocalCondition& cond) {
  AnalyticFn fn;
  fn.f = [cond](Complex zeta) { return b_of_z(cond, zeta); };
  fn.df = [cond](Complex zeta) {
    Complex d(0.0, 0.0);
    for (const NonlocalTerm& term : cond.terms) {
      d += term.alpha * Complex(0.0, -term.t) * std::exp(Complex(0.0, -term.t) * zeta);
    }
    return d;
  };
  return fn;
}

AnalyticFn bN_function(const ChebyshevGrid& grid, std::vector<Complex> a) {
  std::vector<double> w(grid.N + 1);
  for (int l = 0; l <= grid.N; ++l) w[l] = grid.nodes[l] - grid.nodes[0];
  AnalyticFn fn;
  fn.f = [a, w](Complex zeta) {
    Complex b(1.0, 0.0);
    for (std::size_t l = 0; l < a.size(); ++l) {
      b += a[l] * std::exp(Complex(0.0, -w[l]) * zeta);
    }
    return b;
  };
  fn.df = [a, w](Complex zeta) {
    Complex d(0.0, 0.0);
    for (std::size_t l = 0; l < a.size(); ++l) {
      d += a[l] * Complex(0.0, -w[l]) * std::exp(Complex(0.0, -w[l]) * zeta);
    }
    return d;
  };
  return fn;
}

Box default_zero_box(double c_left, double w_min, double amp_sum) {
  if (w_min <= 0.0) throw ConfigError("default_zero_box: w_min must be positive");
  const double y = std::log1p(amp_sum) / w_min + 1.0;
  return Box{c_left - 1.0, c_left + 4.0 * kPi / w_min + 1.0, -y, y};
}

// ---------------------------------------------------------------------------
// Argument-principle zero search.
// ---------------------------------------------------------------------------

namespace {

struct BoundaryHazard {};  // zero (numerically) on a box edge; retry elsewhere

Complex corner(const Box& b, int k) {
  switch (k & 3) {
    case 0: return {b.re_lo, b.im_lo};
    case 1: return {b.re_hi, b.im_lo};
    case 2: return {b.re_hi, b.im_hi};
    default: return {b.re_lo, b.im_hi};
  }
}

// Trapezoid of f'/f around the box, counterclockwise. Returns the winding
// estimate together with the smallest |f| seen on the boundary.
std::pair<double, double> winding_estimate(const AnalyticFn& fn, const Box& box,
                                           int per_edge) {
  Complex acc(0.0, 0.0);
  double min_abs = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (int e = 0; e < 4; ++e) {
    const Complex a = corner(box, e);
    const Complex b = corner(box, e + 1);
    const Complex dz = (b - a) / static_cast<double>(per_edge);
    Complex prev = fn.df(a) / fn.f(a);
    {
      const double fa = std::abs(fn.f(a));
      min_abs = std::min(min_abs, fa);
      max_abs = std::max(max_abs, fa);
    }
    for (int i = 1; i <= per_edge; ++i) {
      const Complex zi = a + dz * static_cast<double>(i);
      const Complex fz = fn.f(zi);
      min_abs = std::min(min_abs, std::abs(fz));
      max_abs = std::max(max_abs, std::abs(fz));
      const Complex cur = fn.df(zi) / fz;
      acc += 0.5 * (prev + cur) * dz;
      prev = cur;
    }
  }
  const double winding = (acc / Complex(0.0, 2.0 * kPi)).real();
  if (min_abs < 1e-11 * (1.0 + max_abs)) throw BoundaryHazard{};
  return {winding, min_abs};
}

int certified_winding(const AnalyticFn& fn, const Box& box) {
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int per_edge = 128; per_edge <= 8192; per_edge *= 2) {
    const auto [w, min_abs] = winding_estimate(fn, box, per_edge);
    const double rounded = std::round(w);
    if (std::abs(w - rounded) < 0.05 && !std::isnan(prev) && std::abs(w - prev) < 0.05) {
      if (rounded < -0.5) {
        throw ZeroFindError("find_zeros: negative winding number (function not analytic?)");
      }
      return static_cast<int>(rounded);
    }
    prev = w;
  }
  // A non-stabilizing count means a zero sits (numerically) on the boundary
  // even if no sample happened to land on it; the caller moves the boundary.
  throw BoundaryHazard{};
}

Complex newton_polish(const AnalyticFn& fn, Complex seed) {
  Complex zc = seed;
  for (int it = 0; it < 80; ++it) {
    const Complex f = fn.f(zc);
    if (std::abs(f) <= 1e-12 * (1.0 + std::abs(zc))) return zc;
    const Complex df = fn.df(zc);
    if (std::abs(df) < 1e-300) break;
    zc -= f / df;
  }
  return zc;
}

constexpr double kCoarseCell = 1e-3;
constexpr double kFineCell = 1e-6;

void collect_zeros(const AnalyticFn& fn, const Box& box, int winding, int depth,
                   std::vector<Complex>& out) {
  if (winding == 0) return;
  const double diam = std::max(box.width(), box.height());
  const bool at_coarse = diam <= kCoarseCell;
  const bool at_fine = diam <= kFineCell;
  if ((winding == 1 && at_coarse) || at_fine || depth > 48) {
    const Complex center(0.5 * (box.re_lo + box.re_hi), 0.5 * (box.im_lo + box.im_hi));
    const Complex zc = newton_polish(fn, center);
    if (std::abs(fn.f(zc)) > 1e-9 * (1.0 + std::abs(zc)) ||
        std::abs(zc - center) > 4.0 * diam + 1e-6) {
      throw ZeroFindError("find_zeros: Newton polish failed inside a terminal cell");
    }
    for (int k = 0; k < winding; ++k) out.push_back(zc);
    return;
  }

  // Quadrisect; nudge the split point if a zero happens to sit on a cut line.
  static constexpr double kFracs[] = {0.5, 0.47, 0.53, 0.44, 0.56};
  for (double frac : kFracs) {
    const double rm = box.re_lo + frac * box.width();
    const double im = box.im_lo + frac * box.height();
    const Box quads[4] = {
        {box.re_lo, rm, box.im_lo, im},
        {rm, box.re_hi, box.im_lo, im},
        {box.re_lo, rm, im, box.im_hi},
        {rm, box.re_hi, im, box.im_hi},
    };
    int w[4];
    int total = 0;
    bool ok = true;
    try {
      for (int q = 0; q < 4; ++q) {
        w[q] = certified_winding(fn, quads[q]);
        total += w[q];
      }
    } catch (const BoundaryHazard&) {
      ok = false;
    }
    if (!ok || total != winding) continue;
    for (int q = 0; q < 4; ++q) collect_zeros(fn, quads[q], w[q], depth + 1, out);
    return;
  }
  throw ZeroFindError("find_zeros: could not certify a subdivision (zero on every cut?)");
}

} // namespace

std::vector<Complex> find_zeros(const AnalyticFn& fn, const Box& box) {
  if (!(box.re_hi > box.re_lo) || !(box.im_hi > box.im_lo)) {
    throw ConfigError("find_zeros: degenerate box");
  }
  Box b = box;
  for (int attempt = 0;; ++attempt) {
    try {
      const int total = certified_winding(fn, b);
      std::vector<Complex> out;
      collect_zeros(fn, b, total, 0, out);
      std::sort(out.begin(), out.end(), [](const Complex& x, const Complex& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
      });
      return out;
    } catch (const BoundaryHazard&) {
      if (attempt >= 5) {
        throw ZeroFindError(
            "find_zeros: could not certify the boundary winding (zero pinned to the "
            "search box boundary?)");
      }
      const double dr = 1e-3 * (1.0 + b.width()) * (attempt + 1);
      const double di = 1e-3 * (1.0 + b.height()) * (attempt + 1);
      b = Box{b.re_lo - dr, b.re_hi + dr, b.im_lo - di, b.im_hi + di};
    }
  }
}

SeparationReport check_separation(const std::vector<Complex>& zeros,
                                  const HyperbolicContour& contour) {
  if (std::abs(contour.d - kPi / 6.0) > 1e-14) {
    throw ConfigError("check_separation: contour must be built with d = pi/6");
  }
  SeparationReport report;
  if (zeros.empty()) return report;

  double re_needed = contour.c_I + 1.0;
  for (const Complex& zk : zeros) re_needed = std::max(re_needed, zk.real());
  const double nu_max =
      std::max(8.0, contour.a_I > 0.0 ? (re_needed + 2.0 - contour.c_I) / contour.a_I : 8.0);
  const auto g0 = sample_gamma0(contour, nu_max, 2048);

  for (const Complex& zk : zeros) {
    report.min_distance = std::min(report.min_distance, distance_to_polyline(g0, zk));
    if (right_region_contains(g0, zk)) {
      report.ok = false;
      if (!report.offending) report.offending = zk;
    }
  }
  return report;
}

Complex f_weight(double s, Complex zeta, int l, const ChebyshevGrid& grid,
                 const std::vector<Complex>& a, Complex bN_value) {
  if (l < 0 || l > grid.N) throw ConfigError("f_weight: column index out of range");
  double amp = 0.0;
  for (const Complex& al : a) amp += std::abs(al);
  if (std::abs(bN_value) < 1e-12 * (1.0 + amp)) {
    throw SeparationError("f_weight: b_N vanishes at a quadrature point", zeta);
  }
  Complex bracket(0.0, 0.0);
  if (s >= grid.nodes[l]) {
    bracket = Complex(1.0, 0.0);
    for (int p = 0; p < l; ++p) {
      bracket += a[p] * std::exp(Complex(0.0, -(grid.nodes[p] - grid.nodes[0])) * zeta);
    }
  } else {
    for (int p = l; p <= grid.N; ++p) {
      bracket -= a[p] * std::exp(Complex(0.0, -(grid.nodes[p] - grid.nodes[0])) * zeta);
    }
  }
  return std::exp(Complex(0.0, -s) * zeta) / bN_value * bracket;
}

State g_weight(double s, Complex zeta, int j, const ChebyshevGrid& grid,
               const std::vector<Complex>& a, const Potential& V, int panels) {
  if (panels < 1) throw ConfigError("g_weight: panels must be >= 1");
  State out(V.dim, Complex(0.0));
  if (V.zero) return out;
  const Complex bN = bN_of_z(grid, a, zeta);
  Complex uniform_acc(0.0, 0.0);
  for (int l = 1; l <= grid.N; ++l) {
    const Complex fl = f_weight(s, zeta, l, grid, a, bN);
    Complex integral(0.0, 0.0);
    gauss8_panels(grid.nodes[l - 1], grid.nodes[l], panels, [&](double t, double w) {
      integral += w * std::exp(Complex(0.0, t) * zeta) * V.factor_at(t) *
                  lagrange(grid, j, t);
    });
    uniform_acc += fl * integral;
  }
  if (V.uniform()) {
    std::fill(out.begin(), out.end(), uniform_acc);
  } else {
    for (int k = 0; k < V.dim; ++k) out[k] = uniform_acc * V.profile[k];
  }
  return out;
}

} // namespace nlts
