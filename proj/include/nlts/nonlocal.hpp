#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "nlts/contour.hpp"
#include "nlts/grid.hpp"
#include "nlts/types.hpp"

namespace nlts {

struct NonlocalTerm {
  Complex alpha;
  double t = 0.0;  // in (0, T]
};

/// Nonlocal condition Psi(0) + sum_k alpha_k Psi(t_k) = Psi_0, together with
/// its transformed parameters s_k = 2 t_k / T - 1 on [-1, 1].
struct NonlocalCondition {
  NonlocalCondition() = default;
  NonlocalCondition(std::vector<NonlocalTerm> terms_in, double T_in);

  std::vector<NonlocalTerm> terms;
  double T = 1.0;
  std::vector<std::pair<Complex, double>> s_terms;  // (alpha_k, s_k)

  bool empty() const { return terms.empty(); }
};

/// Time-dependent multiplication potential V(t) = time_factor(t) * diag(profile).
/// An empty profile means spatially uniform action. This is the structured
/// realization of the Lipschitz multiplication potentials the scheme accepts.
struct Potential {
  int dim = 0;
  bool zero = true;
  std::function<Complex(double)> time_factor;
  std::vector<Complex> profile;   // empty => uniform
  double lipschitz_K = 0.0;
  double bound_MV = 0.0;

  bool uniform() const { return profile.empty(); }
  Complex factor_at(double t) const { return zero ? Complex(0.0) : time_factor(t); }

  /// Pointwise multipliers at time t, length dim.
  State action(double t) const;
};

Potential zero_potential(int dim);
Potential constant_potential(int dim, Complex c);
Potential cosine_potential(int dim, double a, double f, double phase);
Potential separable_potential(double a, double f, std::vector<Complex> profile);

/// First-row coefficients a_l = sum_k alpha_k L_l(s_k).
std::vector<Complex> a_coeffs(const ChebyshevGrid& grid, const NonlocalCondition& cond);

/// b(z) = 1 + sum_k alpha_k exp(-i t_k z)  (original time variable).
Complex b_of_z(const NonlocalCondition& cond, Complex zeta);

/// b_N(z) = 1 + sum_l a_l exp(-i z (s_l - s_0))  (grid analogue, s variable).
Complex bN_of_z(const ChebyshevGrid& grid, const std::vector<Complex>& a, Complex zeta);

/// Scalar analytic function with closed-form derivative, as consumed by the
/// argument-principle search.
struct AnalyticFn {
  std::function<Complex(Complex)> f;
  std::function<Complex(Complex)> df;
};

AnalyticFn b_function(const NonlocalCondition& cond);
AnalyticFn bN_function(const ChebyshevGrid& grid, std::vector<Complex> a);

struct Box {
  double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
  double width() const { return re_hi - re_lo; }
  double height() const { return im_hi - im_lo; }
};

/// Default search rectangle for an exponential sum 1 + sum c_j e^{-i w_j z}
/// with smallest positive exponent w_min and coefficient mass amp_sum,
/// anchored at the contour's left end c_left.
Box default_zero_box(double c_left, double w_min, double amp_sum);

/// All zeros of fn inside the box, found by recursive argument-principle
/// quadrisection with Newton polish. Zeros are returned sorted by (Re, Im);
/// a zero of multiplicity m appears m times. Fails (ZeroFindError) when the
/// boundary winding cannot be certified or counts do not add up.
std::vector<Complex> find_zeros(const AnalyticFn& fn, const Box& box);

struct SeparationReport {
  bool ok = true;
  double min_distance = std::numeric_limits<double>::infinity();
  std::optional<Complex> offending;
};

/// Every zero must lie outside the closed region bounded by Gamma_0.
SeparationReport check_separation(const std::vector<Complex>& zeros,
                                  const HyperbolicContour& contour);

/// Two-branch scalar weight of the discrete inverse:
///   f(s, z, l) = e^{-i z s} / b_N(z) * [ 1 + sum_{p<l} a_p e^{-i z (s_p - s_0)} ]   s >= s_l
///   f(s, z, l) = e^{-i z s} / b_N(z) * [ -sum_{p>=l} a_p e^{-i z (s_p - s_0)} ]     s <  s_l
Complex f_weight(double s, Complex zeta, int l, const ChebyshevGrid& grid,
                 const std::vector<Complex>& a, Complex bN_value);

/// g(s, z, j) = sum_{l=1}^{N} f(s, z, l) * integral_{s_{l-1}}^{s_l} e^{i z t} V(t) L_j(t) dt,
/// returned as a pointwise multiplication profile.
State g_weight(double s, Complex zeta, int j, const ChebyshevGrid& grid,
               const std::vector<Complex>& a, const Potential& V, int panels);

} // namespace nlts
