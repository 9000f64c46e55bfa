#pragma once

#include <utility>
#include <vector>

#include "nlts/types.hpp"

namespace nlts {

/// Half-strip spectral envelope {Re z >= b_s, |Im z| <= d_s} with resolvent
/// bound constant M.
struct SpectralEnvelope {
  double b_s = 0.0;
  double d_s = 0.0;
  double M = 1.0;
};

/// Hyperbolic integration contour z(xi) = c_I + a_I sqrt(pi/2 + xi^2) - i d_I tanh(xi),
/// evaluated through the affine reparametrization xi = sigma nu + i eta.
/// sigma = 1, eta = 0 is the identity (the contour as built).
struct HyperbolicContour {
  double c_I = 0.0;
  double a_I = 0.0;
  double d_I = 0.0;
  double d = 0.0;      // strip half-width the parameters were built for
  double sigma = 1.0;
  double eta = 0.0;

  bool is_identity() const { return sigma == 1.0 && eta == 0.0; }

  /// Raw conformal map and its derivative at a complex strip point xi.
  Complex map(Complex xi) const;
  Complex map_deriv(Complex xi) const;
};

/// Contour parameters for the given envelope and strip half-width d in (0, pi/6].
/// A degenerate (Hermitian) envelope d_s = 0 is replaced by the floor
/// d_s,eff = 0.1: the parameter formulas divide by expressions vanishing with
/// d_s, and the opening rate a_I ~ d_s governs how fast the quadrature enters
/// its algebraic-order regime.
HyperbolicContour build_contour(const SpectralEnvelope& env, double d);

/// z and dz/dnu at real quadrature parameter nu (chain rule through sigma, eta).
Complex z(const HyperbolicContour& contour, double nu);
Complex dz(const HyperbolicContour& contour, double nu);

/// Correction center z_0 = min{0, b_s - a_I sqrt(pi/2 - d^2) - 1}.
double z0(const SpectralEnvelope& env, const HyperbolicContour& contour);

/// Inner safety curve: z evaluated at nu + i pi/6. Requires an identity
/// contour built with d = pi/6.
Complex gamma0(const HyperbolicContour& contour, double nu);

/// Polyline samples of Gamma_0 (count points, nu in [-nu_max, nu_max]).
std::vector<Complex> sample_gamma0(const HyperbolicContour& contour, double nu_max,
                                   int count);

/// Polyline samples of the real-nu contour trace (reparametrization applied).
std::vector<Complex> sample_trace(const HyperbolicContour& contour, double nu_max,
                                  int count);

/// Whether pt lies in the closed right-opening region bounded by the given
/// trace (closed at Re = +infinity).
bool right_region_contains(const std::vector<Complex>& trace, Complex pt);

/// Euclidean distance from pt to the sampled polyline.
double distance_to_polyline(const std::vector<Complex>& trace, Complex pt);

/// Critical-strip adjustment: finds the largest band Im(xi) in (-d_c, pi/6)
/// whose image avoids every given zero, then recenters the quadrature line by
/// the affine substitution xi = (3 d_c / pi + 1/2) nu + i (pi/12 - d_c / 2).
/// Zeros unreachable by the curve family leave the contour unchanged
/// (d_c = pi/6, identity substitution). A zero inside the region bounded by
/// Gamma_0 throws SeparationError.
std::pair<HyperbolicContour, double> adjust_for_zeros(const HyperbolicContour& contour,
                                                      const std::vector<Complex>& zeros);

} // namespace nlts
