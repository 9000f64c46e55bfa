#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "nlts/contour.hpp"
#include "nlts/grid.hpp"
#include "nlts/operator.hpp"
#include "nlts/special.hpp"
#include "nlts/types.hpp"

namespace nlts {

/// Corrected resolvent samples Phi_m = [R(z(mh)) - correction] phi, m = -n..n,
/// stored in ascending m order. The correction removes the first floor(delta)
/// Taylor terms of the resolvent about z_0 so the integrand decays
/// algebraically along the contour.
struct ResolventSampleSet {
  QuadratureParams rule;
  HyperbolicContour contour;
  std::vector<State> samples;  // index m + n
  std::size_t source_tag = 0;  // hash of the right-hand side, diagnostics only
};

/// Scalar quadrature weight w(s, zeta, p).
using WeightFn = std::function<Complex(double, Complex, int)>;

/// Contour-quadrature operator-function engine for a fixed
/// (operator, contour, rule) triple.
///
/// Node solves are independent and run under a parallel map; sums are reduced
/// in ascending node order with a single accumulator, so results are bitwise
/// identical for any worker count.
class PropagatorEngine {
public:
  PropagatorEngine(std::shared_ptr<const OperatorDescriptor> op,
                   HyperbolicContour contour, QuadratureParams rule, int workers = 1);

  const OperatorDescriptor& op() const { return *op_; }
  const HyperbolicContour& contour() const { return contour_; }
  const QuadratureParams& rule() const { return rule_; }
  double correction_center() const { return z0_; }
  int workers() const { return workers_; }

  int node_count() const { return 2 * rule_.n + 1; }
  Complex node_z(int idx) const { return nodes_z_[idx]; }
  Complex node_dz(int idx) const { return nodes_dz_[idx]; }

  /// h / (2 pi i), the reduction prefactor shared by all formulas.
  Complex quadrature_scale() const;

  /// 2n+1 corrected resolvent solves against phi (no caching).
  std::shared_ptr<const ResolventSampleSet> sample_resolvents(const State& phi) const;

  /// Same, but memoized on the numeric content of phi.
  std::shared_ptr<const ResolventSampleSet> cached_samples(const State& phi) const;

  /// Drops memoized sample sets (used when solve accounting restarts).
  void clear_cache() const;

  /// S_l = h/(2 pi i) sum_m dz_m w(s_l, z_m, p) Phi_m for every grid row l.
  /// With zero_below_p, rows l < p are returned as zero vectors.
  BlockVec of_apply(const ResolventSampleSet& samples, const WeightFn& w,
                    const ChebyshevGrid& grid, int p, bool zero_below_p) const;

  /// Approximation of e^{-i s H} phi, s >= 0. Resolvent samples are reused
  /// across calls with the same phi.
  State propagate_hom(double s, const State& phi) const;

  /// Approximation of the Duhamel term
  ///   int_{s_from}^{s_to} e^{-i (s_to - t) H} v(t) dt.
  /// Every node carries its own right-hand side (2n+1 fresh solves); the
  /// inner integral uses composite 8-point Gauss-Legendre with `panels` panels.
  State propagate_inhom(double s_from, double s_to,
                        const std::function<State(double)>& source, int panels) const;

private:
  State corrected_solve(Complex zeta, const State& rhs,
                        const std::vector<State>* powers, int node_m) const;

  std::shared_ptr<const OperatorDescriptor> op_;
  HyperbolicContour contour_;
  QuadratureParams rule_;
  int workers_;
  double z0_ = 0.0;
  int correction_terms_ = 0;
  std::vector<Complex> nodes_z_;
  std::vector<Complex> nodes_dz_;

  mutable std::mutex cache_mutex_;
  mutable std::map<State, std::shared_ptr<const ResolventSampleSet>,
                   bool (*)(const State&, const State&)>
      cache_;
};

} // namespace nlts
