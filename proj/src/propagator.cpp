#include "nlts/propagator.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "nlts/errors.hpp"
#include "nlts/gauss.hpp"
#include "nlts/parallel.hpp"

namespace nlts {

namespace {

bool state_less(const State& a, const State& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
    if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
  }
  return false;
}

std::size_t state_hash(const State& v) {
  std::size_t h = 0x9e3779b97f4a7c15ull;
  for (const Complex& c : v) {
    auto mix = [&h](double x) {
      std::size_t bits;
      static_assert(sizeof(bits) == sizeof(x));
      std::memcpy(&bits, &x, sizeof(bits));
      h ^= bits + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(c.real());
    mix(c.imag());
  }
  return h;
}

} // namespace

PropagatorEngine::PropagatorEngine(std::shared_ptr<const OperatorDescriptor> op,
                                   HyperbolicContour contour, QuadratureParams rule,
                                   int workers)
    : op_(std::move(op)),
      contour_(contour),
      rule_(rule),
      workers_(workers < 1 ? 1 : workers),
      cache_(state_less) {
  if (!op_) throw ConfigError("PropagatorEngine: null operator");
  if (rule_.n < 1) throw ConfigError("PropagatorEngine: rule.n must be >= 1");
  if (rule_.delta > op_->smoothness_order() + 1.0 + 1e-12) {
    throw ConfigError(
        "PropagatorEngine: rule.delta exceeds operator smoothness order + 1");
  }
  z0_ = z0(op_->envelope(), contour_);
  correction_terms_ = static_cast<int>(std::floor(rule_.delta));
  nodes_z_.resize(node_count());
  nodes_dz_.resize(node_count());
  for (int idx = 0; idx < node_count(); ++idx) {
    const double nu = (idx - rule_.n) * rule_.h;
    nodes_z_[idx] = z(contour_, nu);
    nodes_dz_[idx] = dz(contour_, nu);
  }
}

Complex PropagatorEngine::quadrature_scale() const {
  return Complex(0.0, -rule_.h / (2.0 * std::numbers::pi));
}

State PropagatorEngine::corrected_solve(Complex zeta, const State& rhs,
                                        const std::vector<State>* powers,
                                        int node_m) const {
  State x;
  try {
    x = op_->resolvent_solve(zeta, rhs);
  } catch (const SpectralProximityError& e) {
    std::ostringstream msg;
    msg << "node m=" << node_m << ": " << e.what();
    throw SpectralProximityError(msg.str());
  } catch (const NumericsError& e) {
    std::ostringstream msg;
    msg << "node m=" << node_m << ": " << e.what();
    throw NumericsError(msg.str());
  }
  // Subtract sum_{r=1}^{floor(delta)} (H - z0)^{r-1} rhs / (zeta - z0)^r.
  const Complex denom = zeta - z0_;
  if (powers != nullptr) {
    Complex dpow = denom;
    for (int r = 1; r <= correction_terms_; ++r) {
      const State& p = (*powers)[r - 1];
      for (std::size_t j = 0; j < x.size(); ++j) x[j] -= p[j] / dpow;
      dpow *= denom;
    }
  } else {
    State p = rhs;
    Complex dpow = denom;
    for (int r = 1; r <= correction_terms_; ++r) {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] -= p[j] / dpow;
      if (r < correction_terms_) {
        State hp = op_->apply(p);
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = hp[j] - z0_ * p[j];
      }
      dpow *= denom;
    }
  }
  return x;
}

std::shared_ptr<const ResolventSampleSet> PropagatorEngine::sample_resolvents(
    const State& phi) const {
  if (static_cast<int>(phi.size()) != op_->dim()) {
    throw ConfigError("sample_resolvents: phi dimension mismatch");
  }
  // (H - z0)^{r-1} phi, shared by every node.
  std::vector<State> powers(correction_terms_);
  if (correction_terms_ > 0) {
    powers[0] = phi;
    for (int r = 1; r < correction_terms_; ++r) {
      State hp = op_->apply(powers[r - 1]);
      for (std::size_t j = 0; j < hp.size(); ++j) hp[j] -= z0_ * powers[r - 1][j];
      powers[r] = std::move(hp);
    }
  }
  auto set = std::make_shared<ResolventSampleSet>();
  set->rule = rule_;
  set->contour = contour_;
  set->source_tag = state_hash(phi);
  set->samples.resize(node_count());
  parallel_for(0, node_count(), workers_, [&](int idx) {
    set->samples[idx] = corrected_solve(nodes_z_[idx], phi, &powers, idx - rule_.n);
  });
  return set;
}

std::shared_ptr<const ResolventSampleSet> PropagatorEngine::cached_samples(
    const State& phi) const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  auto it = cache_.find(phi);
  if (it != cache_.end()) return it->second;
  auto set = sample_resolvents(phi);
  cache_.emplace(phi, set);
  return set;
}

void PropagatorEngine::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.clear();
}

BlockVec PropagatorEngine::of_apply(const ResolventSampleSet& samples, const WeightFn& w,
                                    const ChebyshevGrid& grid, int p,
                                    bool zero_below_p) const {
  if (static_cast<int>(samples.samples.size()) != node_count()) {
    throw ConfigError("of_apply: sample set does not match the rule");
  }
  const std::size_t dim = samples.samples[0].size();
  const Complex scale = quadrature_scale();
  BlockVec out(grid.N + 1, State(dim, Complex(0.0)));
  parallel_for(0, grid.N + 1, workers_, [&](int l) {
    if (zero_below_p && l < p) return;
    State acc(dim, Complex(0.0));
    for (int idx = 0; idx < node_count(); ++idx) {
      const Complex c = nodes_dz_[idx] * w(grid.nodes[l], nodes_z_[idx], p);
      const State& phi_m = samples.samples[idx];
      for (std::size_t j = 0; j < dim; ++j) acc[j] += c * phi_m[j];
    }
    for (std::size_t j = 0; j < dim; ++j) out[l][j] = scale * acc[j];
  });
  return out;
}

State PropagatorEngine::propagate_hom(double s, const State& phi) const {
  if (s < 0.0) throw ConfigError("propagate_hom: s must be >= 0");
  const auto set = cached_samples(phi);
  const Complex scale = quadrature_scale();
  State acc(phi.size(), Complex(0.0));
  for (int idx = 0; idx < node_count(); ++idx) {
    const Complex c = nodes_dz_[idx] * std::exp(Complex(0.0, -s) * nodes_z_[idx]);
    const State& phi_m = set->samples[idx];
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += c * phi_m[j];
  }
  for (Complex& v : acc) v *= scale;
  return acc;
}

State PropagatorEngine::propagate_inhom(double s_from, double s_to,
                                        const std::function<State(double)>& source,
                                        int panels) const {
  if (!(s_from < s_to)) throw ConfigError("propagate_inhom: need s_from < s_to");
  if (panels < 1) throw ConfigError("propagate_inhom: panels must be >= 1");
  const std::size_t dim = op_->dim();
  const Complex scale = quadrature_scale();
  std::vector<State> weighted(node_count());
  parallel_for(0, node_count(), workers_, [&](int idx) {
    const Complex zeta = nodes_z_[idx];
    State mu(dim, Complex(0.0));
    gauss8_panels(s_from, s_to, panels, [&](double t, double wt) {
      const State v = source(t);
      const Complex e = wt * std::exp(Complex(0.0, t) * zeta);
      for (std::size_t j = 0; j < dim; ++j) mu[j] += e * v[j];
    });
    State x = corrected_solve(zeta, mu, nullptr, idx - rule_.n);
    const Complex c = nodes_dz_[idx] * std::exp(Complex(0.0, -s_to) * zeta);
    for (std::size_t j = 0; j < dim; ++j) x[j] *= c;
    weighted[idx] = std::move(x);
  });
  State acc(dim, Complex(0.0));
  for (int idx = 0; idx < node_count(); ++idx) {
    for (std::size_t j = 0; j < dim; ++j) acc[j] += weighted[idx][j];
  }
  for (Complex& v : acc) v *= scale;
  return acc;
}

} // namespace nlts
