#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nlts/contour.hpp"
#include "nlts/types.hpp"

namespace nlts {

/// Half-strip operator contract: stationary resolvent solves at points outside
/// the declared envelope, plus operator powers on admissible data.
///
/// Implementations must be immutable after construction; resolvent_solve at
/// distinct points is callable concurrently. The solve counter is the
/// instrumentation consumed by the run report.
class OperatorDescriptor {
public:
  OperatorDescriptor() = default;
  // Copies start with a fresh solve counter.
  OperatorDescriptor(const OperatorDescriptor&) noexcept {}
  OperatorDescriptor& operator=(const OperatorDescriptor&) noexcept { return *this; }
  virtual ~OperatorDescriptor() = default;

  virtual int dim() const = 0;
  virtual SpectralEnvelope envelope() const = 0;
  virtual int smoothness_order() const = 0;

  /// (zeta I - H)^{-1} rhs. Rejects zeta within 1e-6 of the declared envelope.
  State resolvent_solve(Complex zeta, const State& rhs) const;

  /// H phi.
  State apply(const State& phi) const;

  /// H^r phi by repeated application, r <= smoothness_order.
  State apply_power(int r, const State& phi) const;

  long solve_count() const { return solves_.load(); }
  void reset_solve_count() const { solves_.store(0); }

protected:
  virtual void do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                                  std::span<Complex> out) const = 0;
  virtual void do_apply(std::span<const Complex> phi, std::span<Complex> out) const = 0;

private:
  mutable std::atomic<long> solves_{0};
};

/// Distance from zeta to the half-strip {Re >= b_s, |Im| <= d_s}.
double envelope_distance(const SpectralEnvelope& env, Complex zeta);

/// Diagonal test backend: H = diag(lambda_j). The envelope defaults to the
/// tight bounding half-strip of the eigenvalues; a wider one may be declared
/// explicitly (it must still contain the spectrum).
class DiagonalOperator final : public OperatorDescriptor {
public:
  explicit DiagonalOperator(std::vector<Complex> eigenvalues, int smoothness = 8,
                            std::optional<SpectralEnvelope> envelope = std::nullopt);

  int dim() const override { return static_cast<int>(eigenvalues_.size()); }
  SpectralEnvelope envelope() const override { return env_; }
  int smoothness_order() const override { return smoothness_; }
  const std::vector<Complex>& eigenvalues() const { return eigenvalues_; }

protected:
  void do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                          std::span<Complex> out) const override;
  void do_apply(std::span<const Complex> phi, std::span<Complex> out) const override;

private:
  std::vector<Complex> eigenvalues_;
  SpectralEnvelope env_;
  int smoothness_;
};

/// Symmetric tridiagonal backend; fd_build realizes the 1-D Dirichlet
/// finite-difference Hamiltonian -u'' + U u on nx interior points.
class TridiagonalOperator final : public OperatorDescriptor {
public:
  TridiagonalOperator(std::vector<Complex> diag, std::vector<Complex> off,
                      int smoothness = 8);

  int dim() const override { return static_cast<int>(diag_.size()); }
  SpectralEnvelope envelope() const override { return env_; }
  int smoothness_order() const override { return smoothness_; }
  const std::vector<Complex>& diagonal() const { return diag_; }
  const std::vector<Complex>& off_diagonal() const { return off_; }

protected:
  void do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                          std::span<Complex> out) const override;
  void do_apply(std::span<const Complex> phi, std::span<Complex> out) const override;

private:
  std::vector<Complex> diag_;
  std::vector<Complex> off_;
  SpectralEnvelope env_;
  int smoothness_;
};

TridiagonalOperator fd_build(double L, int nx, const std::vector<double>& U,
                             int smoothness = 8);

/// gamma * H with the envelope scaled accordingly. Used to realize the
/// [0, T] -> [-1, 1] time transform, which rescales the generator by T/2.
class ScaledOperator final : public OperatorDescriptor {
public:
  ScaledOperator(std::shared_ptr<const OperatorDescriptor> inner, double gamma);

  int dim() const override { return inner_->dim(); }
  SpectralEnvelope envelope() const override;
  int smoothness_order() const override { return inner_->smoothness_order(); }

protected:
  void do_resolvent_solve(Complex zeta, std::span<const Complex> rhs,
                          std::span<Complex> out) const override;
  void do_apply(std::span<const Complex> phi, std::span<Complex> out) const override;

private:
  std::shared_ptr<const OperatorDescriptor> inner_;
  double gamma_;
};

} // namespace nlts
