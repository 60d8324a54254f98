#pragma once

#include "cylscat/manifold.hpp"
#include "cylscat/types.hpp"

#include <Eigen/SparseLU>
#include <memory>

namespace cylscat {

/// Longitudinal wavenumber from the discrete dispersion relation
/// 2(1 - cos(kappa h))/h^2 = lambda - lambda_n. `xi` is the one-layer
/// transfer factor e^{i kappa h} of the selected branch.
struct ModeWavenumber {
  Complex kappa;
  Complex xi;
  bool propagating = false; // strictly inside the band
};

enum class ClosureKind { outgoing, incoming, nonphysical };

/// Per-mode closure data for one truncated end at a fixed energy.
struct ModeClosure {
  ClosureKind kind = ClosureKind::outgoing;
  Index growing_mode = -1; // nonphysical: mode with the growing branch
  Complex z{};             // energy
  std::vector<ModeWavenumber> modes;

  /// Spectral weight nu_n = sin(kappa_n h)/h on the outgoing branch; the
  /// discrete stand-in for sqrt(z - lambda_n) in all normalizations.
  Complex nu(Index n, Real h) const { return std::sin(modes[n].kappa * h) / h; }
};

/// Branch selection for a single mode. Propagating modes take Im kappa = 0,
/// Re kappa in (0, pi/h) for the outgoing branch; evanescent modes decay.
ModeWavenumber dispersion_wavenumber(Complex z, Real lambda_n, Real h, ClosureKind kind,
                                     bool grow = false);

/// Builds the closure for one end. Throws NumericalError at thresholds
/// (band edges of any mode) where the dispersion becomes defective.
ModeClosure make_closure(const ModeBasis& mb, Complex z, Real h, ClosureKind kind,
                         Index growing_mode = -1);

/// Complex field over the mesh together with its provenance.
struct WaveField {
  VecXc values;
  Complex energy{};
  std::string closure_tag = "none";
};

/// Frequency-domain solver context at a fixed energy: the flattened
/// operator with exact per-mode transparent closures at every truncated
/// end, factorized once and reused for all right-hand sides.
class HelmholtzContext {
public:
  /// kind selects the resolvent side: outgoing = R(lambda + i0),
  /// incoming = R(lambda - i0).
  HelmholtzContext(const DiscreteManifold& m, Complex z,
                   ClosureKind kind = ClosureKind::outgoing);

  const DiscreteManifold& manifold() const { return *m_; }
  Complex energy() const { return z_; }
  ClosureKind kind() const { return kind_; }
  const ModeClosure& closure(Index end_idx) const { return closures_[end_idx]; }
  const SpMat& flattened() const { return Hfree_; }
  const SpMat& product() const { return H0free_; }

  /// Reciprocal condition estimate of the closed system (power iteration
  /// on the inverse). Below 1e-10 the energy is flagged exceptional.
  Real rcond_estimate() const;

  /// Solves (H - z) u = f with the radiation closure. f is a plain field
  /// (not measure-weighted) supported away from the closure layers.
  VecXc solve(const VecXc& f) const;

  /// Closed-system matrix row residual of (H - z) u on the true mesh rows
  /// (all rows except the synthetic closure layers).
  Real interior_residual(const VecXc& u, const VecXc& f) const;

private:
  const DiscreteManifold* m_;
  Complex z_;
  ClosureKind kind_;
  std::vector<ModeClosure> closures_;
  SpMatC A_;                       // closed matrix (H - z with closure rows)
  SpMat Hfree_;                    // flattened free-boundary operator
  SpMat H0free_;                   // product free-boundary operator
  std::vector<char> closure_row_;  // mask of synthetic rows
  Eigen::SparseLU<SpMatC> lu_;
};

/// Reference generalized eigenfunction of the product operator for channel
/// (end j, mode n): norm * cos(kappa_n y_j) phi_n, where
/// norm = pi^{-1/2} nu_n^{-1/2} on the branch continued from above.
/// Below the threshold this is exactly the cosh-growing reference field
/// with the e^{-i pi/4} phase.
VecXc reference_eigenfunction(const DiscreteManifold& m, Index end_idx, Index mode, Complex z);

/// Normalization constant pi^{-1/2} nu^{-1/2} of the reference field.
Complex reference_norm(Complex nu);

/// chi_j-cutoff applied to a field.
VecXc apply_chi(const DiscreteManifold& m, Index end_idx, const VecXc& f);

/// V_j(z) psi = Hfree (chi_j psi) - chi_j (H0free psi), the compactly
/// supported coupling source. Exact on all rows away from the closures.
VecXc apply_coupling(const DiscreteManifold& m, const SpMat& Hfree, const SpMat& H0free,
                     Index end_idx, const VecXc& psi);

/// Physical generalized eigenfunction Psi_{j,n,sign}(lambda), lambda above
/// the channel threshold. sign=-1 carries the outgoing scattered part.
WaveField generalized_eigenfunction(const DiscreteManifold& m, HelmholtzContext& outgoing_ctx,
                                    Index end_idx, Index mode, int sign);

/// Non-physical eigenfunction Phi_{1,n,-}(lambda) for lambda below the
/// threshold of mode n on end 1: cosh-growing reference plus an outgoing
/// scattered part. Guards against cosh overflow past the truncation.
WaveField nonphysical_eigenfunction(const DiscreteManifold& m, HelmholtzContext& outgoing_ctx,
                                    Index mode);

/// Thresholds of the discrete model: band edges lambda_n and
/// lambda_n + 4/h^2 of every end's transverse spectrum.
std::vector<Real> model_thresholds(const DiscreteManifold& m);

/// Distance from lambda to the nearest threshold.
Real threshold_distance(const DiscreteManifold& m, Real lambda);

} // namespace cylscat
