#pragma once

#include "cylscat/helmholtz.hpp"

namespace cylscat {

/// One scattering channel: a propagating transverse mode on one end.
struct Channel {
  Index end = 0;  // index into manifold.ends
  Index mode = 0; // transverse mode index
  Real threshold = 0;
  Complex kappa{};
  Complex nu{}; // sin(kappa h)/h, the discrete spectral weight
};

/// Open (strictly in-band) channels at energy lambda, ordered by end then mode.
std::vector<Channel> open_channels(const DiscreteManifold& m, Real lambda);

/// Two-branch far-field data of a field on one end.
struct FarField {
  VecXc outgoing;  // coefficient of e^{+i kappa_n y} per mode
  VecXc incoming;  // coefficient of e^{-i kappa_n y} per mode
  VecX residual;   // least-squares fit residual per mode
  VecX signal;     // window norm of the mode coefficient sequence
};

/// Least-squares fit of each transverse mode of u against the two-branch
/// longitudinal basis on a window of clean layers of the chosen end.
/// `near_window` selects the window closest to the scatterer (used for
/// decaying-branch extraction); the default sits at the truncation.
/// Throws when fewer than 4 clean layers are available; per-mode closure
/// contamination is reported through `residual` vs `signal`.
FarField far_field_extract(const DiscreteManifold& m, const VecXc& u, Complex z,
                           Index end_idx, bool near_window = false, Index window = 8);

/// Amplitude table over channel pairs with both computation routes.
struct AmplitudeTable {
  Real lambda = 0;
  std::vector<Channel> channels;
  MatXc quadrature; // A_{jm,kn} by the coupling quadrature
  MatXc farfield;   // same entries from far-field extraction
  Real route_disagreement = 0; // max entrywise |quad - ff| / scale

  Index size() const { return (Index)channels.size(); }
};

/// Scattering matrix on the open-channel space.
struct ScatteringMatrix {
  Real lambda = 0;
  std::vector<Channel> channel_table;
  MatXc blocks; // S = I - 2 pi i A

  Real unitarity_defect() const;
};

/// Computes all physical amplitudes at the context energy by both routes.
/// Throws NumericalError when the routes disagree beyond route_tol.
AmplitudeTable scattering_amplitude(const DiscreteManifold& m, HelmholtzContext& ctx,
                                    Real route_tol = 1e-8);

ScatteringMatrix s_matrix(const DiscreteManifold& m, HelmholtzContext& ctx,
                          Real route_tol = 1e-8);

ScatteringMatrix s_matrix_from_amplitudes(const AmplitudeTable& table);

/// Non-physical amplitude A^{nph}_{1m,1n} at the context energy (below the
/// larger of the two thresholds), computed by the continued quadrature and
/// cross-checked against the decaying-branch asymptotics of Phi_{1,n,-}.
struct NonphysicalAmplitude {
  Complex value{};      // quadrature route
  Complex asymptotic{}; // decaying-branch route
  Real rel_disagreement = 0;
};

NonphysicalAmplitude nonphysical_amplitude(const DiscreteManifold& m, HelmholtzContext& ctx,
                                           Index mode_m, Index mode_n);

/// Continuation consistency: fit the physical amplitude in the branch
/// variable nu of the crossed threshold on a window above it, extrapolate
/// below, and compare against the direct non-physical value.
struct ContinuationCheck {
  Real rel_err = 0;
  Complex extrapolated{};
  Complex direct{};
};

ContinuationCheck continuation_overlap_check(const DiscreteManifold& m, Index mode_m,
                                             Index mode_n, Real lambda_target,
                                             Index n_samples = 12, Index degree = 6);

} // namespace cylscat
