#pragma once

#include "cylscat/manifold.hpp"

#include <functional>

namespace cylscat {

/// Leapfrog time-domain run on a bounded interior region.
struct TimeDomainRun {
  Real dt = 0;
  std::vector<Real> times;
  std::vector<VecX> snapshots; // field at each recorded time
  Real energy_drift = 0;       // relative, after the source cutoff
};

/// Stability limit estimate 2 / sqrt(lambda_max) of the region operator.
Real fdtd_stability_limit(const InteriorRegion& R);

/// Leapfrog evolution of d^2 u/dt^2 = -H_O u + delta(f) with zero initial
/// data and a Neumann source f(t) on Gamma_O. `control` returns the
/// boundary values at time t (size = gamma count). Records every
/// `record_stride`-th step. Throws when dt exceeds 0.9x the stability
/// limit, and reports post-cutoff energy growth beyond 1e-3 as instability.
TimeDomainRun fdtd_simulate(const InteriorRegion& R,
                            const std::function<VecX(Real)>& control, Real T, Real dt,
                            Real source_cutoff_time, Index record_stride = 1);

/// Weighted graph with metric edge lengths plus quad-face diagonals; the
/// single discrete distance structure shared by the oracles and the
/// boundary-control pipeline.
struct DistanceGraph {
  std::vector<Index> nodes;          // global mesh ids
  std::vector<Index> g2l;            // global -> local (-1 outside)
  std::vector<std::vector<std::pair<Index, Real>>> adj; // local adjacency
};

DistanceGraph distance_graph(const DiscreteManifold& m, const std::vector<Index>& nodes,
                             bool face_diagonals = true);

/// Multi-source Dijkstra; returns distances per local node (inf when
/// unreachable). Sources are local indices.
VecX dijkstra(const DistanceGraph& g, const std::vector<Index>& sources);

/// Distance table from each source node (global ids) over the region.
MatX graph_geodesics(const DiscreteManifold& m, const std::vector<Index>& region,
                     const std::vector<Index>& sources);

/// Dense Green matrix (H_O - z)^{-1} of a bounded region.
MatXc dense_resolvent(const InteriorRegion& R, Complex z);

} // namespace cylscat
