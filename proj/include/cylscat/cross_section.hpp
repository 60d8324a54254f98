#pragma once

#include "cylscat/types.hpp"

namespace cylscat {

/// Undirected weighted edge of a cross-section graph. `weight` is the
/// conductance entering the Laplacian, `length` the metric edge length
/// used for geodesics.
struct CsEdge {
  Index a = 0;
  Index b = 0;
  Real weight = 1.0;
  Real length = 1.0;
};

/// Discrete model of a compact transverse manifold (M, h): a connected
/// weighted graph with node measures playing the role of the volume
/// element sqrt(det h).
struct CrossSection {
  Index nodes = 0;
  std::vector<CsEdge> edges;
  VecX node_measures;            // positive, size == nodes
  std::vector<Index> boundary_nodes; // empty when M is closed

  /// Weighted graph Laplacian -Delta_h as a sparse matrix acting on node
  /// values: (-Delta_h f)(a) = (1/mu_a) sum_b w_ab (f(a) - f(b)).
  SpMat laplacian() const;

  /// Checks symmetry, connectivity and positivity invariants; throws
  /// InvalidArgument on violation.
  void validate() const;

  Real total_measure() const { return node_measures.sum(); }
};

/// Description of a cross-section accepted by build_cross_section.
struct CrossSectionSpec {
  enum class Kind { Cycle, Path, Explicit };
  Kind kind = Kind::Cycle;
  Index nodes = 8;
  Real spacing = 1.0;
  // Optional per-edge weight multipliers (cycle/path: edge k joins nodes k,k+1).
  std::vector<Real> weight_scale;
  // Explicit graph data (Kind::Explicit).
  std::vector<CsEdge> edges;
  VecX measures;
};

CrossSection build_cross_section(const CrossSectionSpec& spec);

/// Full eigendecomposition of the transverse Laplacian.
struct ModeBasis {
  VecX eigenvalues;                      // ascending
  MatX eigenvectors;                     // column n = phi_n, orthonormal in the mu inner product
  std::vector<std::vector<Index>> multiplicity_groups;
  VecX node_measures;                    // copy of the weighted inner product

  Index size() const { return eigenvalues.size(); }

  /// mu-weighted inner product <f,g> = sum_a mu_a f_a g_a.
  Real dot(const VecX& f, const VecX& g) const {
    return (node_measures.array() * f.array() * g.array()).sum();
  }
  Complex dot(const VecXc& f, const VecXc& g) const {
    return (node_measures.array().cast<Complex>() * f.conjugate().array() * g.array()).sum();
  }

  /// Coefficient of f against mode n.
  Real mode_coeff(const VecX& f, Index n) const { return dot(eigenvectors.col(n), f); }
  Complex mode_coeff(const VecXc& f, Index n) const {
    return (node_measures.array() * eigenvectors.col(n).array()).matrix().transpose() * f;
  }
};

/// Absolute tolerance used when grouping nearly equal eigenvalues.
constexpr Real kMultiplicityTol = 1e-9;

ModeBasis transverse_spectrum(const CrossSection& cs);

/// One-sided limit selector for energies on the branch set.
enum class Limit { none, plus_i0, minus_i0 };

/// sqrt(zeta) on the branch sqrt(r e^{i theta}) = sqrt(r) e^{i theta/2},
/// 0 < theta < 2pi. For zeta on the positive real axis a limit flag picks
/// the side: +i0 gives +sqrt(r), -i0 gives -sqrt(r). Im >= 0 holds on the
/// closed upper half plane.
Complex branch_sqrt(Complex zeta, Limit limit = Limit::none);

/// Per-mode values sqrt(z - lambda_n) of P(z) = sqrt(z + Delta_h).
/// Throws NumericalError when z sits exactly on a threshold, or on the
/// branch set without a limit flag.
VecXc sqrt_operator(const ModeBasis& mb, Complex z, Limit limit = Limit::none);

} // namespace cylscat
