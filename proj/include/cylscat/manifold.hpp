#pragma once

#include "cylscat/cross_section.hpp"
#include "cylscat/types.hpp"

namespace cylscat {

/// Mesh edge carrying both the perturbed and unperturbed (product metric)
/// conductances and lengths.
struct MeshEdge {
  Index p = 0, q = 0;
  Real w = 1.0;    // conductance, perturbed
  Real w0 = 1.0;   // conductance, product metric
  Real len = 1.0;  // metric length, perturbed
  Real len0 = 1.0; // metric length, product metric
};

/// One cylindrical end: bookkeeping for the reference half-cylinder
/// coordinate y, the truncation closure and the cutoff chi_j.
struct End {
  Index index = 0;       // 1-based end label
  int dir = +1;          // +1: y grows with the layer index l; -1: opposite
  Index closure_layer = 0;
  Index y0_layer = 0;    // layer where y = 0
  Index chi_lo = 0, chi_hi = 0; // inclusive layer range with chi_j = 1

  Real y_of(Index l, Real h) const { return Real(dir) * Real(l - y0_layer) * h; }
  bool chi(Index l) const { return l >= chi_lo && l <= chi_hi; }
};

struct PerturbationConfig {
  enum class Kind { None, AxialStretch, Conformal, EdgeScale };
  Kind kind = Kind::None;
  Real amplitude = 0.0;    // bump height A in 1 + A exp(-d^2 / 2 sigma^2)
  Real center_layer = 8.0;
  Real sigma = 2.0;        // in layer units
  Index layer_lo = 0, layer_hi = -1; // hard support, inclusive
  Index transverse_anchor = 0;       // cross-section node the bump is centred on
  Real transverse_sigma = 0.0;       // 0: transversely uniform
  bool perturb_measures = true;
};

struct TwistConfig {
  bool enabled = false;
  Index layer = 0;  // seam between layer-1 and layer
  Index shift = 0;  // cross-section rotation applied below the seam
};

struct ManifoldConfig {
  Index n_ends = 1;
  CrossSectionSpec cross_section;
  Real h_y = 0.5;
  Index total_layers = 40;
  Index gamma_cut = 20;
  PerturbationConfig perturbation;
  TwistConfig twist;
  // chi cutoff margins, in layers, from the y0 layer of each end (N=2 only).
  Index chi_margin = 2;
  // y-origins for the two-end geometry; defaults put both origins in K.
  Index end1_y0 = -1, end2_y0 = -1;
};

/// The assembled discrete manifold: a layered product mesh (cycle or path
/// cross-section times a line segment), compactly supported metric
/// perturbation, Neumann cap at layer 0 when there is a single end, exact
/// mode closures at the truncated ends.
struct DiscreteManifold {
  Index m = 0;       // cross-section nodes
  Index layers = 0;  // total layers
  Real h = 0.5;      // longitudinal spacing
  bool capped = true;
  Index gamma_cut = 0;
  Index pert_lo = 0, pert_hi = -1; // empty when lo > hi
  CrossSection cs;   // shared transverse graph
  ModeBasis mb;      // its spectrum
  std::vector<End> ends;
  std::vector<MeshEdge> edges;
  VecX measures, measures0;
  std::vector<Index> column; // untwisted cross-section column per node

  Index node(Index a, Index l) const { return l * m + a; }
  Index size() const { return m * layers; }
  Index layer_of(Index p) const { return p / m; }
  Index cs_of(Index p) const { return p % m; }

  /// Perturbed (true) or product (false) Laplacian, symmetric in the
  /// corresponding weighted inner product.
  SpMat operator_matrix(bool perturbed) const;

  /// J = mu / mu0, the discrete volume ratio field (1 outside the
  /// perturbation support).
  VecX jfield() const { return measures.array() / measures0.array(); }

  /// J^{1/2} H J^{-1/2}: same far fields as H, symmetric in the mu0 inner
  /// product. This is the operator all scattering computations run on.
  SpMat flattened_operator() const;

  Real mu0_dot(const VecXc& f, const VecXc& g) const {
    return ((measures0.array() * (f.conjugate().array() * g.array()).real()).sum());
  }
  /// Bilinear (no conjugation) mu0 pairing.
  Complex mu0_bilinear(const VecXc& f, const VecXc& g) const {
    return (measures0.array().cast<Complex>() * f.array() * g.array()).sum();
  }

  /// Layers guaranteed product-metric and chi_j = 1 on end j (for far-field
  /// fits); returns an inclusive layer range in mesh layer indexing.
  std::pair<Index, Index> clean_range(const End& e) const;

  void validate() const;
};

DiscreteManifold build_manifold(const ManifoldConfig& cfg);

/// Cut data: Gamma (the gamma_cut layer of end 1), an optional subset Sigma,
/// and an optional obstacle ball O given by center node and hop radius.
struct CutSpecification {
  std::vector<Index> sigma;   // cross-section node ids on Gamma; empty = all
  bool has_obstacle = false;
  Index obstacle_center = 0;  // global mesh node id
  Index obstacle_radius = 0;  // hops
};

/// Bounded interior region Omega_O with boundary Gamma_O, its Neumann
/// operator and quadrature data.
struct InteriorRegion {
  std::vector<Index> nodes;       // global mesh node ids, ascending
  std::vector<Index> global_to_local; // -1 when outside
  SpMat op;                       // H_O, symmetric w.r.t. `measure`
  VecX measure;                   // local node measures
  std::vector<Index> gamma;       // local indices of Gamma_O nodes
  VecX ds;                        // boundary measure on Gamma_O
  std::vector<Index> obstacle_interior; // global ids removed (empty if O empty)

  Index size() const { return (Index)nodes.size(); }
  Index local(Index global) const { return global_to_local[global]; }
};

/// Splits off the bounded interior (layers <= gamma_cut) minus the obstacle.
/// Throws when the obstacle disconnects the interior or touches its boundary.
InteriorRegion split_interior(const DiscreteManifold& m, const CutSpecification& cut);

/// Hop-metric ball utilities on the interior mesh (breadth-first).
std::vector<Index> hop_sphere(const DiscreteManifold& m, Index center, Index radius,
                              Index max_layer);
std::vector<Index> hop_ball_interior(const DiscreteManifold& m, Index center, Index radius,
                                     Index max_layer);

} // namespace cylscat
