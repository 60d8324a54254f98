#include "cylscat/cross_section.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <queue>

namespace cylscat {

SpMat CrossSection::laplacian() const {
  std::vector<Triplet> trip;
  trip.reserve(4 * edges.size());
  for (const auto& e : edges) {
    const Real wa = e.weight / node_measures[e.a];
    const Real wb = e.weight / node_measures[e.b];
    trip.emplace_back(e.a, e.a, wa);
    trip.emplace_back(e.a, e.b, -wa);
    trip.emplace_back(e.b, e.b, wb);
    trip.emplace_back(e.b, e.a, -wb);
  }
  SpMat L(nodes, nodes);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

void CrossSection::validate() const {
  if (nodes <= 0) throw InvalidArgument("cross-section: empty node set");
  if (node_measures.size() != nodes)
    throw InvalidArgument("cross-section: measure vector size mismatch");
  for (Index a = 0; a < nodes; ++a)
    if (!(node_measures[a] > 0.0))
      throw InvalidArgument("cross-section: nonpositive node measure");
  std::vector<std::vector<Index>> adj(nodes);
  for (const auto& e : edges) {
    if (e.a < 0 || e.a >= nodes || e.b < 0 || e.b >= nodes || e.a == e.b)
      throw InvalidArgument("cross-section: edge endpoint out of range");
    if (!(e.weight > 0.0)) throw InvalidArgument("cross-section: nonpositive weight");
    if (!(e.length > 0.0)) throw InvalidArgument("cross-section: nonpositive edge length");
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  if (nodes > 1) {
    std::vector<char> seen(nodes, 0);
    std::queue<Index> q;
    q.push(0);
    seen[0] = 1;
    Index count = 1;
    while (!q.empty()) {
      Index v = q.front();
      q.pop();
      for (Index w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          q.push(w);
        }
    }
    if (count != nodes) throw InvalidArgument("cross-section: disconnected graph");
  }
}

CrossSection build_cross_section(const CrossSectionSpec& spec) {
  CrossSection cs;
  switch (spec.kind) {
    case CrossSectionSpec::Kind::Cycle: {
      if (spec.nodes < 1) throw InvalidArgument("cycle: need at least one node");
      cs.nodes = spec.nodes;
      cs.node_measures = VecX::Constant(spec.nodes, spec.spacing);
      if (spec.nodes >= 2) {
        const Index ne = (spec.nodes == 2) ? 1 : spec.nodes;
        for (Index k = 0; k < ne; ++k) {
          Real m = 1.0;
          if (!spec.weight_scale.empty()) {
            if ((Index)spec.weight_scale.size() != ne)
              throw InvalidArgument("cycle: weight_scale size mismatch");
            m = spec.weight_scale[k];
            if (!(m > 0.0)) throw InvalidArgument("cycle: nonpositive weight");
          }
          CsEdge e;
          e.a = k;
          e.b = (k + 1) % spec.nodes;
          e.weight = m / spec.spacing;
          e.length = spec.spacing / m;
          cs.edges.push_back(e);
        }
      }
      break;
    }
    case CrossSectionSpec::Kind::Path: {
      if (spec.nodes < 1) throw InvalidArgument("path: need at least one node");
      cs.nodes = spec.nodes;
      cs.node_measures = VecX::Constant(spec.nodes, spec.spacing);
      for (Index k = 0; k + 1 < spec.nodes; ++k) {
        Real m = 1.0;
        if (!spec.weight_scale.empty()) {
          if ((Index)spec.weight_scale.size() != spec.nodes - 1)
            throw InvalidArgument("path: weight_scale size mismatch");
          m = spec.weight_scale[k];
          if (!(m > 0.0)) throw InvalidArgument("path: nonpositive weight");
        }
        CsEdge e;
        e.a = k;
        e.b = k + 1;
        e.weight = m / spec.spacing;
        e.length = spec.spacing / m;
        cs.edges.push_back(e);
      }
      cs.boundary_nodes = {0, spec.nodes - 1};
      break;
    }
    case CrossSectionSpec::Kind::Explicit: {
      cs.nodes = spec.nodes;
      cs.edges = spec.edges;
      for (auto& e : cs.edges)
        if (e.length <= 0.0) e.length = 1.0 / std::sqrt(std::max(e.weight, 1e-300));
      cs.node_measures = spec.measures.size() ? spec.measures : VecX::Ones(spec.nodes);
      break;
    }
  }
  cs.validate();
  return cs;
}

namespace {

// Deterministic sign convention: first entry exceeding a relative floor is positive.
void fix_sign(Eigen::Ref<VecX> v) {
  const Real floor = 1e-10 * v.norm();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > floor) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

} // namespace

ModeBasis transverse_spectrum(const CrossSection& cs) {
  cs.validate();
  ModeBasis mb;
  mb.node_measures = cs.node_measures;
  const Index n = cs.nodes;

  // Symmetrized pencil: B = M^{-1/2} (mu * Laplacian) M^{-1/2}.
  MatX L = MatX(cs.laplacian());
  VecX shalf = cs.node_measures.array().sqrt();
  MatX B(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) B(i, j) = shalf[i] * L(i, j) / shalf[j];
  B = 0.5 * (B + B.transpose());

  Eigen::SelfAdjointEigenSolver<MatX> es(B);
  if (es.info() != Eigen::Success)
    throw NumericalError("transverse_spectrum: eigensolver failed to converge; "
                         "matrix norm " + std::to_string(B.norm()));
  mb.eigenvalues = es.eigenvalues();
  mb.eigenvectors = es.eigenvectors();
  for (Index j = 0; j < n; ++j) mb.eigenvectors.col(j).array() /= shalf.array();
  // Clamp the tiny negative round-off on the zero mode of a closed graph.
  for (Index j = 0; j < n; ++j)
    if (std::abs(mb.eigenvalues[j]) < 1e-12) mb.eigenvalues[j] = std::max(mb.eigenvalues[j], 0.0);

  // Multiplicity groups by absolute tolerance.
  Index j = 0;
  while (j < n) {
    Index k = j + 1;
    while (k < n && mb.eigenvalues[k] - mb.eigenvalues[k - 1] <= kMultiplicityTol) ++k;
    std::vector<Index> group;
    for (Index i = j; i < k; ++i) group.push_back(i);
    mb.multiplicity_groups.push_back(group);
    j = k;
  }

  // Canonical basis inside each degenerate group: mu-Gram-Schmidt of the
  // eigenprojection columns taken in node order.
  for (const auto& group : mb.multiplicity_groups) {
    if (group.size() < 2) continue;
    const Index g = (Index)group.size();
    MatX V(n, g);
    for (Index c = 0; c < g; ++c) V.col(c) = mb.eigenvectors.col(group[c]);
    // Projector applied to coordinate vectors: P e_i = V (V^T M e_i).
    MatX basis(n, g);
    Index got = 0;
    for (Index i = 0; i < n && got < g; ++i) {
      VecX cand = V * (V.transpose() * (cs.node_measures[i] * MatX::Identity(n, n).col(i)));
      for (Index c = 0; c < got; ++c) {
        Real proj = (cs.node_measures.array() * basis.col(c).array() * cand.array()).sum();
        cand -= proj * basis.col(c);
      }
      Real nrm = std::sqrt((cs.node_measures.array() * cand.array().square()).sum());
      if (nrm > 1e-8) {
        basis.col(got++) = cand / nrm;
      }
    }
    if (got == g)
      for (Index c = 0; c < g; ++c) mb.eigenvectors.col(group[c]) = basis.col(c);
  }

  for (Index c = 0; c < n; ++c) fix_sign(mb.eigenvectors.col(c));
  return mb;
}

Complex branch_sqrt(Complex zeta, Limit limit) {
  const Real re = zeta.real(), im = zeta.imag();
  if (re == 0.0 && im == 0.0)
    throw NumericalError("branch_sqrt: zeta at the branch point");
  if (im == 0.0 && re > 0.0) {
    if (limit == Limit::plus_i0) return Complex(std::sqrt(re), 0.0);
    if (limit == Limit::minus_i0) return Complex(-std::sqrt(re), 0.0);
    throw NumericalError("branch_sqrt: zeta on the branch set without a limit flag");
  }
  Real theta = std::atan2(im, re); // (-pi, pi]
  if (theta <= 0.0) theta += 2.0 * kPi;
  const Real r = std::abs(zeta);
  return std::sqrt(r) * Complex(std::cos(theta / 2), std::sin(theta / 2));
}

VecXc sqrt_operator(const ModeBasis& mb, Complex z, Limit limit) {
  VecXc values(mb.size());
  for (Index k = 0; k < mb.size(); ++k) {
    const Complex zeta = z - mb.eigenvalues[k];
    if (zeta == Complex(0, 0))
      throw NumericalError("sqrt_operator: z exactly at threshold lambda_" + std::to_string(k));
    values[k] = branch_sqrt(zeta, limit);
  }
  return values;
}

} // namespace cylscat
