#include "cylscat/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

namespace cylscat {

namespace {

// Cross-section hop distance (for the transverse bump profile).
std::vector<Index> cs_hops(const CrossSection& cs, Index from) {
  std::vector<std::vector<Index>> adj(cs.nodes);
  for (const auto& e : cs.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<Index> d(cs.nodes, -1);
  std::queue<Index> q;
  d[from] = 0;
  q.push(from);
  while (!q.empty()) {
    Index v = q.front();
    q.pop();
    for (Index w : adj[v])
      if (d[w] < 0) {
        d[w] = d[v] + 1;
        q.push(w);
      }
  }
  return d;
}

} // namespace

SpMat DiscreteManifold::operator_matrix(bool perturbed) const {
  const VecX& mu = perturbed ? measures : measures0;
  std::vector<Triplet> trip;
  trip.reserve(4 * edges.size());
  for (const auto& e : edges) {
    const Real w = perturbed ? e.w : e.w0;
    trip.emplace_back(e.p, e.p, w / mu[e.p]);
    trip.emplace_back(e.p, e.q, -w / mu[e.p]);
    trip.emplace_back(e.q, e.q, w / mu[e.q]);
    trip.emplace_back(e.q, e.p, -w / mu[e.q]);
  }
  SpMat H(size(), size());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

SpMat DiscreteManifold::flattened_operator() const {
  SpMat H = operator_matrix(true);
  VecX jr = jfield().array().sqrt();
  std::vector<Triplet> trip;
  trip.reserve(H.nonZeros());
  for (int k = 0; k < H.outerSize(); ++k)
    for (SpMat::InnerIterator it(H, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), jr[it.row()] * it.value() / jr[it.col()]);
  SpMat Ht(size(), size());
  Ht.setFromTriplets(trip.begin(), trip.end());
  return Ht;
}

std::pair<Index, Index> DiscreteManifold::clean_range(const End& e) const {
  if (e.dir > 0) {
    Index lo = 1;
    if (pert_lo <= pert_hi) lo = std::max(lo, pert_hi + 2);
    if (e.chi_lo > 0) lo = std::max(lo, e.chi_lo);
    return {lo, layers - 1};
  }
  Index hi = layers - 2;
  if (pert_lo <= pert_hi) hi = std::min(hi, pert_lo - 2);
  if (e.chi_hi < layers - 1) hi = std::min(hi, e.chi_hi);
  return {0, hi};
}

void DiscreteManifold::validate() const {
  if (m <= 0 || layers < 8) throw InvalidArgument("manifold: too few layers");
  for (Index p = 0; p < size(); ++p)
    if (!(measures[p] > 0) || !(measures0[p] > 0))
      throw InvalidArgument("manifold: nonpositive measure");
  // Compact support contract: product weights beyond the declared range.
  for (const auto& e : edges) {
    Index la = layer_of(e.p), lb = layer_of(e.q);
    bool touches = pert_lo <= pert_hi &&
                   ((la >= pert_lo && la <= pert_hi) || (lb >= pert_lo && lb <= pert_hi));
    if (!touches && e.w != e.w0)
      throw InvalidArgument("manifold: perturbed weight outside declared support");
  }
  if (pert_lo <= pert_hi) {
    for (const auto& e : ends) {
      Index margin = (e.dir > 0) ? (e.closure_layer - pert_hi) : (pert_lo - e.closure_layer);
      if (margin < 4)
        throw InvalidArgument("manifold: perturbation support overlaps the truncation zone");
    }
    if (gamma_cut <= pert_hi + 1)
      throw InvalidArgument("manifold: Gamma placed inside the perturbation support");
  }
  if (capped && gamma_cut > layers - 4)
    throw InvalidArgument("manifold: Gamma too close to the truncation");
}

DiscreteManifold build_manifold(const ManifoldConfig& cfg) {
  if (cfg.n_ends != 1 && cfg.n_ends != 2)
    throw InvalidArgument("build_manifold: supported end counts are 1 and 2");

  DiscreteManifold M;
  M.cs = build_cross_section(cfg.cross_section);
  M.mb = transverse_spectrum(M.cs);
  M.m = M.cs.nodes;
  M.layers = cfg.total_layers;
  M.h = cfg.h_y;
  M.capped = (cfg.n_ends == 1);
  M.gamma_cut = cfg.gamma_cut;
  const bool has_pert = cfg.perturbation.kind != PerturbationConfig::Kind::None &&
                        cfg.perturbation.amplitude != 0.0;
  M.pert_lo = has_pert ? cfg.perturbation.layer_lo : 1;
  M.pert_hi = has_pert ? cfg.perturbation.layer_hi : 0;

  const Index L = M.layers, m = M.m;
  const Real h = M.h;

  // Twist seam: below cfg.twist.layer the mesh is relabelled by a
  // cross-section rotation; all metric data is evaluated in untwisted
  // coordinates so the result is isometric to the untwisted manifold.
  const Index shift = cfg.twist.enabled ? ((cfg.twist.shift % m) + m) % m : 0;
  auto untw = [&](Index a, Index l) -> Index {
    if (cfg.twist.enabled && l < cfg.twist.layer) return (a + shift) % m;
    return a;
  };
  auto tw = [&](Index a_untw, Index l) -> Index {
    if (cfg.twist.enabled && l < cfg.twist.layer) return (a_untw - shift + m) % m;
    return a_untw;
  };

  // Bump field c >= 1 with hard support on layers [pert_lo, pert_hi],
  // evaluated in untwisted coordinates.
  std::vector<Index> hops;
  if (cfg.perturbation.transverse_sigma > 0)
    hops = cs_hops(M.cs, cfg.perturbation.transverse_anchor);
  auto bump = [&](Index a, Index l) -> Real {
    const auto& P = cfg.perturbation;
    if (!has_pert) return 1.0;
    if (l < P.layer_lo || l > P.layer_hi) return 1.0;
    Real d2 = (Real(l) - P.center_layer) * (Real(l) - P.center_layer) / (2 * P.sigma * P.sigma);
    if (P.transverse_sigma > 0) {
      Real dt = Real(hops[untw(a, l)]);
      d2 += dt * dt / (2 * P.transverse_sigma * P.transverse_sigma);
    }
    return 1.0 + P.amplitude * std::exp(-d2);
  };

  M.column.resize(M.size());
  for (Index l = 0; l < L; ++l)
    for (Index a = 0; a < m; ++a) M.column[M.node(a, l)] = untw(a, l);

  // Node measures: product cell volumes, half cell at the cap.
  M.measures0.resize(M.size());
  M.measures.resize(M.size());
  for (Index l = 0; l < L; ++l) {
    const Real cell = (M.capped && l == 0) ? h / 2 : h;
    for (Index a = 0; a < m; ++a) {
      const Real mu0 = M.cs.node_measures[untw(a, l)] * cell;
      Real mu = mu0;
      const Real c = bump(a, l);
      if (cfg.perturbation.perturb_measures) {
        switch (cfg.perturbation.kind) {
          case PerturbationConfig::Kind::AxialStretch: mu = c * mu0; break;
          case PerturbationConfig::Kind::Conformal: mu = c * c * mu0; break;
          case PerturbationConfig::Kind::EdgeScale: mu = c * mu0; break;
          case PerturbationConfig::Kind::None: break;
        }
      }
      M.measures0[M.node(a, l)] = mu0;
      M.measures[M.node(a, l)] = mu;
    }
  }

  auto push_edge = [&](Index p, Index q, Real w0, Real len0, Real b, bool longitudinal) {
    MeshEdge e;
    e.p = p;
    e.q = q;
    e.w0 = w0;
    e.len0 = len0;
    e.w = w0;
    e.len = len0;
    switch (cfg.perturbation.kind) {
      case PerturbationConfig::Kind::None:
        break;
      case PerturbationConfig::Kind::AxialStretch:
        if (longitudinal) {
          e.w = w0 / b;
          e.len = len0 * b;
        } else {
          e.w = w0 * b;
        }
        break;
      case PerturbationConfig::Kind::Conformal:
        e.len = len0 * b; // conductances are conformally invariant in 2-D
        break;
      case PerturbationConfig::Kind::EdgeScale:
        e.w = w0 * b;
        e.len = len0 / std::sqrt(b);
        break;
    }
    M.edges.push_back(e);
  };

  // Longitudinal edges join nodes with the same untwisted column.
  for (Index l = 0; l + 1 < L; ++l) {
    for (Index a = 0; a < m; ++a) {
      const Index col = untw(a, l);
      const Index a_up = tw(col, l + 1);
      const Real w0 = M.cs.node_measures[col] / h;
      const Real b = 0.5 * (bump(a, l) + bump(a_up, l + 1));
      push_edge(M.node(a, l), M.node(a_up, l + 1), w0, h, b, true);
    }
  }

  // Transverse edges, conductance scaled by the longitudinal cell length.
  for (Index l = 0; l < L; ++l) {
    const Real cell = (M.capped && l == 0) ? h / 2 : h;
    for (const auto& ce : M.cs.edges) {
      const Index a = tw(ce.a, l), b = tw(ce.b, l);
      const Real w0 = ce.weight * cell;
      const Real mult = 0.5 * (bump(a, l) + bump(b, l));
      push_edge(M.node(a, l), M.node(b, l), w0, ce.length, mult, false);
    }
  }

  // Ends.
  if (cfg.n_ends == 1) {
    End e;
    e.index = 1;
    e.dir = +1;
    e.closure_layer = L - 1;
    e.y0_layer = 0;
    e.chi_lo = 0;
    e.chi_hi = L - 1;
    M.ends.push_back(e);
  } else {
    const Index y0 = (cfg.end1_y0 >= 0) ? cfg.end1_y0 : L / 2;
    const Index y0b = (cfg.end2_y0 >= 0) ? cfg.end2_y0 : L / 2;
    End e1;
    e1.index = 1;
    e1.dir = +1;
    e1.closure_layer = L - 1;
    e1.y0_layer = y0;
    e1.chi_lo = std::max<Index>(y0 + cfg.chi_margin, has_pert ? M.pert_hi + 2 : 0);
    e1.chi_hi = L - 1;
    End e2;
    e2.index = 2;
    e2.dir = -1;
    e2.closure_layer = 0;
    e2.y0_layer = y0b;
    e2.chi_lo = 0;
    e2.chi_hi = std::min<Index>(y0b - cfg.chi_margin, has_pert ? M.pert_lo - 2 : L - 1);
    if (e1.chi_lo >= L - 4 || e2.chi_hi <= 3)
      throw InvalidArgument("build_manifold: cutoff ranges leave no clean end zone");
    M.ends.push_back(e1);
    M.ends.push_back(e2);
  }

  M.validate();
  return M;
}

std::vector<Index> hop_sphere(const DiscreteManifold& m, Index center, Index radius,
                              Index max_layer) {
  std::vector<Index> d(m.size(), -1);
  std::vector<std::vector<Index>> adj(m.size());
  for (const auto& e : m.edges) {
    if (m.layer_of(e.p) <= max_layer && m.layer_of(e.q) <= max_layer) {
      adj[e.p].push_back(e.q);
      adj[e.q].push_back(e.p);
    }
  }
  std::queue<Index> q;
  d[center] = 0;
  q.push(center);
  std::vector<Index> sphere;
  while (!q.empty()) {
    Index v = q.front();
    q.pop();
    if (d[v] == radius) {
      sphere.push_back(v);
      continue;
    }
    for (Index w : adj[v])
      if (d[w] < 0) {
        d[w] = d[v] + 1;
        q.push(w);
      }
  }
  std::sort(sphere.begin(), sphere.end());
  return sphere;
}

std::vector<Index> hop_ball_interior(const DiscreteManifold& m, Index center, Index radius,
                                     Index max_layer) {
  std::vector<Index> d(m.size(), -1);
  std::vector<std::vector<Index>> adj(m.size());
  for (const auto& e : m.edges) {
    if (m.layer_of(e.p) <= max_layer && m.layer_of(e.q) <= max_layer) {
      adj[e.p].push_back(e.q);
      adj[e.q].push_back(e.p);
    }
  }
  std::queue<Index> q;
  d[center] = 0;
  q.push(center);
  std::vector<Index> ball;
  while (!q.empty()) {
    Index v = q.front();
    q.pop();
    if (d[v] < radius) {
      ball.push_back(v);
      for (Index w : adj[v])
        if (d[w] < 0) {
          d[w] = d[v] + 1;
          q.push(w);
        }
    }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

InteriorRegion split_interior(const DiscreteManifold& M, const CutSpecification& cut) {
  if (!M.capped)
    throw InvalidArgument("split_interior: bounded interior requires a single end");
  const Index g = M.gamma_cut;

  std::vector<char> removed(M.size(), 0);
  InteriorRegion R;
  if (cut.has_obstacle) {
    if (cut.obstacle_radius < 1)
      throw InvalidArgument("split_interior: obstacle with empty interior");
    auto ball = hop_ball_interior(M, cut.obstacle_center, cut.obstacle_radius, g);
    auto sphere = hop_sphere(M, cut.obstacle_center, cut.obstacle_radius, g);
    for (Index p : ball) {
      Index l = M.layer_of(p);
      if (l <= 0 || l >= g)
        throw InvalidArgument("split_interior: obstacle touches the interior boundary");
      removed[p] = 1;
    }
    for (Index p : sphere) {
      Index l = M.layer_of(p);
      if (l <= 0 || l >= g)
        throw InvalidArgument("split_interior: obstacle sphere meets the interior boundary");
    }
    R.obstacle_interior = ball;
  }

  R.global_to_local.assign(M.size(), -1);
  for (Index l = 0; l <= g; ++l)
    for (Index a = 0; a < M.m; ++a) {
      Index p = M.node(a, l);
      if (!removed[p]) {
        R.global_to_local[p] = (Index)R.nodes.size();
        R.nodes.push_back(p);
      }
    }

  const Index n = (Index)R.nodes.size();
  R.measure.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index p = R.nodes[i];
    Real mu = M.measures[p];
    if (M.layer_of(p) == g) mu *= 0.5; // boundary half cell at Gamma
    R.measure[i] = mu;
  }

  std::vector<Triplet> trip;
  for (const auto& e : M.edges) {
    Index li = R.global_to_local[e.p], lj = R.global_to_local[e.q];
    if (li < 0 || lj < 0) continue;
    Real w = e.w;
    if (M.layer_of(e.p) == g && M.layer_of(e.q) == g) w *= 0.5; // Gamma-layer half cell
    trip.emplace_back(li, li, w / R.measure[li]);
    trip.emplace_back(li, lj, -w / R.measure[li]);
    trip.emplace_back(lj, lj, w / R.measure[lj]);
    trip.emplace_back(lj, li, -w / R.measure[lj]);
  }
  R.op.resize(n, n);
  R.op.setFromTriplets(trip.begin(), trip.end());

  // Connectivity of Omega_O.
  {
    std::vector<char> seen(n, 0);
    std::queue<Index> q;
    seen[0] = 1;
    q.push(0);
    Index count = 1;
    std::vector<std::vector<Index>> adj(n);
    for (int k = 0; k < R.op.outerSize(); ++k)
      for (SpMat::InnerIterator it(R.op, k); it; ++it)
        if (it.row() != it.col()) adj[it.row()].push_back(it.col());
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
    if (count != n) throw InvalidArgument("split_interior: interior disconnected");
  }

  // Gamma_O and its boundary measure.
  if (cut.has_obstacle) {
    auto sphere = hop_sphere(M, cut.obstacle_center, cut.obstacle_radius, g);
    for (Index p : sphere) R.gamma.push_back(R.global_to_local[p]);
    R.ds.resize((Index)R.gamma.size());
    for (Index k = 0; k < (Index)R.gamma.size(); ++k)
      R.ds[k] = M.measures[R.nodes[R.gamma[k]]] / M.h;
  } else {
    for (Index a = 0; a < M.m; ++a) R.gamma.push_back(R.global_to_local[M.node(a, g)]);
    R.ds.resize(M.m);
    for (Index a = 0; a < M.m; ++a) R.ds[a] = M.cs.node_measures[a];
  }
  return R;
}

} // namespace cylscat
