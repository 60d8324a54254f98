#include "cylscat/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <queue>

namespace cylscat {

Real fdtd_stability_limit(const InteriorRegion& R) {
  // Power iteration on H_O (symmetric in the weighted product).
  VecX x = VecX::Ones(R.size());
  x[0] += 0.5;
  Real lam = 1;
  for (int it = 0; it < 60; ++it) {
    VecX y = R.op * x;
    lam = std::sqrt((R.measure.array() * y.array().square()).sum() /
                    (R.measure.array() * x.array().square()).sum());
    x = y / y.norm();
  }
  return 2.0 / std::sqrt(lam);
}

TimeDomainRun fdtd_simulate(const InteriorRegion& R,
                            const std::function<VecX(Real)>& control, Real T, Real dt,
                            Real source_cutoff_time, Index record_stride) {
  if (dt > 0.9 * fdtd_stability_limit(R) * (1 + 1e-12))
    throw InvalidArgument("fdtd_simulate: dt exceeds 0.9x the stability limit");

  const Index n = R.size();
  const Index steps = (Index)std::llround(T / dt);
  auto inject = [&](Real t) {
    VecX f = control(t);
    VecX src = VecX::Zero(n);
    for (Index k = 0; k < (Index)R.gamma.size(); ++k) {
      Index i = R.gamma[k];
      src[i] = R.ds[k] / R.measure[i] * f[k];
    }
    return src;
  };

  TimeDomainRun run;
  run.dt = dt;
  VecX u_prev = VecX::Zero(n);              // u(0)
  VecX u_curr = 0.5 * dt * dt * inject(0.0); // u(dt) from zero initial data

  auto energy = [&](const VecX& a, const VecX& b) {
    // Leapfrog-conserved energy of the (a, b) = (u^k, u^{k+1}) pair.
    VecX v = (b - a) / dt;
    Real kin = 0.5 * (R.measure.array() * v.array().square()).sum();
    Real pot = 0.5 * (R.measure.array() * a.array() * (R.op * b).array()).sum();
    return kin + pot;
  };

  run.times.push_back(0.0);
  run.snapshots.push_back(u_prev);
  Real e_ref = -1;
  Real max_growth = 0;
  for (Index k = 1; k <= steps; ++k) {
    const Real t = k * dt; // u_curr holds u(t)
    if (k % record_stride == 0 || k == steps) {
      run.times.push_back(t);
      run.snapshots.push_back(u_curr);
    }
    if (t > source_cutoff_time + dt) {
      Real e = energy(u_prev, u_curr);
      if (e_ref < 0)
        e_ref = e;
      else if (e_ref > 0)
        max_growth = std::max(max_growth, std::abs(e - e_ref) / e_ref);
    }
    if (k == steps) break;
    VecX u_next =
        2.0 * u_curr - u_prev - dt * dt * (R.op * u_curr) + dt * dt * inject(t);
    u_prev.swap(u_curr);
    u_curr.swap(u_next);
  }
  run.energy_drift = max_growth;
  if (run.energy_drift > 1e-3)
    throw NumericalError("fdtd_simulate: instability detected (energy growth " +
                         std::to_string(run.energy_drift) + ")");
  return run;
}

DistanceGraph distance_graph(const DiscreteManifold& m, const std::vector<Index>& nodes,
                             bool face_diagonals) {
  DistanceGraph g;
  g.nodes = nodes;
  g.g2l.assign(m.size(), -1);
  for (size_t i = 0; i < nodes.size(); ++i) g.g2l[nodes[i]] = (Index)i;
  g.adj.resize(nodes.size());

  auto add = [&](Index gp, Index gq, Real len) {
    Index lp = g.g2l[gp], lq = g.g2l[gq];
    if (lp < 0 || lq < 0) return;
    g.adj[lp].push_back({lq, len});
    g.adj[lq].push_back({lp, len});
  };

  // Longitudinal neighbour map for the diagonal construction.
  std::map<Index, std::pair<Index, Real>> up; // node -> (upper neighbour, length)
  for (const auto& e : m.edges) {
    add(e.p, e.q, e.len);
    Index lp = m.layer_of(e.p), lq = m.layer_of(e.q);
    if (lq == lp + 1) up[e.p] = {e.q, e.len};
    if (lp == lq + 1) up[e.q] = {e.p, e.len};
  }

  if (face_diagonals) {
    for (const auto& e : m.edges) {
      if (m.layer_of(e.p) != m.layer_of(e.q)) continue; // transverse edges only
      auto itp = up.find(e.p), itq = up.find(e.q);
      if (itp == up.end() || itq == up.end()) continue;
      add(e.p, itq->second.first, std::hypot(e.len, itq->second.second));
      add(e.q, itp->second.first, std::hypot(e.len, itp->second.second));
    }
  }
  return g;
}

VecX dijkstra(const DistanceGraph& g, const std::vector<Index>& sources) {
  const Index n = (Index)g.nodes.size();
  VecX dist = VecX::Constant(n, std::numeric_limits<Real>::infinity());
  using Item = std::pair<Real, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (Index s : sources) {
    dist[s] = 0;
    pq.push({0.0, s});
  }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v] + 1e-15) continue;
    for (auto [w, len] : g.adj[v]) {
      Real nd = d + len;
      if (nd < dist[w] - 1e-15) {
        dist[w] = nd;
        pq.push({nd, w});
      }
    }
  }
  return dist;
}

MatX graph_geodesics(const DiscreteManifold& m, const std::vector<Index>& region,
                     const std::vector<Index>& sources) {
  DistanceGraph g = distance_graph(m, region);
  MatX table((Index)sources.size(), (Index)region.size());
  for (size_t s = 0; s < sources.size(); ++s) {
    Index ls = g.g2l[sources[s]];
    if (ls < 0) throw InvalidArgument("graph_geodesics: source outside the region");
    table.row((Index)s) = dijkstra(g, {ls}).transpose();
  }
  return table;
}

MatXc dense_resolvent(const InteriorRegion& R, Complex z) {
  MatXc A = MatX(R.op).cast<Complex>();
  A.diagonal().array() -= z;
  Eigen::PartialPivLU<MatXc> lu(A);
  MatXc G = lu.solve(MatXc::Identity(R.size(), R.size()));
  // delta-source normalization: columns are responses to e_q / mu_q.
  for (Index q = 0; q < R.size(); ++q) G.col(q) /= R.measure[q];
  return G;
}

} // namespace cylscat
