#include <doctest.h>

#include "cylscat/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace cylscat;

namespace {

ManifoldConfig base_config() {
  ManifoldConfig cfg;
  cfg.n_ends = 1;
  cfg.cross_section.kind = CrossSectionSpec::Kind::Cycle;
  cfg.cross_section.nodes = 8;
  cfg.cross_section.spacing = 0.5;
  cfg.h_y = 0.5;
  cfg.total_layers = 40;
  cfg.gamma_cut = 20;
  return cfg;
}

ManifoldConfig bump_config() {
  auto cfg = base_config();
  cfg.perturbation.kind = PerturbationConfig::Kind::AxialStretch;
  cfg.perturbation.amplitude = 0.4;
  cfg.perturbation.center_layer = 8.0;
  cfg.perturbation.sigma = 2.0;
  cfg.perturbation.layer_lo = 5;
  cfg.perturbation.layer_hi = 12;
  cfg.perturbation.transverse_anchor = 0;
  cfg.perturbation.transverse_sigma = 2.0;
  return cfg;
}

Real weighted_asymmetry(const SpMat& H, const VecX& mu) {
  MatX A = MatX(H);
  for (Index i = 0; i < A.rows(); ++i) A.row(i) *= mu[i];
  return (A - A.transpose()).norm() / std::max(1.0, A.norm());
}

} // namespace

TEST_CASE("unperturbed manifold equals the product operator") {
  auto M = build_manifold(base_config());
  SpMat Hp = M.operator_matrix(true);
  SpMat H0 = M.operator_matrix(false);
  CHECK((MatX(Hp) - MatX(H0)).norm() == 0.0);
  CHECK((M.measures - M.measures0).norm() == 0.0);
}

TEST_CASE("bump support contract") {
  auto M = build_manifold(bump_config());
  bool any_perturbed = false;
  for (const auto& e : M.edges) {
    Index la = M.layer_of(e.p), lb = M.layer_of(e.q);
    bool inside = (la >= 5 && la <= 12) || (lb >= 5 && lb <= 12);
    if (!inside) {
      CHECK(e.w == e.w0);
    } else if (e.w != e.w0) {
      any_perturbed = true;
    }
  }
  CHECK(any_perturbed);
}

TEST_CASE("assembled operators are symmetric in their weighted inner products") {
  auto M = build_manifold(bump_config());
  CHECK(weighted_asymmetry(M.operator_matrix(true), M.measures) <= 1e-12);
  CHECK(weighted_asymmetry(M.operator_matrix(false), M.measures0) <= 1e-12);
  CHECK(weighted_asymmetry(M.flattened_operator(), M.measures0) <= 1e-12);
}

TEST_CASE("tensor structure: product operator commutes with mode projections") {
  auto M = build_manifold(base_config());
  MatX H0 = MatX(M.operator_matrix(false));
  const Index m = M.m, L = M.layers;
  MatX Mperp = M.cs.node_measures.asDiagonal();
  for (Index n : {0, 1, 5}) {
    MatX Pn = M.mb.eigenvectors.col(n) * (M.mb.eigenvectors.col(n).transpose() * Mperp);
    MatX Plift = MatX::Zero(m * L, m * L);
    for (Index l = 0; l < L; ++l) Plift.block(l * m, l * m, m, m) = Pn;
    CHECK((H0 * Plift - Plift * H0).norm() <= 1e-12 * H0.norm());
  }
}

TEST_CASE("two-end pipeline assembles symmetric operator") {
  auto cfg = base_config();
  cfg.n_ends = 2;
  cfg.perturbation = bump_config().perturbation;
  cfg.perturbation.layer_lo = 16;
  cfg.perturbation.layer_hi = 24;
  cfg.perturbation.center_layer = 20.0;
  cfg.gamma_cut = 27;
  auto M = build_manifold(cfg);
  CHECK(M.ends.size() == 2);
  CHECK(weighted_asymmetry(M.operator_matrix(true), M.measures) <= 1e-12);
  CHECK(M.ends[0].chi_lo >= 26);
  CHECK(M.ends[1].chi_hi <= 14);
}

TEST_CASE("interior operator is positive semidefinite") {
  auto M = build_manifold(bump_config());
  CutSpecification cut;
  auto R = split_interior(M, cut);
  MatX A = MatX(R.op);
  for (Index i = 0; i < A.rows(); ++i) A.row(i) *= R.measure[i];
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (A + A.transpose()));
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  // Neumann structure: constants in the kernel.
  VecX ones = VecX::Ones(R.size());
  CHECK((R.op * ones).norm() <= 1e-12);
}

TEST_CASE("split_interior with and without obstacle") {
  auto M = build_manifold(base_config());

  SUBCASE("empty obstacle gives Gamma itself") {
    CutSpecification cut;
    auto R = split_interior(M, cut);
    CHECK((Index)R.gamma.size() == M.m);
    CHECK(R.size() == M.m * (M.gamma_cut + 1));
    for (Index k = 0; k < (Index)R.gamma.size(); ++k)
      CHECK(M.layer_of(R.nodes[R.gamma[k]]) == M.gamma_cut);
  }

  SUBCASE("ball obstacle: breadth-first sphere") {
    CutSpecification cut;
    cut.has_obstacle = true;
    cut.obstacle_center = M.node(3, 10);
    cut.obstacle_radius = 2;
    auto R = split_interior(M, cut);
    auto sphere = hop_sphere(M, cut.obstacle_center, 2, M.gamma_cut);
    CHECK(R.gamma.size() == sphere.size());
    // Hop ball of radius 2 around an interior product-mesh node: the center
    // plus its 4 hop-1 neighbours are removed.
    CHECK(R.obstacle_interior.size() == 5);
    CHECK(R.size() == M.m * (M.gamma_cut + 1) - 5);
  }

  SUBCASE("obstacle touching the boundary is rejected") {
    CutSpecification cut;
    cut.has_obstacle = true;
    cut.obstacle_center = M.node(3, 1);
    cut.obstacle_radius = 2;
    CHECK_THROWS_AS(split_interior(M, cut), InvalidArgument);
  }
}

TEST_CASE("misplaced Gamma and truncation overlaps are rejected") {
  auto cfg = bump_config();
  cfg.gamma_cut = 10; // inside the bump support
  CHECK_THROWS_AS(build_manifold(cfg), InvalidArgument);

  auto cfg2 = bump_config();
  cfg2.perturbation.layer_lo = 30;
  cfg2.perturbation.layer_hi = 38; // into the truncation zone
  cfg2.perturbation.center_layer = 34.0;
  cfg2.gamma_cut = 20;
  CHECK_THROWS_AS(build_manifold(cfg2), InvalidArgument);
}

TEST_CASE("twisted manifold is isometric to the untwisted one") {
  auto cfg = bump_config();
  auto M0 = build_manifold(cfg);
  auto cfgT = cfg;
  cfgT.twist.enabled = true;
  cfgT.twist.layer = 15;
  cfgT.twist.shift = 3;
  auto MT = build_manifold(cfgT);

  // Phi(a, l) = (a + 3 mod 8, l) below layer 15 and the identity above maps
  // the twisted mesh onto the untwisted one. Measures must agree under the
  // relabelling and the operator spectra must coincide.
  for (Index p = 0; p < M0.size(); ++p) {
    Index a = M0.cs_of(p), l = M0.layer_of(p);
    Index pt = (l < 15) ? MT.node((a - 3 + 8) % 8, l) : p;
    CHECK(MT.measures[pt] == doctest::Approx(M0.measures[p]).epsilon(1e-14));
  }
  MatX A0 = MatX(M0.operator_matrix(true));
  MatX AT = MatX(MT.operator_matrix(true));
  MatX S0 = M0.measures.array().sqrt().matrix().asDiagonal() * A0 *
            M0.measures.array().rsqrt().matrix().asDiagonal();
  MatX ST = MT.measures.array().sqrt().matrix().asDiagonal() * AT *
            MT.measures.array().rsqrt().matrix().asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatX> e0(0.5 * (S0 + S0.transpose()));
  Eigen::SelfAdjointEigenSolver<MatX> eT(0.5 * (ST + ST.transpose()));
  CHECK((e0.eigenvalues() - eT.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-10);
}
