#include "cylscat/helmholtz.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cylscat {

namespace {

VecXc real_times_complex(const SpMat& A, const VecXc& x) {
  VecXc y(A.rows());
  y.real() = A * x.real().eval();
  y.imag() = A * x.imag().eval();
  return y;
}

} // namespace

ModeWavenumber dispersion_wavenumber(Complex z, Real lambda_n, Real h, ClosureKind kind,
                                     bool grow) {
  const Complex c = 1.0 - h * h * (z - lambda_n) / 2.0;
  if (z.imag() == 0.0 && (std::abs(c.real() - 1.0) < 1e-13 || std::abs(c.real() + 1.0) < 1e-13))
    throw NumericalError("dispersion: energy at a band edge (threshold / exceptional point)");

  const Complex sq = std::sqrt(c * c - 1.0);
  Complex xi1 = c + sq, xi2 = c - sq; // xi1 * xi2 = 1
  Complex xi;
  bool propagating = false;
  const Real a1 = std::abs(xi1), a2 = std::abs(xi2);
  if (std::abs(a1 - 1.0) < 1e-12 && std::abs(a2 - 1.0) < 1e-12) {
    // Propagating band at real energy.
    propagating = true;
    const bool want_upper = (kind != ClosureKind::incoming);
    if ((xi1.imag() > 0) == want_upper)
      xi = xi1;
    else
      xi = xi2;
  } else {
    xi = (a1 < a2) ? xi1 : xi2; // decaying branch
    if (grow) xi = 1.0 / xi;
  }
  if (grow && propagating)
    throw InvalidArgument("dispersion: growing branch requested for a propagating mode");

  ModeWavenumber w;
  w.xi = xi;
  w.kappa = Complex(0, -1) * std::log(xi) / h;
  w.propagating = propagating;
  return w;
}

ModeClosure make_closure(const ModeBasis& mb, Complex z, Real h, ClosureKind kind,
                         Index growing_mode) {
  ModeClosure cl;
  cl.kind = kind;
  cl.z = z;
  cl.growing_mode = (kind == ClosureKind::nonphysical) ? growing_mode : -1;
  if (kind == ClosureKind::nonphysical && (growing_mode < 0 || growing_mode >= mb.size()))
    throw InvalidArgument("make_closure: nonphysical closure needs a valid mode index");
  cl.modes.resize(mb.size());
  for (Index n = 0; n < mb.size(); ++n) {
    const bool grow = (kind == ClosureKind::nonphysical && n == cl.growing_mode);
    const ClosureKind per = (kind == ClosureKind::nonphysical)
                                ? ClosureKind::outgoing
                                : kind;
    cl.modes[n] = dispersion_wavenumber(z, mb.eigenvalues[n], h, per, grow);
  }
  return cl;
}

HelmholtzContext::HelmholtzContext(const DiscreteManifold& m, Complex z, ClosureKind kind)
    : m_(&m), z_(z), kind_(kind) {
  Hfree_ = m.flattened_operator();
  H0free_ = m.operator_matrix(false);
  closure_row_.assign(m.size(), 0);

  for (const auto& end : m.ends)
    closures_.push_back(make_closure(m.mb, z, m.h, kind));

  std::vector<TripletC> trip;
  trip.reserve(Hfree_.nonZeros() + m.m * m.m * m.ends.size());
  std::vector<char> is_closure_layer(m.layers, 0);
  for (const auto& end : m.ends) is_closure_layer[end.closure_layer] = 1;

  for (int k = 0; k < Hfree_.outerSize(); ++k)
    for (SpMat::InnerIterator it(Hfree_, k); it; ++it) {
      if (is_closure_layer[m.layer_of(it.row())]) continue;
      trip.emplace_back(it.row(), it.col(), Complex(it.value(), 0));
    }
  for (Index p = 0; p < m.size(); ++p)
    if (!is_closure_layer[m.layer_of(p)]) trip.emplace_back(p, p, -z);

  // Closure rows: per mode, (xi_n^{-1} u_n(Lc) - u_n(Lc -/+ 1)) / h^2.
  const Real h2 = m.h * m.h;
  for (size_t ei = 0; ei < m.ends.size(); ++ei) {
    const auto& end = m.ends[ei];
    const auto& cl = closures_[ei];
    const Index Lc = end.closure_layer;
    const Index Lin = Lc - end.dir; // inward neighbour layer
    for (Index a = 0; a < m.m; ++a) {
      const Index pa = m.node(a, Lc);
      closure_row_[pa] = 1;
      for (Index b = 0; b < m.m; ++b) {
        Complex e = 0;
        for (Index n = 0; n < m.mb.size(); ++n)
          e += (1.0 / cl.modes[n].xi) * m.mb.eigenvectors(m.column[pa], n) *
               m.mb.eigenvectors(m.column[m.node(b, Lc)], n) *
               m.cs.node_measures[m.column[m.node(b, Lc)]];
        trip.emplace_back(pa, m.node(b, Lc), e / h2);
      }
      // The inward longitudinal neighbour shares the untwisted column.
      Index bq = -1;
      for (Index b = 0; b < m.m; ++b)
        if (m.column[m.node(b, Lin)] == m.column[pa]) {
          bq = b;
          break;
        }
      trip.emplace_back(pa, m.node(bq, Lin), Complex(-1.0 / h2, 0));
    }
  }

  A_.resize(m.size(), m.size());
  A_.setFromTriplets(trip.begin(), trip.end());
  A_.makeCompressed();
  lu_.compute(A_);
  if (lu_.info() != Eigen::Success)
    throw NumericalError("helmholtz: closed system factorization failed (exceptional energy?)");
}

Real HelmholtzContext::rcond_estimate() const {
  // ||A||_1 and a power-iteration estimate of ||A^{-1}||.
  Real anorm = 0;
  for (int k = 0; k < A_.outerSize(); ++k) {
    Real col = 0;
    for (SpMatC::InnerIterator it(A_, k); it; ++it) col += std::abs(it.value());
    anorm = std::max(anorm, col);
  }
  // Power iteration on A^{-*} A^{-1}; the adjoint solve uses the complex
  // symmetry of A in the mu0 inner product.
  std::mt19937_64 rng(12345);
  std::normal_distribution<Real> gauss;
  VecXc x(A_.rows());
  for (Index i = 0; i < x.size(); ++i) x[i] = Complex(gauss(rng), gauss(rng));
  x /= x.norm();
  Real inv_norm = 0;
  const VecXc mu0 = m_->measures0.cast<Complex>();
  for (int it = 0; it < 4; ++it) {
    VecXc y = lu_.solve(x);
    VecXc v = (mu0.array() * lu_.solve(VecXc(y.conjugate().array() / mu0.array())).array())
                  .conjugate();
    inv_norm = std::sqrt(v.norm());
    x = v / v.norm();
  }
  return 1.0 / std::max(anorm * inv_norm, 1e-300);
}

VecXc HelmholtzContext::solve(const VecXc& f) const {
  VecXc rhs = f;
  for (Index p = 0; p < rhs.size(); ++p)
    if (closure_row_[p]) rhs[p] = 0;
  VecXc u = lu_.solve(rhs);
  if (lu_.info() != Eigen::Success) throw NumericalError("helmholtz: solve failed");
  return u;
}

Real HelmholtzContext::interior_residual(const VecXc& u, const VecXc& f) const {
  VecXc r = real_times_complex(Hfree_, u) - z_ * u - f;
  Real acc = 0;
  for (Index p = 0; p < r.size(); ++p)
    if (!closure_row_[p]) acc += std::norm(r[p]);
  return std::sqrt(acc);
}

Complex reference_norm(Complex nu) {
  return 1.0 / std::sqrt(kPi * nu);
}

VecXc reference_eigenfunction(const DiscreteManifold& m, Index end_idx, Index mode, Complex z) {
  const End& end = m.ends.at(end_idx);
  auto w = dispersion_wavenumber(z, m.mb.eigenvalues[mode], m.h, ClosureKind::outgoing);
  const Complex nu = std::sin(w.kappa * m.h) / m.h;
  const Complex norm = reference_norm(nu);
  VecXc psi(m.size());
  for (Index p = 0; p < m.size(); ++p) {
    const Index l = m.layer_of(p);
    const Real y = end.y_of(l, m.h);
    psi[p] = norm * std::cos(w.kappa * y) * m.mb.eigenvectors(m.column[p], mode);
  }
  return psi;
}

VecXc apply_chi(const DiscreteManifold& m, Index end_idx, const VecXc& f) {
  const End& end = m.ends.at(end_idx);
  VecXc g = VecXc::Zero(f.size());
  for (Index p = 0; p < f.size(); ++p)
    if (end.chi(m.layer_of(p))) g[p] = f[p];
  return g;
}

VecXc apply_coupling(const DiscreteManifold& m, const SpMat& Hfree, const SpMat& H0free,
                     Index end_idx, const VecXc& psi) {
  VecXc chi_psi = apply_chi(m, end_idx, psi);
  VecXc v = real_times_complex(Hfree, chi_psi) -
            apply_chi(m, end_idx, real_times_complex(H0free, psi));
  return v;
}

WaveField generalized_eigenfunction(const DiscreteManifold& m, HelmholtzContext& ctx,
                                    Index end_idx, Index mode, int sign) {
  if (ctx.kind() != ClosureKind::outgoing)
    throw InvalidArgument("generalized_eigenfunction: needs an outgoing context");
  const Real lambda = ctx.energy().real();
  if (!(lambda > m.mb.eigenvalues[mode]))
    throw InvalidArgument("generalized_eigenfunction: closed channel, use the nonphysical kind");

  VecXc psi0 = reference_eigenfunction(m, end_idx, mode, ctx.energy());
  VecXc v = apply_coupling(m, ctx.flattened(), ctx.product(), end_idx, psi0);
  VecXc u = ctx.solve(v);
  WaveField out;
  out.values = apply_chi(m, end_idx, psi0) - u;
  if (sign > 0) out.values = out.values.conjugate();
  out.energy = ctx.energy();
  out.closure_tag = (sign < 0) ? "outgoing" : "incoming";
  return out;
}

WaveField nonphysical_eigenfunction(const DiscreteManifold& m, HelmholtzContext& ctx,
                                    Index mode) {
  if (ctx.kind() != ClosureKind::outgoing)
    throw InvalidArgument("nonphysical_eigenfunction: needs an outgoing context");
  const Real lambda = ctx.energy().real();
  if (!(lambda < m.mb.eigenvalues[mode]))
    throw InvalidArgument("nonphysical_eigenfunction: energy above the channel threshold");

  // cosh growth guard at the truncation depth.
  auto w = dispersion_wavenumber(ctx.energy(), m.mb.eigenvalues[mode], m.h,
                                 ClosureKind::outgoing);
  const Real beta = w.kappa.imag();
  const End& end = m.ends.at(0);
  const Real max_arg = beta * std::abs(end.y_of(end.closure_layer, m.h));
  if (max_arg > 650.0)
    throw NumericalError("nonphysical_eigenfunction: cosh growth overflows the truncation depth");

  VecXc phi0 = reference_eigenfunction(m, 0, mode, ctx.energy());
  VecXc v = apply_coupling(m, ctx.flattened(), ctx.product(), 0, phi0);
  VecXc u = ctx.solve(v);
  WaveField out;
  out.values = apply_chi(m, 0, phi0) - u;
  out.energy = ctx.energy();
  out.closure_tag = "nonphysical(" + std::to_string(mode) + ")";
  return out;
}

std::vector<Real> model_thresholds(const DiscreteManifold& m) {
  std::vector<Real> t;
  const Real band = 4.0 / (m.h * m.h);
  for (Index n = 0; n < m.mb.size(); ++n) {
    t.push_back(m.mb.eigenvalues[n]);
    t.push_back(m.mb.eigenvalues[n] + band);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end(),
                      [](Real a, Real b) { return std::abs(a - b) < 1e-12; }),
          t.end());
  return t;
}

Real threshold_distance(const DiscreteManifold& m, Real lambda) {
  Real d = std::numeric_limits<Real>::infinity();
  for (Real t : model_thresholds(m)) d = std::min(d, std::abs(lambda - t));
  return d;
}

} // namespace cylscat
