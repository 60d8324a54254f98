#include "cylscat/scattering.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace cylscat {

namespace {

// Mode coefficient sequence of u on one end over a layer window.
VecXc mode_sequence(const DiscreteManifold& m, const VecXc& u, Index n,
                    const std::vector<Index>& layers) {
  VecXc s((Index)layers.size());
  for (size_t k = 0; k < layers.size(); ++k) {
    Complex acc = 0;
    for (Index a = 0; a < m.m; ++a) {
      Index p = m.node(a, layers[k]);
      acc += m.cs.node_measures[m.column[p]] * m.mb.eigenvectors(m.column[p], n) * u[p];
    }
    s[(Index)k] = acc;
  }
  return s;
}

} // namespace

std::vector<Channel> open_channels(const DiscreteManifold& m, Real lambda) {
  std::vector<Channel> ch;
  const Real band = 4.0 / (m.h * m.h);
  for (size_t e = 0; e < m.ends.size(); ++e) {
    for (Index n = 0; n < m.mb.size(); ++n) {
      const Real t = m.mb.eigenvalues[n];
      if (lambda > t && lambda < t + band) {
        Channel c;
        c.end = (Index)e;
        c.mode = n;
        c.threshold = t;
        auto w = dispersion_wavenumber(Complex(lambda, 0), t, m.h, ClosureKind::outgoing);
        c.kappa = w.kappa;
        c.nu = std::sin(w.kappa * m.h) / m.h;
        ch.push_back(c);
      }
    }
  }
  return ch;
}

FarField far_field_extract(const DiscreteManifold& m, const VecXc& u, Complex z,
                           Index end_idx, bool near_window, Index window) {
  const End& end = m.ends.at(end_idx);
  auto [lo, hi] = m.clean_range(end);
  if (hi - lo + 1 < 4)
    throw InvalidArgument("far_field_extract: fewer than 4 clean layers available");
  window = std::min<Index>(window, hi - lo + 1);
  window = std::max<Index>(window, 4);

  std::vector<Index> layers;
  if (end.dir > 0) {
    Index a = near_window ? lo : hi - window + 1;
    for (Index l = a; l < a + window; ++l) layers.push_back(l);
  } else {
    Index b = near_window ? hi : lo + window - 1;
    for (Index l = b - window + 1; l <= b; ++l) layers.push_back(l);
  }

  FarField ff;
  const Index nm = m.mb.size();
  ff.outgoing.resize(nm);
  ff.incoming.resize(nm);
  ff.residual.resize(nm);
  ff.signal.resize(nm);
  for (Index n = 0; n < nm; ++n) {
    auto w = dispersion_wavenumber(z, m.mb.eigenvalues[n], m.h, ClosureKind::outgoing);
    VecXc seq = mode_sequence(m, u, n, layers);
    MatXc B((Index)layers.size(), 2);
    for (size_t k = 0; k < layers.size(); ++k) {
      const Real y = end.y_of(layers[k], m.h);
      B((Index)k, 0) = std::exp(Complex(0, 1) * w.kappa * y);
      B((Index)k, 1) = std::exp(Complex(0, -1) * w.kappa * y);
    }
    // Column scaling keeps the decaying/growing pair well conditioned.
    Complex s0 = B.col(0).norm(), s1 = B.col(1).norm();
    MatXc Bs = B;
    Bs.col(0) /= s0;
    Bs.col(1) /= s1;
    Eigen::JacobiSVD<MatXc> svd(Bs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    VecXc coef = svd.solve(seq);
    coef[0] /= s0;
    coef[1] /= s1;
    ff.outgoing[n] = coef[0];
    ff.incoming[n] = coef[1];
    ff.residual[n] = (B * coef - seq).norm();
    ff.signal[n] = seq.norm();
  }
  return ff;
}

namespace {

struct ChannelFields {
  std::vector<VecXc> source; // V_k psi0 per channel
  std::vector<VecXc> psi;    // Psi_{k,n,-} per channel
};

ChannelFields build_channel_fields(const DiscreteManifold& m, HelmholtzContext& ctx,
                                   const std::vector<Channel>& ch) {
  ChannelFields f;
  for (const auto& c : ch) {
    VecXc ref = reference_eigenfunction(m, c.end, c.mode, ctx.energy());
    VecXc v = apply_coupling(m, ctx.flattened(), ctx.product(), c.end, ref);
    VecXc u = ctx.solve(v);
    f.source.push_back(v);
    f.psi.push_back(apply_chi(m, c.end, ref) - u);
  }
  return f;
}

} // namespace

AmplitudeTable scattering_amplitude(const DiscreteManifold& m, HelmholtzContext& ctx,
                                    Real route_tol) {
  if (ctx.kind() != ClosureKind::outgoing)
    throw InvalidArgument("scattering_amplitude: needs an outgoing context");
  const Real lambda = ctx.energy().real();
  AmplitudeTable T;
  T.lambda = lambda;
  T.channels = open_channels(m, lambda);
  const Index d = T.size();
  T.quadrature.resize(d, d);
  T.farfield.resize(d, d);

  auto fields = build_channel_fields(m, ctx, T.channels);

  // Quadrature route: A_{jm,kn} = [V_k psi0_{kn}, Psi_{jm,-}] in the
  // bilinear mu0 pairing.
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c)
      T.quadrature(r, c) = m.mu0_bilinear(fields.source[c], fields.psi[r]);

  // Far-field route: outgoing coefficient of the scattered part on end j.
  for (Index c = 0; c < d; ++c) {
    for (size_t e = 0; e < m.ends.size(); ++e) {
      VecXc scat = fields.psi[c];
      if (T.channels[c].end == (Index)e) {
        VecXc ref = reference_eigenfunction(m, T.channels[c].end, T.channels[c].mode,
                                            ctx.energy());
        scat -= apply_chi(m, T.channels[c].end, ref);
      }
      FarField ff = far_field_extract(m, scat, ctx.energy(), (Index)e);
      for (Index r = 0; r < d; ++r) {
        if (T.channels[r].end != (Index)e) continue;
        const Complex nu = T.channels[r].nu;
        T.farfield(r, c) =
            Complex(0, 1) * std::sqrt(nu) / std::sqrt(kPi) * ff.outgoing[T.channels[r].mode];
      }
    }
  }

  Real scale = std::max(T.quadrature.cwiseAbs().maxCoeff(), 1e-3);
  T.route_disagreement = (T.quadrature - T.farfield).cwiseAbs().maxCoeff() / scale;
  if (T.route_disagreement > route_tol)
    throw NumericalError("scattering_amplitude: far-field and quadrature routes disagree by " +
                         std::to_string(T.route_disagreement));
  return T;
}

Real ScatteringMatrix::unitarity_defect() const {
  if (blocks.rows() == 0) return 0;
  MatXc G = blocks.adjoint() * blocks;
  return (G - MatXc::Identity(G.rows(), G.cols())).norm();
}

ScatteringMatrix s_matrix_from_amplitudes(const AmplitudeTable& table) {
  ScatteringMatrix S;
  S.lambda = table.lambda;
  S.channel_table = table.channels;
  const Index d = table.size();
  S.blocks = MatXc::Identity(d, d) - Complex(0, 2 * kPi) * table.quadrature;
  return S;
}

ScatteringMatrix s_matrix(const DiscreteManifold& m, HelmholtzContext& ctx, Real route_tol) {
  return s_matrix_from_amplitudes(scattering_amplitude(m, ctx, route_tol));
}

NonphysicalAmplitude nonphysical_amplitude(const DiscreteManifold& m, HelmholtzContext& ctx,
                                           Index mode_m, Index mode_n) {
  if (ctx.kind() != ClosureKind::outgoing)
    throw InvalidArgument("nonphysical_amplitude: needs an outgoing context");
  const Real lambda = ctx.energy().real();
  const Real tm = m.mb.eigenvalues[mode_m], tn = m.mb.eigenvalues[mode_n];
  if (!(lambda < std::max(tm, tn)))
    throw InvalidArgument("nonphysical_amplitude: energy not below max of the two thresholds");

  // Continued quadrature: the reference fields swap to the cosh branch on
  // their own below their thresholds.
  VecXc ref_n = reference_eigenfunction(m, 0, mode_n, ctx.energy());
  VecXc v_n = apply_coupling(m, ctx.flattened(), ctx.product(), 0, ref_n);
  VecXc ref_m = reference_eigenfunction(m, 0, mode_m, ctx.energy());
  VecXc v_m = apply_coupling(m, ctx.flattened(), ctx.product(), 0, ref_m);
  VecXc x_m = apply_chi(m, 0, ref_m) - ctx.solve(v_m);

  NonphysicalAmplitude A;
  A.value = m.mu0_bilinear(v_n, x_m);

  // Asymptotics route: decaying-branch coefficient of Phi_{1,n,-} in mode m
  // (evanescent) or its outgoing coefficient (propagating), matched through
  // the same nu^{1/2} normalization.
  // Scattered part; for m != n the reference of channel n has no mode-m
  // component, so subtracting it is only needed on the diagonal.
  VecXc scat = apply_chi(m, 0, ref_n) - ctx.solve(v_n);
  if (mode_m == mode_n) scat -= apply_chi(m, 0, ref_n);
  const bool m_closed = lambda < tm;
  FarField ff = far_field_extract(m, scat, ctx.energy(), 0, m_closed);
  auto w = dispersion_wavenumber(ctx.energy(), tm, m.h, ClosureKind::outgoing);
  const Complex nu = std::sin(w.kappa * m.h) / m.h;
  A.asymptotic = Complex(0, 1) * std::sqrt(nu) / std::sqrt(kPi) * ff.outgoing[mode_m];
  A.rel_disagreement =
      std::abs(A.value - A.asymptotic) / std::max(std::abs(A.value), 1e-12);
  return A;
}

ContinuationCheck continuation_overlap_check(const DiscreteManifold& m, Index mode_m,
                                             Index mode_n, Real lambda_target,
                                             Index n_samples, Index degree) {
  const Real tm = m.mb.eigenvalues[mode_m], tn = m.mb.eigenvalues[mode_n];
  const Real tcross = std::max(tm, tn);
  if (!(lambda_target < tcross))
    throw InvalidArgument("continuation_overlap_check: target not below the crossed threshold");

  auto branch_nu = [&](Real lam, Real thr) {
    auto w = dispersion_wavenumber(Complex(lam, 0), thr, m.h, ClosureKind::outgoing);
    return std::sin(w.kappa * m.h) / m.h;
  };

  // The amplitude is analytic in the branch variable s = nu of the crossed
  // threshold; its nearest singularities are the images of the other
  // thresholds under the principal branch of lambda(s) (which only reaches
  // lambda - tcross <= 2/h^2, the fold of the dispersion) plus the fold
  // radius 2/h itself. Keep the sampling window inside that disk.
  Real s_sing = 2.0 / m.h;
  for (Real t : model_thresholds(m)) {
    if (std::abs(t - tcross) < 1e-9) continue;
    const Real d = t - tcross;
    if (d > 2.0 / (m.h * m.h)) continue; // beyond the fold, unreachable
    const Real s2 = std::abs(d * (1.0 - m.h * m.h * d / 4.0));
    s_sing = std::min(s_sing, std::sqrt(s2));
  }
  Real next = tcross + 4.0 / (m.h * m.h);
  for (Real t : model_thresholds(m))
    if (t > tcross + 1e-9) {
      next = t;
      break;
    }
  Real window_hi = tcross + 0.60 * (next - tcross);
  {
    const Real s_cap = 0.7 * s_sing;
    // Invert s^2 = (lam - tcross)(1 - h^2 (lam - tcross)/4) for the cap.
    Real d = s_cap * s_cap;
    for (int it = 0; it < 40; ++it)
      d = s_cap * s_cap / (1.0 - m.h * m.h * d / 4.0);
    window_hi = std::min(window_hi, tcross + d);
  }
  const Real window_lo = tcross + 0.02 * (window_hi - tcross);

  // Sample densely near the branch point (quadratic clustering in s).
  VecXc svals(n_samples), avals(n_samples);
  auto lam_of_s = [&](Real s) {
    Real d = s * s;
    for (int it = 0; it < 60; ++it) d = s * s / (1.0 - m.h * m.h * d / 4.0);
    return tcross + d;
  };
  const Real s_lo = std::sqrt(std::max(window_lo - tcross, 1e-6));
  Real s_hi_w = 0.0;
  {
    auto w = dispersion_wavenumber(Complex(window_hi, 0), tcross, m.h, ClosureKind::outgoing);
    s_hi_w = std::abs(std::sin(w.kappa * m.h) / m.h);
  }
  for (Index k = 0; k < n_samples; ++k) {
    const Real t = Real(k) / Real(n_samples - 1);
    const Real s = s_lo + (s_hi_w - s_lo) * t * t;
    const Real lam = lam_of_s(s);
    HelmholtzContext ctx(m, Complex(lam, 0));
    VecXc ref_n = reference_eigenfunction(m, 0, mode_n, Complex(lam, 0));
    VecXc v_n = apply_coupling(m, ctx.flattened(), ctx.product(), 0, ref_n);
    VecXc ref_m = reference_eigenfunction(m, 0, mode_m, Complex(lam, 0));
    VecXc v_m = apply_coupling(m, ctx.flattened(), ctx.product(), 0, ref_m);
    VecXc x_m = apply_chi(m, 0, ref_m) - ctx.solve(v_m);
    avals[k] = m.mu0_bilinear(v_n, x_m);
    svals[k] = branch_nu(lam, tcross);
  }

  // Adaptive barycentric rational fit (AAA) in the branch variable;
  // rational interpolation tracks near-threshold resonance poles that
  // defeat plain polynomial continuation.
  std::vector<Index> support;
  std::vector<char> used(n_samples, 0);
  VecXc wbary;
  const Index max_terms = std::min<Index>(degree + 1, n_samples / 2);
  VecXc resid = avals;
  Complex mean = avals.mean();
  for (Index k = 0; k < n_samples; ++k) resid[k] = avals[k] - mean;
  for (Index term = 0; term < max_terms; ++term) {
    Index pick = 0;
    Real best = -1;
    for (Index k = 0; k < n_samples; ++k)
      if (!used[k] && std::abs(resid[k]) > best) {
        best = std::abs(resid[k]);
        pick = k;
      }
    used[pick] = 1;
    support.push_back(pick);
    const Index ns = (Index)support.size();
    std::vector<Index> rest;
    for (Index k = 0; k < n_samples; ++k)
      if (!used[k]) rest.push_back(k);
    if ((Index)rest.size() < ns + 1) break;
    MatXc Lw((Index)rest.size(), ns);
    for (Index r = 0; r < (Index)rest.size(); ++r)
      for (Index c = 0; c < ns; ++c) {
        const Complex dz = svals[rest[r]] - svals[support[c]];
        Lw(r, c) = (avals[rest[r]] - avals[support[c]]) / dz;
      }
    Eigen::JacobiSVD<MatXc> svd(Lw, Eigen::ComputeFullV);
    wbary = svd.matrixV().col(ns - 1);
    // residual on the rest
    Real rmax = 0;
    for (Index r = 0; r < (Index)rest.size(); ++r) {
      Complex num = 0, den = 0;
      for (Index c = 0; c < ns; ++c) {
        const Complex cw = wbary[c] / (svals[rest[r]] - svals[support[c]]);
        num += cw * avals[support[c]];
        den += cw;
      }
      resid[rest[r]] = avals[rest[r]] - num / den;
      rmax = std::max(rmax, std::abs(resid[rest[r]]));
    }
    if (rmax < 1e-11 * avals.cwiseAbs().maxCoeff()) break;
  }

  auto bary_eval = [&](Complex s) {
    Complex num = 0, den = 0;
    for (size_t c = 0; c < support.size(); ++c) {
      const Complex dz = s - svals[support[c]];
      if (std::abs(dz) < 1e-14) return avals[support[c]];
      const Complex cw = wbary[(Index)c] / dz;
      num += cw * avals[support[c]];
      den += cw;
    }
    return num / den;
  };

  ContinuationCheck out;
  const Complex s_t = branch_nu(lambda_target, tcross);
  out.extrapolated = bary_eval(s_t);
  HelmholtzContext ctx(m, Complex(lambda_target, 0));
  out.direct = nonphysical_amplitude(m, ctx, mode_m, mode_n).value;
  out.rel_err = std::abs(out.extrapolated - out.direct) /
                std::max(std::abs(out.direct), 1e-12);
  return out;
}

} // namespace cylscat
