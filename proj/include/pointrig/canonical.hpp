// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/mlp.hpp"
#include "pointrig/rng.hpp"

namespace pointrig {

constexpr int kCanonicalOut = 4;  // raw sdf, then rgb albedo logits

// Optimizable oriented point cloud: positions plus one shared splat radius.
struct PointCloud {
  std::vector<Vec3<double>> x;
  double radius = 0.0;
  int generation = 0;
};

inline void validate_cloud(const PointCloud& cloud) {
  PR_CHECK(!cloud.x.empty(), "point cloud: no points");
  PR_CHECK(cloud.radius > 0.0, "point cloud: radius must be positive");
  for (std::size_t i = 0; i < cloud.x.size(); ++i) {
    const Vec3<double>& p = cloud.x[i];
    PR_CHECK(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z),
             "point cloud: non-finite coordinate at point " << i);
  }
}

inline double bbox_diag(const std::vector<Vec3<double>>& pts) {
  PR_CHECK(!pts.empty(), "bbox_diag: no points");
  Vec3<double> lo = pts[0], hi = pts[0];
  for (const auto& p : pts)
    for (int c = 0; c < 3; ++c) {
      lo[c] = std::min(lo[c], p[c]);
      hi[c] = std::max(hi[c], p[c]);
    }
  return norm(hi - lo);
}

struct CanonicalSample {
  double sdf = 0.0;
  Vec3<double> albedo{};
};

// Unit-norm eikonal sample set: the cloud points plus one perturbed copy each.
struct EikonalBatch {
  std::vector<Vec3<double>> x;
};

namespace detail {

// Solves the SPD system G x = b in place: lower Cholesky, then two sweeps.
inline void spd_solve(std::vector<double>& G, std::vector<double>& b, int n) {
  for (int j = 0; j < n; ++j) {
    double diag = G[j * n + j];
    for (int k = 0; k < j; ++k) diag -= sqr(G[j * n + k]);
    PR_CHECK(diag > 0.0, "spd_solve: matrix not positive definite");
    const double lj = std::sqrt(diag);
    G[j * n + j] = lj;
    for (int i = j + 1; i < n; ++i) {
      double s = G[i * n + j];
      for (int k = 0; k < j; ++k) s -= G[i * n + k] * G[j * n + k];
      G[i * n + j] = s / lj;
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= G[i * n + k] * b[k];
    b[i] = s / G[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= G[k * n + i] * b[k];
    b[i] = s / G[i * n + i];
  }
}

}  // namespace detail

// Spherical start for the sdf head: hidden rows Gaussian at sqrt(2/fan_out)
// give a random feature basis, then one ridge least-squares solve fits the
// sdf output row to |x| - radius over a fixed golden-angle probe set.
// Initialization only, no gradient steps; the albedo rows start small so the
// albedo begins near mid-gray.
inline void geometric_init(Mlp<double>& net, std::uint64_t seed, double radius) {
  PR_CHECK(net.dims.front() == 3 && net.dims.back() == kCanonicalOut,
           "geometric_init: net must map 3 -> " << kCanonicalOut);
  Rng rng(seed);
  const int last = net.layer_count() - 1;
  for (int l = 0; l < last; ++l) {
    const int din = net.dims[l], dout = net.dims[l + 1];
    double* dir = net.params.data() + net.off_dir[l];
    double* gain = net.params.data() + net.off_gain[l];
    double* bias = net.params.data() + net.off_bias[l];
    const double sig = std::sqrt(2.0 / double(dout));
    for (int i = 0; i < dout * din; ++i) dir[i] = sig * rng.normal();
    for (int r = 0; r < dout; ++r) {
      double s = 0;
      for (int c = 0; c < din; ++c) s += sqr(dir[r * din + c]);
      gain[r] = std::sqrt(s);
      bias[r] = 0.0;
    }
  }
  const int din = net.dims[last];
  double* dir = net.params.data() + net.off_dir[last];
  double* bias = net.params.data() + net.off_bias[last];
  for (int r = 1; r < kCanonicalOut; ++r) {
    for (int c = 0; c < din; ++c) dir[r * din + c] = 0.01 * rng.normal();
    bias[r] = 0.0;
  }
  net.refresh();

  std::vector<Vec3<double>> probe;
  const int kDirs = 256;
  probe.reserve(4 * kDirs + 1);
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < kDirs; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / kDirs;
    const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3<double> d{rr * std::cos(ga * i), rr * std::sin(ga * i), z};
    for (double s : {0.5, 1.0, 1.5, 2.0}) probe.push_back(d * (radius * s));
  }
  probe.push_back({});
  const int nf = din + 1;
  PR_CHECK(static_cast<int>(probe.size()) > nf, "geometric_init: more unknowns than probes");
  std::vector<double> G(static_cast<std::size_t>(nf) * nf, 0.0), rhs(nf, 0.0), a(nf);
  MlpTape<double> tape;
  tape.bind(net);
  for (const auto& p : probe) {
    const double in[3] = {p.x, p.y, p.z};
    mlp_forward(net, tape, in);
    const double* h = tape.x.data() + tape.xo[last];
    for (int c = 0; c < din; ++c) a[c] = h[c];
    a[din] = 1.0;
    const double t = norm(p) - radius;
    for (int i = 0; i < nf; ++i) {
      rhs[i] += a[i] * t;
      for (int j = 0; j <= i; ++j) G[i * nf + j] += a[i] * a[j];
    }
  }
  for (int i = 0; i < nf; ++i)
    for (int j = i + 1; j < nf; ++j) G[i * nf + j] = G[j * nf + i];
  const double ridge = 1e-7 * double(probe.size());
  for (int i = 0; i < nf; ++i) G[i * nf + i] += ridge;
  detail::spd_solve(G, rhs, nf);
  for (int c = 0; c < din; ++c) dir[c] = rhs[c];
  bias[0] = rhs[din];
  net.refresh();
}

// Shared canonical net: raw sdf plus sigmoid-squashed albedo.
inline Mlp<double> make_canonical_net(std::uint64_t seed,
                                      const std::vector<int>& hidden = {128, 128, 128, 128, 128},
                                      double init_radius = 0.5) {
  std::vector<int> dims;
  dims.push_back(3);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(kCanonicalOut);
  auto net = Mlp<double>::create(dims, Act::kSoftplus100, {{"sdf", 0, 1}, {"albedo", 1, 3}});
  geometric_init(net, seed, init_radius);
  return net;
}

inline CanonicalSample canonical_query(const Mlp<double>& net, MlpTape<double>& tape,
                                       const Vec3<double>& x) {
  const double in[3] = {x.x, x.y, x.z};
  const double* out = mlp_forward(net, tape, in);
  CanonicalSample s;
  s.sdf = out[0];
  for (int c = 0; c < 3; ++c) s.albedo[c] = sigmoid(out[1 + c]);
  return s;
}

// Exact sdf gradient from the taped forward of canonical_query.
inline Vec3<double> canonical_grad(const Mlp<double>& net, MlpTape<double>& tape) {
  Vec3<double> g{};
  for (int c = 0; c < 3; ++c) {
    double v[3] = {0, 0, 0};
    v[c] = 1;
    mlp_forward_tangent(net, tape, v);
    g[c] = tape.out_tangent(net, c)[0];
  }
  return g;
}

constexpr double kGradEps = 1e-8;

// Unit canonical normal; `index` only labels the error.
inline Vec3<double> canonical_normal(const Mlp<double>& net, MlpTape<double>& tape,
                                     const Vec3<double>& x, std::int64_t index = -1) {
  canonical_query(net, tape, x);
  const Vec3<double> g = canonical_grad(net, tape);
  const double n = norm(g);
  if (!(n > kGradEps)) {
    std::ostringstream oss;
    oss << "canonical normal undefined: vanishing sdf gradient at point " << index;
    throw NormalUndefined(oss.str());
  }
  return g / n;
}

// Reverse pass over the taped canonical_query forward. albedo_bar enters
// behind the sigmoid; parameter gradients accumulate into grad; returns the
// position cotangent.
inline Vec3<double> canonical_query_backward(const Mlp<double>& net, MlpTape<double>& tape,
                                             double sdf_bar, const Vec3<double>& albedo_bar,
                                             double* grad) {
  const double* out = tape.out(net);
  std::array<double, kCanonicalOut> dout{};
  dout[0] = sdf_bar;
  for (int c = 0; c < 3; ++c) {
    const double s = sigmoid(out[1 + c]);
    dout[1 + c] = albedo_bar[c] * s * (1.0 - s);
  }
  double dx[3] = {0, 0, 0};
  mlp_backward(net, tape, dout.data(), grad, dx);
  return {dx[0], dx[1], dx[2]};
}

// Cotangent of the sdf gradient: accumulates d<g_bar, grad sdf>/d(params)
// into grad and returns the same derivative against the query position.
// Needs the three tangent channels laid down by canonical_grad.
inline Vec3<double> canonical_grad_backward(const Mlp<double>& net, MlpTape<double>& tape,
                                            const Vec3<double>& g_bar, double* grad) {
  PR_CHECK(tape.K == 3, "canonical_grad_backward: gradient tangent channels missing");
  const double mix[3] = {g_bar.x, g_bar.y, g_bar.z};
  std::array<double, kCanonicalOut> dv{}, dt{};
  dv[0] = 1.0;
  double dxt[3] = {0, 0, 0};
  mlp_backward_dual(net, tape, mix, dv.data(), dt.data(), grad, dxt);
  return {dxt[0], dxt[1], dxt[2]};
}

struct SdfLossValues {
  double l_sdf = 0.0, l_eik = 0.0;
};

// field(x) -> {sdf, grad sdf}; works for the canonical net or any analytic
// reference field.
template <typename Field>
inline SdfLossValues sdf_losses(Field&& field, const std::vector<Vec3<double>>& pts,
                                const EikonalBatch& eik) {
  PR_CHECK(!pts.empty() && !eik.x.empty(), "sdf_losses: empty batch");
  SdfLossValues r;
  for (const auto& p : pts) r.l_sdf += sqr(field(p).first);
  r.l_sdf /= double(pts.size());
  for (const auto& e : eik.x) r.l_eik += sqr(norm(field(e).second) - 1.0);
  r.l_eik /= double(eik.x.size());
  return r;
}

inline auto mlp_sdf_field(const Mlp<double>& net, MlpTape<double>& tape) {
  return [&net, &tape](const Vec3<double>& x) {
    const CanonicalSample s = canonical_query(net, tape, x);
    return std::make_pair(s.sdf, canonical_grad(net, tape));
  };
}

// Evaluates both sdf losses and accumulates the gradient of
// lambda_sdf*L_sdf + lambda_eik*L_eik into grad. When pos_bar is given the
// position cotangents flow too: the sdf pull at each point plus both
// eikonal images of it (the batch must then be the 2N layout of
// make_eikonal_batch over the same points).
inline SdfLossValues sdf_losses_grad(const Mlp<double>& net, MlpTape<double>& tape,
                                     const std::vector<Vec3<double>>& pts,
                                     const EikonalBatch& eik, double lambda_sdf,
                                     double lambda_eik, double* grad,
                                     std::vector<Vec3<double>>* pos_bar = nullptr) {
  PR_CHECK(!pts.empty() && !eik.x.empty(), "sdf_losses_grad: empty batch");
  const std::size_t n = pts.size(), m = eik.x.size();
  if (pos_bar) {
    PR_CHECK(m == 2 * n, "sdf_losses_grad: position cotangents need the 2N eikonal layout");
    PR_CHECK(pos_bar->size() == n, "sdf_losses_grad: pos_bar size mismatch");
  }
  SdfLossValues r;
  for (std::size_t i = 0; i < n; ++i) {
    const CanonicalSample s = canonical_query(net, tape, pts[i]);
    r.l_sdf += sqr(s.sdf);
    const double f_bar = lambda_sdf * 2.0 * s.sdf / double(n);
    const Vec3<double> xb = canonical_query_backward(net, tape, f_bar, {}, grad);
    if (pos_bar) (*pos_bar)[i] += xb;
  }
  r.l_sdf /= double(n);
  for (std::size_t k = 0; k < m; ++k) {
    canonical_query(net, tape, eik.x[k]);
    const Vec3<double> g = canonical_grad(net, tape);
    const double gn = norm(g);
    r.l_eik += sqr(gn - 1.0);
    if (gn > 1e-12) {
      const Vec3<double> g_bar = g * (lambda_eik * 2.0 * (gn - 1.0) / (gn * double(m)));
      const Vec3<double> xb = canonical_grad_backward(net, tape, g_bar, grad);
      if (pos_bar) (*pos_bar)[k % n] += xb;
    }
  }
  r.l_eik /= double(m);
  return r;
}

// Originals first, then one Gaussian-perturbed copy of each.
inline EikonalBatch make_eikonal_batch(const std::vector<Vec3<double>>& pts, double sigma,
                                       Rng& rng) {
  PR_CHECK(sigma > 0.0, "make_eikonal_batch: sigma must be positive");
  EikonalBatch eik;
  eik.x = pts;
  eik.x.reserve(2 * pts.size());
  for (const auto& p : pts)
    eik.x.push_back(p + Vec3<double>{rng.normal(), rng.normal(), rng.normal()} * sigma);
  return eik;
}

inline double eikonal_sigma(const std::vector<Vec3<double>>& pts) {
  return 0.1 * bbox_diag(pts);
}

}  // namespace pointrig
