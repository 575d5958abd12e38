// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/rng.hpp"

namespace pointrig {

enum class Act { kSoftplus100, kRelu };

constexpr double kSoftplusBeta = 100.0;

template <typename S>
struct ActEval {
  S y;   // act(z)
  S d;   // act'(z)
};

// Stable softplus with beta folded in: (1/b) log(1 + exp(b z)).
template <typename S>
inline ActEval<S> eval_softplus100(S z) {
  const S b = S(kSoftplusBeta);
  S bz = b * z;
  using std::exp;
  using std::log1p;
  S e = exp(bz < S(0) ? bz : -bz);  // exp(-|bz|)
  S lp = log1p(e) / b;
  ActEval<S> r;
  if (bz < S(0)) {
    r.y = lp;
    r.d = e / (S(1) + e);
  } else {
    r.y = z + lp;
    r.d = S(1) / (S(1) + e);
  }
  return r;
}

template <typename S>
inline ActEval<S> eval_relu(S z) {
  return z > S(0) ? ActEval<S>{z, S(1)} : ActEval<S>{S(0), S(0)};
}

// act''(z); zero a.e. for relu.
template <typename S>
inline S act_curvature(Act act, S z, S d) {
  if (act == Act::kRelu) return S(0);
  (void)z;
  const S b = S(kSoftplusBeta);
  return b * d * (S(1) - d);
}

struct OutputSlice {
  std::string name;
  int offset = 0;
  int size = 0;
};

// Fully-connected net. Hidden layers use weight normalization
// (row = gain * dir / |dir|) followed by the activation; the final layer is a
// plain affine map. Parameters live in one flat vector, per layer:
// dir (out*in, row-major), gain (out, weight-normed layers only), bias (out).
// Derived per-row caches must be refreshed after every parameter update.
template <typename S>
struct Mlp {
  using Scalar = S;

  std::vector<int> dims;
  Act act = Act::kSoftplus100;
  std::vector<OutputSlice> slices;
  std::vector<S> params;

  // offsets into params, per layer
  std::vector<int> off_dir, off_gain, off_bias;
  // caches, refreshed by refresh()
  std::vector<S> eff_w;     // effective weights, same per-layer layout as dir
  std::vector<S> inv_norm;  // 1/|dir row|, weight-normed rows only
  std::vector<int> off_w, off_row;

  int layer_count() const { return static_cast<int>(dims.size()) - 1; }
  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  bool weight_normed(int l) const { return l < layer_count() - 1; }

  static Mlp create(std::vector<int> dims_, Act act_,
                    std::vector<OutputSlice> slices_ = {}) {
    PR_CHECK(dims_.size() >= 2, "mlp: need at least one layer");
    Mlp net;
    net.dims = std::move(dims_);
    net.act = act_;
    net.slices = std::move(slices_);
    const int L = net.layer_count();
    int p = 0, w = 0, r = 0;
    for (int l = 0; l < L; ++l) {
      const int in = net.dims[l], out = net.dims[l + 1];
      net.off_dir.push_back(p);
      p += out * in;
      net.off_gain.push_back(net.weight_normed(l) ? p : -1);
      if (net.weight_normed(l)) p += out;
      net.off_bias.push_back(p);
      p += out;
      net.off_w.push_back(w);
      w += out * in;
      net.off_row.push_back(net.weight_normed(l) ? r : -1);
      if (net.weight_normed(l)) r += out;
    }
    net.params.assign(p, S(0));
    net.eff_w.assign(w, S(0));
    net.inv_norm.assign(r, S(0));
    int total = 0;
    for (const auto& s : net.slices) total += s.size;
    PR_CHECK(net.slices.empty() || total == net.out_dim(),
             "mlp: output slices must cover the output exactly");
    return net;
  }

  const OutputSlice& slice(const std::string& name) const {
    for (const auto& s : slices)
      if (s.name == name) return s;
    PR_CHECK(false, "mlp: no output slice named '" << name << "'");
    throw std::logic_error("unreachable");
  }

  int param_count() const { return static_cast<int>(params.size()); }

  void refresh() {
    using std::sqrt;
    const int L = layer_count();
    for (int l = 0; l < L; ++l) {
      const int in = dims[l], out = dims[l + 1];
      const S* dir = params.data() + off_dir[l];
      S* w = eff_w.data() + off_w[l];
      if (!weight_normed(l)) {
        std::memcpy(w, dir, sizeof(S) * static_cast<std::size_t>(out * in));
        continue;
      }
      const S* gain = params.data() + off_gain[l];
      for (int i = 0; i < out; ++i) {
        const S* v = dir + i * in;
        S nsq{};
        for (int j = 0; j < in; ++j) nsq += v[j] * v[j];
        PR_CHECK(nsq > S(0), "mlp: zero direction row");
        S inv = S(1) / sqrt(nsq);
        inv_norm[off_row[l] + i] = inv;
        S s = gain[i] * inv;
        S* wr = w + i * in;
        for (int j = 0; j < in; ++j) wr[j] = s * v[j];
      }
    }
  }
};

// Gaussian fan-in init; gains start at the direction row norms so the
// effective weights equal the sampled directions. Biases zero.
template <typename S>
inline void init_mlp(Mlp<S>& net, Rng& rng) {
  using std::sqrt;
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    const int in = net.dims[l], out = net.dims[l + 1];
    S* dir = net.params.data() + net.off_dir[l];
    const double sigma = std::sqrt(2.0 / in);
    for (int i = 0; i < out * in; ++i) dir[i] = S(sigma * rng.normal());
    if (net.weight_normed(l)) {
      S* gain = net.params.data() + net.off_gain[l];
      for (int i = 0; i < out; ++i) {
        const S* v = dir + i * in;
        S nsq{};
        for (int j = 0; j < in; ++j) nsq += v[j] * v[j];
        gain[i] = sqrt(nsq);
      }
    }
    S* bias = net.params.data() + net.off_bias[l];
    for (int i = 0; i < out; ++i) bias[i] = S(0);
  }
  net.refresh();
}

// Reusable per-point evaluation storage: values, activation derivatives, and
// up to kMaxTangents forward tangent channels. Flat buffers, no per-call
// allocation once sized to a net.
template <typename S>
struct MlpTape {
  static constexpr int kMaxTangents = 4;

  std::vector<int> xo;  // stage offsets: x_0 = input, x_{l+1} = layer output
  std::vector<int> zo;  // per-layer pre-activation offsets
  int xsz = 0, zsz = 0;
  int K = 0;  // tangent channels currently filled

  std::vector<S> x, z, d;  // values + act'(z) per hidden unit
  std::vector<S> xt, zt;   // tangents, channel-major

  // reverse-sweep scratch, sized by bind() so sweeps never allocate
  std::vector<S> cot, cot_t, xdot, zdot;

  void bind(const Mlp<S>& net) {
    xo.clear();
    zo.clear();
    int X = 0, Z = 0;
    const int L = net.layer_count();
    for (int i = 0; i <= L; ++i) {
      xo.push_back(X);
      X += net.dims[i];
    }
    for (int l = 0; l < L; ++l) {
      zo.push_back(Z);
      Z += net.dims[l + 1];
    }
    xsz = X;
    zsz = Z;
    x.assign(static_cast<std::size_t>(X), S(0));
    z.assign(static_cast<std::size_t>(Z), S(0));
    d.assign(static_cast<std::size_t>(Z), S(0));
    xt.assign(static_cast<std::size_t>(kMaxTangents * X), S(0));
    zt.assign(static_cast<std::size_t>(kMaxTangents * Z), S(0));
    cot.assign(static_cast<std::size_t>(X), S(0));
    cot_t.assign(static_cast<std::size_t>(X), S(0));
    xdot.assign(static_cast<std::size_t>(X), S(0));
    zdot.assign(static_cast<std::size_t>(Z), S(0));
    K = 0;
  }

  const S* out(const Mlp<S>& net) const {
    return x.data() + xo[net.layer_count()];
  }
  const S* out_tangent(const Mlp<S>& net, int k) const {
    return xt.data() + k * xsz + xo[net.layer_count()];
  }
};

template <typename S>
inline const S* mlp_forward(const Mlp<S>& net, MlpTape<S>& tape, const S* in) {
  const int L = net.layer_count();
  tape.K = 0;
  std::memcpy(tape.x.data(), in, sizeof(S) * static_cast<std::size_t>(net.dims[0]));
  for (int l = 0; l < L; ++l) {
    const int in_n = net.dims[l], out_n = net.dims[l + 1];
    const S* xin = tape.x.data() + tape.xo[l];
    const S* w = net.eff_w.data() + net.off_w[l];
    const S* b = net.params.data() + net.off_bias[l];
    S* zz = tape.z.data() + tape.zo[l];
    S* xout = tape.x.data() + tape.xo[l + 1];
    for (int i = 0; i < out_n; ++i) {
      const S* wr = w + i * in_n;
      S acc = b[i];
      for (int j = 0; j < in_n; ++j) acc += wr[j] * xin[j];
      zz[i] = acc;
    }
    if (l < L - 1) {
      S* dd = tape.d.data() + tape.zo[l];
      if (net.act == Act::kSoftplus100) {
        for (int i = 0; i < out_n; ++i) {
          auto a = eval_softplus100(zz[i]);
          xout[i] = a.y;
          dd[i] = a.d;
        }
      } else {
        for (int i = 0; i < out_n; ++i) {
          auto a = eval_relu(zz[i]);
          xout[i] = a.y;
          dd[i] = a.d;
        }
      }
    } else {
      std::memcpy(xout, zz, sizeof(S) * static_cast<std::size_t>(out_n));
    }
  }
  return tape.out(net);
}

// Pushes one tangent channel through a taped forward pass; returns the output
// tangent. Channel index = previous tape.K.
template <typename S>
inline const S* mlp_forward_tangent(const Mlp<S>& net, MlpTape<S>& tape,
                                    const S* vin) {
  PR_CHECK(tape.K < MlpTape<S>::kMaxTangents, "mlp: tangent channels exhausted");
  const int k = tape.K++;
  const int L = net.layer_count();
  S* xt = tape.xt.data() + k * tape.xsz;
  S* zt = tape.zt.data() + k * tape.zsz;
  std::memcpy(xt, vin, sizeof(S) * static_cast<std::size_t>(net.dims[0]));
  for (int l = 0; l < L; ++l) {
    const int in_n = net.dims[l], out_n = net.dims[l + 1];
    const S* xin = xt + tape.xo[l];
    const S* w = net.eff_w.data() + net.off_w[l];
    S* zz = zt + tape.zo[l];
    S* xout = xt + tape.xo[l + 1];
    for (int i = 0; i < out_n; ++i) {
      const S* wr = w + i * in_n;
      S acc{};
      for (int j = 0; j < in_n; ++j) acc += wr[j] * xin[j];
      zz[i] = acc;
    }
    if (l < L - 1) {
      const S* dd = tape.d.data() + tape.zo[l];
      for (int i = 0; i < out_n; ++i) xout[i] = dd[i] * zz[i];
    } else {
      std::memcpy(xout, zz, sizeof(S) * static_cast<std::size_t>(out_n));
    }
  }
  return xt + tape.xo[L];
}

// Reverse sweep over a taped forward. Parameter gradients accumulate into
// grad (flat, aligned with net.params); input cotangent accumulates into dx
// when non-null.
template <typename S>
inline void mlp_backward(const Mlp<S>& net, MlpTape<S>& tape, const S* dout,
                         S* grad, S* dx) {
  const int L = net.layer_count();
  std::vector<S>& cot = tape.cot;  // cotangent on stage outputs
  std::memcpy(cot.data() + tape.xo[L], dout,
              sizeof(S) * static_cast<std::size_t>(net.dims[L]));
  for (int l = L - 1; l >= 0; --l) {
    const int in_n = net.dims[l], out_n = net.dims[l + 1];
    const S* xin = tape.x.data() + tape.xo[l];
    S* u = cot.data() + tape.xo[l + 1];
    if (l < L - 1) {
      const S* dd = tape.d.data() + tape.zo[l];
      for (int i = 0; i < out_n; ++i) u[i] *= dd[i];
    }
    const S* w = net.eff_w.data() + net.off_w[l];
    S* gb = grad + net.off_bias[l];
    S* gdir = grad + net.off_dir[l];
    S* cprev = cot.data() + tape.xo[l];
    std::memset(cprev, 0, sizeof(S) * static_cast<std::size_t>(in_n));
    if (net.weight_normed(l)) {
      const S* dir = net.params.data() + net.off_dir[l];
      const S* gain = net.params.data() + net.off_gain[l];
      const S* inv = net.inv_norm.data() + net.off_row[l];
      S* ggain = grad + net.off_gain[l];
      for (int i = 0; i < out_n; ++i) {
        const S ui = u[i];
        gb[i] += ui;
        const S* v = dir + i * in_n;
        const S* wr = w + i * in_n;
        S* gv = gdir + i * in_n;
        S dot_xv{};
        for (int j = 0; j < in_n; ++j) dot_xv += xin[j] * v[j];
        const S s = gain[i] * inv[i];
        ggain[i] += ui * dot_xv * inv[i];
        const S c1 = s * ui;
        const S c2 = c1 * dot_xv * inv[i] * inv[i];
        for (int j = 0; j < in_n; ++j) {
          gv[j] += c1 * xin[j] - c2 * v[j];
          cprev[j] += wr[j] * ui;
        }
      }
    } else {
      for (int i = 0; i < out_n; ++i) {
        const S ui = u[i];
        gb[i] += ui;
        const S* wr = w + i * in_n;
        S* gv = gdir + i * in_n;
        for (int j = 0; j < in_n; ++j) {
          gv[j] += ui * xin[j];
          cprev[j] += wr[j] * ui;
        }
      }
    }
  }
  if (dx)
    for (int j = 0; j < net.dims[0]; ++j) dx[j] += cot[j];
}

// Reverse-over-forward: directional derivative of the reverse sweep along the
// input direction sum_k mix[k] * tangent_channel_k. dout_t may be null (zero
// cotangent tangent). Only tangent parts are accumulated: grad_t gets
// d/d eps of the parameter gradients, dx_t the input-cotangent tangent. The
// value parts of this sweep belong to <dout_v, y>, which is an internal
// adjoint quantity, never a loss, so they are discarded.
template <typename S>
inline void mlp_backward_dual(const Mlp<S>& net, MlpTape<S>& tape,
                              const S* mix, const S* dout_v, const S* dout_t,
                              S* grad_t, S* dx_t) {
  const int L = net.layer_count();
  const int K = tape.K;
  std::vector<S>& cot = tape.cot;
  std::vector<S>& cot_t = tape.cot_t;
  std::memcpy(cot.data() + tape.xo[L], dout_v,
              sizeof(S) * static_cast<std::size_t>(net.dims[L]));
  if (dout_t)
    std::memcpy(cot_t.data() + tape.xo[L], dout_t,
                sizeof(S) * static_cast<std::size_t>(net.dims[L]));
  else
    std::memset(cot_t.data() + tape.xo[L], 0,
                sizeof(S) * static_cast<std::size_t>(net.dims[L]));
  // synthesized input-side tangents of every stage value
  std::vector<S>& xdot_buf = tape.xdot;
  for (int i = 0; i < tape.xsz; ++i) {
    S acc{};
    for (int k = 0; k < K; ++k) acc += mix[k] * tape.xt[k * tape.xsz + i];
    xdot_buf[i] = acc;
  }
  std::vector<S>& zdot_buf = tape.zdot;
  for (int i = 0; i < tape.zsz; ++i) {
    S acc{};
    for (int k = 0; k < K; ++k) acc += mix[k] * tape.zt[k * tape.zsz + i];
    zdot_buf[i] = acc;
  }
  for (int l = L - 1; l >= 0; --l) {
    const int in_n = net.dims[l], out_n = net.dims[l + 1];
    const S* xin = tape.x.data() + tape.xo[l];
    const S* xdot = xdot_buf.data() + tape.xo[l];
    S* u = cot.data() + tape.xo[l + 1];
    S* ut = cot_t.data() + tape.xo[l + 1];
    if (l < L - 1) {
      const S* dd = tape.d.data() + tape.zo[l];
      const S* zz = tape.z.data() + tape.zo[l];
      const S* zdot = zdot_buf.data() + tape.zo[l];
      for (int i = 0; i < out_n; ++i) {
        const S ddot = act_curvature(net.act, zz[i], dd[i]) * zdot[i];
        ut[i] = ut[i] * dd[i] + u[i] * ddot;
        u[i] *= dd[i];
      }
    }
    const S* w = net.eff_w.data() + net.off_w[l];
    S* gb_t = grad_t + net.off_bias[l];
    S* gdir_t = grad_t + net.off_dir[l];
    S* cprev = cot.data() + tape.xo[l];
    S* cprev_t = cot_t.data() + tape.xo[l];
    std::memset(cprev, 0, sizeof(S) * static_cast<std::size_t>(in_n));
    std::memset(cprev_t, 0, sizeof(S) * static_cast<std::size_t>(in_n));
    if (net.weight_normed(l)) {
      const S* dir = net.params.data() + net.off_dir[l];
      const S* gain = net.params.data() + net.off_gain[l];
      const S* inv = net.inv_norm.data() + net.off_row[l];
      S* ggain_t = grad_t + net.off_gain[l];
      for (int i = 0; i < out_n; ++i) {
        const S ui = u[i], uti = ut[i];
        gb_t[i] += uti;
        const S* v = dir + i * in_n;
        const S* wr = w + i * in_n;
        S* gv_t = gdir_t + i * in_n;
        S dot_xv{}, dot_xv_t{};
        for (int j = 0; j < in_n; ++j) {
          dot_xv += xin[j] * v[j];
          dot_xv_t += xdot[j] * v[j];
        }
        const S s = gain[i] * inv[i];
        ggain_t[i] += (uti * dot_xv + ui * dot_xv_t) * inv[i];
        const S c1 = s * ui;
        const S c1t = s * uti;
        const S inv2 = inv[i] * inv[i];
        const S c2t = (c1t * dot_xv + c1 * dot_xv_t) * inv2;
        for (int j = 0; j < in_n; ++j) {
          gv_t[j] += c1t * xin[j] + c1 * xdot[j] - c2t * v[j];
          cprev[j] += wr[j] * ui;
          cprev_t[j] += wr[j] * uti;
        }
      }
    } else {
      for (int i = 0; i < out_n; ++i) {
        const S ui = u[i], uti = ut[i];
        gb_t[i] += uti;
        const S* wr = w + i * in_n;
        S* gv_t = gdir_t + i * in_n;
        for (int j = 0; j < in_n; ++j) {
          gv_t[j] += uti * xin[j] + ui * xdot[j];
          cprev[j] += wr[j] * ui;
          cprev_t[j] += wr[j] * uti;
        }
      }
    }
  }
  if (dx_t)
    for (int j = 0; j < net.dims[0]; ++j) dx_t[j] += cot_t[j];
}

}  // namespace pointrig
