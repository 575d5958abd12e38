// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/mlp.hpp"
#include "pointrig/rng.hpp"

namespace pointrig {

constexpr int kShadingOut = 3;

// Plain softplus keeps the emitted shading strictly positive.
inline double softplus1(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

// softplus1(kUnitShadingBias) == 1, so a fresh net starts near unit shading.
inline const double kUnitShadingBias = std::log(std::exp(1.0) - 1.0);

// Shallow relu net on normals; the output rows start small so early shading
// stays near (1,1,1) and color is carried by the albedo.
inline Mlp<double> make_shading_net(std::uint64_t seed,
                                    const std::vector<int>& hidden = {64, 64, 64}) {
  std::vector<int> dims;
  dims.push_back(3);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(kShadingOut);
  auto net = Mlp<double>::create(dims, Act::kRelu, {{"shading", 0, 3}});
  Rng rng(seed);
  init_mlp(net, rng);
  const int last = net.layer_count() - 1;
  const int din = net.dims[last];
  for (int i = 0; i < kShadingOut * din; ++i)
    net.params[net.off_dir[last] + i] = 0.01 * rng.normal();
  for (int r = 0; r < kShadingOut; ++r) net.params[net.off_bias[last] + r] = kUnitShadingBias;
  net.refresh();
  return net;
}

// Shading as a function of the deformed normal alone.
inline Vec3<double> shade(const Mlp<double>& net, MlpTape<double>& tape,
                          const Vec3<double>& n_d) {
  PR_CHECK(net.dims.front() == 3 && net.dims.back() == kShadingOut,
           "shade: net must map 3 -> " << kShadingOut);
  PR_CHECK(std::abs(norm(n_d) - 1.0) <= 1e-4, "shade: normal must be unit length");
  const double in[3] = {n_d.x, n_d.y, n_d.z};
  const double* out = mlp_forward(net, tape, in);
  return {softplus1(out[0]), softplus1(out[1]), softplus1(out[2])};
}

// Reverse pass over the taped shade forward; returns the normal cotangent.
inline Vec3<double> shade_backward(const Mlp<double>& net, MlpTape<double>& tape,
                                   const Vec3<double>& s_bar, double* grad) {
  const double* out = tape.out(net);
  std::array<double, kShadingOut> dout{};
  for (int c = 0; c < 3; ++c) dout[c] = s_bar[c] * sigmoid(out[c]);
  double dx[3] = {0, 0, 0};
  mlp_backward(net, tape, dout.data(), grad, dx);
  return {dx[0], dx[1], dx[2]};
}

inline Vec3<double> compose_color(const Vec3<double>& albedo, const Vec3<double>& s_d) {
  return {albedo.x * s_d.x, albedo.y * s_d.y, albedo.z * s_d.z};
}

struct LightProbe {
  enum class Mode { kLearned, kDiffuse };
  Mode mode = Mode::kLearned;
  Vec3<double> l{0, 0, 1};
  double k_a = 0.0, k_d = 1.0;
};

inline void validate_probe(const LightProbe& probe) {
  if (probe.mode == LightProbe::Mode::kDiffuse) {
    PR_CHECK(std::abs(norm(probe.l) - 1.0) <= 1e-6, "light probe: direction must be unit");
    PR_CHECK(probe.k_a >= 0.0 && probe.k_d >= 0.0,
             "light probe: ambient and diffuse terms must be nonnegative");
  }
}

inline Vec3<double> diffuse_shading(const LightProbe& probe, const Vec3<double>& n) {
  const double s = probe.k_a + probe.k_d * std::max(0.0, dot(n, probe.l));
  return {s, s, s};
}

struct NormalXform {
  enum class Kind { kNone, kFlipX, kRotate };
  Kind kind = Kind::kNone;
  Mat3<double> R = Mat3<double>::identity();
};

inline NormalXform xform_none() { return {}; }
inline NormalXform xform_flip_x() { return {NormalXform::Kind::kFlipX, Mat3<double>::identity()}; }
inline NormalXform xform_rotate(const Mat3<double>& R) {
  const Mat3<double> gram = R.transposed() * R;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      PR_CHECK(std::abs(gram(r, c) - (r == c ? 1.0 : 0.0)) <= 1e-9,
               "normal transform: rotation must be orthonormal");
  return {NormalXform::Kind::kRotate, R};
}

inline Vec3<double> apply_xform(const NormalXform& xf, const Vec3<double>& n) {
  switch (xf.kind) {
    case NormalXform::Kind::kNone:
      return n;
    case NormalXform::Kind::kFlipX:
      return {-n.x, n.y, n.z};
    default:
      return xf.R * n;
  }
}

// Relighting never touches the albedo; only the normals fed to the shading
// model (or the substituted diffuse probe) change.
inline std::vector<Vec3<double>> relight(const Mlp<double>& net, MlpTape<double>& tape,
                                         const std::vector<Vec3<double>>& albedo,
                                         const std::vector<Vec3<double>>& normals,
                                         const LightProbe& probe, const NormalXform& xf) {
  PR_CHECK(albedo.size() == normals.size(), "relight: albedo/normal count mismatch");
  validate_probe(probe);
  std::vector<Vec3<double>> colors(albedo.size());
  for (std::size_t i = 0; i < albedo.size(); ++i) {
    const Vec3<double> n = apply_xform(xf, normals[i]);
    const Vec3<double> s =
        probe.mode == LightProbe::Mode::kLearned ? shade(net, tape, n) : diffuse_shading(probe, n);
    colors[i] = compose_color(albedo[i], s);
  }
  return colors;
}

}  // namespace pointrig
