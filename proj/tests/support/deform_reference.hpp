// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pointrig/deform.hpp"
#include "pointrig/mlp.hpp"
#include "pointrig/rig.hpp"
#include "support/reference_mlp.hpp"
#include "support/rotation_reference.hpp"

// Naive re-implementation of the deformation chain: quaternion rotations,
// explicit 4x4 homogeneous transforms, textbook softmax. No shared kernels
// beyond reading the net's parameter layout.
namespace refdeform {

using pointrig::kDeformOut;
using pointrig::kExpr;
using pointrig::kExprDim;
using pointrig::kJoints;
using pointrig::kOutExpr;
using pointrig::kOutOffset;
using pointrig::kOutPose;
using pointrig::kOutSkin;
using pointrig::kPoseDim;
using pointrig::kPoseFeat;
using pointrig::Mat3;
using pointrig::Vec3;

struct M44 {
  double m[16]{};
  static M44 identity() {
    M44 r;
    r.m[0] = r.m[5] = r.m[10] = r.m[15] = 1;
    return r;
  }
  static M44 rt(const Mat3<double>& R, const Vec3<double>& t) {
    M44 r = identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[4 * i + j] = R(i, j);
    r.m[3] = t.x;
    r.m[7] = t.y;
    r.m[11] = t.z;
    return r;
  }
  M44 operator*(const M44& o) const {
    M44 r;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = 0;
        for (int k = 0; k < 4; ++k) acc += m[4 * i + k] * o.m[4 * k + j];
        r.m[4 * i + j] = acc;
      }
    return r;
  }
  Vec3<double> apply(const Vec3<double>& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3],
            m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
            m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11]};
  }
};

// World and skinning transforms rebuilt from scratch.
inline void ref_frame(const pointrig::MiniRig& rig, const pointrig::PoseExpr& pose,
                      std::array<M44, kJoints>& skin, std::array<double, kPoseFeat>& posefeat) {
  std::array<Vec3<double>, kJoints> joints;
  std::array<Mat3<double>, kJoints> rloc;
  for (int j = 0; j < kJoints; ++j) {
    joints[j] = rig.joint_pos(j, pose.psi.data());
    rloc[j] = refrot::axis_angle_to_matrix(pose.theta[j]);
  }
  std::array<M44, kJoints> world;
  world[0] = M44::rt(rloc[0], joints[0] + pose.t_global);
  for (int j = 1; j < kJoints; ++j)
    world[j] = world[rig.parent[j]] * M44::rt(rloc[j], joints[j] - joints[rig.parent[j]]);
  for (int j = 0; j < kJoints; ++j)
    skin[j] = world[j] * M44::rt(Mat3<double>::identity(), -joints[j]);
  skin[pointrig::kStaticJoint] = M44::identity();
  for (int j = 1; j < kJoints; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        posefeat[(j - 1) * 9 + 3 * r + c] = rloc[j](r, c) - (r == c ? 1.0 : 0.0);
}

inline Vec3<double> ref_deform(const pointrig::Mlp<double>& net, const pointrig::MiniRig& rig,
                               const pointrig::PoseExpr& pose, const Vec3<double>& x_c,
                               pointrig::DeformMode mode) {
  std::vector<double> out = testsupport::ref_mlp_forward(net, {x_c.x, x_c.y, x_c.z});
  std::array<M44, kJoints> skin;
  std::array<double, kPoseFeat> pf;
  ref_frame(rig, pose, skin, pf);

  Vec3<double> x_o = x_c;
  if (mode == pointrig::DeformMode::kTwoStage)
    x_o += Vec3<double>{out[kOutOffset], out[kOutOffset + 1], out[kOutOffset + 2]};
  Vec3<double> x_b = x_o;
  for (int k = 0; k < kExpr; ++k)
    x_b += Vec3<double>{out[kOutExpr + 3 * k], out[kOutExpr + 3 * k + 1],
                        out[kOutExpr + 3 * k + 2]} *
           pose.psi[k];
  for (int m = 0; m < kPoseFeat; ++m)
    x_b += Vec3<double>{out[kOutPose + 3 * m], out[kOutPose + 3 * m + 1],
                        out[kOutPose + 3 * m + 2]} *
           pf[m];
  double w[kJoints], lmax = -1e300, sum = 0;
  for (int j = 0; j < kJoints; ++j) lmax = std::max(lmax, out[kOutSkin + j]);
  for (int j = 0; j < kJoints; ++j) {
    w[j] = std::exp(out[kOutSkin + j] - lmax);
    sum += w[j];
  }
  Vec3<double> x_d{};
  for (int j = 0; j < kJoints; ++j) x_d += skin[j].apply(x_b) * (w[j] / sum);
  return x_d;
}

// Surface normal after an arbitrary smooth map, recovered geometrically: a
// small tangent disc of samples around x is pushed through the map and a
// plane is fit to the images (smallest-eigenvalue direction of the scatter).
template <typename F>
inline Vec3<double> plane_fit_normal(F&& deform_fn, const Vec3<double>& x,
                                     const Vec3<double>& n, double eps, int samples = 16) {
  Vec3<double> t1 = cross(n, Vec3<double>{1, 0, 0});
  if (norm(t1) < 1e-6) t1 = cross(n, Vec3<double>{0, 1, 0});
  t1 = normalized(t1);
  const Vec3<double> t2 = normalized(cross(n, t1));
  std::vector<Vec3<double>> img;
  Vec3<double> centroid{};
  for (int i = 0; i < samples; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / samples;
    const Vec3<double> p = x + (t1 * std::cos(a) + t2 * std::sin(a)) * eps;
    img.push_back(deform_fn(p));
    centroid += img.back();
  }
  centroid *= 1.0 / samples;
  Mat3<double> cov = Mat3<double>::zero();
  for (const auto& q : img) cov += pointrig::outer(q - centroid, q - centroid);
  Vec3<double> lam;
  Mat3<double> v;
  refrot::jacobi_eig3(cov, lam, v);
  int imin = 0;
  for (int i = 1; i < 3; ++i)
    if (lam[i] < lam[imin]) imin = i;
  Vec3<double> fit{v(0, imin), v(1, imin), v(2, imin)};
  // orient to the image of a step along the original normal
  const Vec3<double> ahead = deform_fn(x + n * eps) - deform_fn(x);
  if (dot(fit, ahead) < 0) fit = -fit;
  return normalized(fit);
}

}  // namespace refdeform
