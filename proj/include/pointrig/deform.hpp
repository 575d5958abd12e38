// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "pointrig/core.hpp"
#include "pointrig/dual.hpp"
#include "pointrig/mlp.hpp"
#include "pointrig/rig.hpp"
#include "pointrig/rotation.hpp"

namespace pointrig {

// Per-frame articulation parameters. Axis-angle per joint; the static joint
// must stay at identity, it only anchors unskinned regions.
struct PoseExpr {
  std::array<Vec3<double>, kJoints> theta{};
  Vec3<double> t_global{};
  std::array<double, kExpr> psi{};
};

inline void validate_pose(const PoseExpr& p) {
  for (int j = 0; j < kJoints; ++j)
    PR_CHECK(norm(p.theta[j]) < kPi, "pose: joint rotation magnitude must stay below pi");
  PR_CHECK(norm(p.theta[kStaticJoint]) == 0.0, "pose: static joint must remain at identity");
}

// Forward kinematics products for one frame: world transforms, rest-relative
// skinning transforms and the pose feature vector (local rotations minus
// identity for every non-root joint, flattened row-major).
struct DeformFrame {
  std::array<Vec3<double>, kJoints> joints{};
  std::array<Mat3<double>, kJoints> Rloc{}, Rw{};
  std::array<Vec3<double>, kJoints> tw{};
  std::array<Mat3<double>, kJoints> Rp{};
  std::array<Vec3<double>, kJoints> tp{};
  std::array<double, kPoseFeat> posefeat{};
};

inline DeformFrame compute_frame(const MiniRig& rig, const PoseExpr& pose) {
  validate_pose(pose);
  DeformFrame f;
  for (int j = 0; j < kJoints; ++j) {
    f.joints[j] = rig.joint_pos(j, pose.psi.data());
    f.Rloc[j] = rodrigues(pose.theta[j]);
  }
  f.Rw[0] = f.Rloc[0];
  f.tw[0] = f.joints[0] + pose.t_global;
  for (int j = 1; j < kJoints; ++j) {
    const int p = rig.parent[j];
    f.Rw[j] = f.Rw[p] * f.Rloc[j];
    f.tw[j] = f.Rw[p] * (f.joints[j] - f.joints[p]) + f.tw[p];
  }
  for (int j = 0; j < kJoints; ++j) {
    f.Rp[j] = f.Rw[j];
    f.tp[j] = f.tw[j] - f.Rw[j] * f.joints[j];
  }
  f.Rp[kStaticJoint] = Mat3<double>::identity();
  f.tp[kStaticJoint] = Vec3<double>{};
  for (int j = 1; j < kJoints; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        f.posefeat[(j - 1) * 9 + 3 * r + c] = f.Rloc[j](r, c) - (r == c ? 1.0 : 0.0);
  return f;
}

// Cotangents accumulated over all points of a frame before a single
// kinematics reversal.
struct FrameCot {
  std::array<Mat3<double>, kJoints> Rp{};
  std::array<Vec3<double>, kJoints> tp{};
  std::array<double, kPoseFeat> posefeat{};
  std::array<double, kExpr> psi{};
};

struct PoseGrad {
  std::array<Vec3<double>, kJoints> theta{};
  Vec3<double> t_global{};
  std::array<double, kExpr> psi{};
};

inline PoseGrad frame_backward(const MiniRig& rig, const PoseExpr& pose, const DeformFrame& f,
                               const FrameCot& cot) {
  std::array<Mat3<double>, kJoints> Rw_bar{}, Rloc_bar{};
  std::array<Vec3<double>, kJoints> tw_bar{}, j_bar{};
  // skinning transforms; the static joint's are constants
  for (int j = 0; j < kJoints; ++j) {
    if (j == kStaticJoint) continue;
    Rw_bar[j] += cot.Rp[j];
    Rw_bar[j] += outer(cot.tp[j], f.joints[j]) * -1.0;
    tw_bar[j] += cot.tp[j];
    j_bar[j] -= mul_transposed(f.Rw[j], cot.tp[j]);
  }
  for (int j = 1; j < kJoints; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) Rloc_bar[j](r, c) += cot.posefeat[(j - 1) * 9 + 3 * r + c];
  // kinematic chain, children before parents
  for (int j = kJoints - 1; j >= 1; --j) {
    const int p = rig.parent[j];
    const Vec3<double> d = f.joints[j] - f.joints[p];
    Rw_bar[p] += Rw_bar[j] * f.Rloc[j].transposed();
    Rw_bar[p] += outer(tw_bar[j], d);
    Rloc_bar[j] += f.Rw[p].transposed() * Rw_bar[j];
    const Vec3<double> dbar = mul_transposed(f.Rw[p], tw_bar[j]);
    j_bar[j] += dbar;
    j_bar[p] -= dbar;
    tw_bar[p] += tw_bar[j];
  }
  Rloc_bar[0] += Rw_bar[0];
  j_bar[0] += tw_bar[0];

  PoseGrad g;
  g.t_global = tw_bar[0];
  for (int j = 0; j < kJoints; ++j)
    g.theta[j] = j == kStaticJoint ? Vec3<double>{}
                                   : rodrigues_vjp(pose.theta[j], f.Rloc[j], Rloc_bar[j]);
  for (int k = 0; k < kExpr; ++k) {
    g.psi[k] = cot.psi[k];
    for (int j = 0; j < kJoints; ++j) g.psi[k] += dot(j_bar[j], rig.joint_delta[k][j]);
  }
  return g;
}

// kNoOffset is the ablation that pins the canonical offset head to zero;
// blendshapes and skinning still apply.
enum class DeformMode { kTwoStage, kNoOffset };

struct DeformCounters {
  std::uint64_t net_forward = 0, net_tangent = 0, net_backward = 0, net_backward_dual = 0;
};

namespace detail {

template <typename A>
struct DeformVals {
  Vec3<A> x_o{};  // after the canonical offset (the rig template space)
  Vec3<A> x_b{};  // after blendshape offsets, input to skinning
  Vec3<A> x_d{};
  std::array<A, kJoints> w{};
};

// Canonical offset, blendshape offsets, then linear blend skinning, in any
// scalar type A (plain or dual). `out` is the deformation net output:
// canonical offset, expression bases, pose corrective bases, skinning logits.
template <typename A>
inline DeformVals<A> deform_apply(const DeformFrame& frame, const std::array<double, kExpr>& psi,
                                  const Vec3<A>& x_c, const A* out, DeformMode mode) {
  DeformVals<A> v;
  v.x_o = x_c;
  if (mode == DeformMode::kTwoStage)
    v.x_o += Vec3<A>{out[kOutOffset], out[kOutOffset + 1], out[kOutOffset + 2]};
  v.x_b = v.x_o;
  for (int k = 0; k < kExpr; ++k) {
    const Vec3<A> e{out[kOutExpr + 3 * k], out[kOutExpr + 3 * k + 1], out[kOutExpr + 3 * k + 2]};
    v.x_b += e * A(psi[k]);
  }
  for (int m = 0; m < kPoseFeat; ++m) {
    const Vec3<A> p{out[kOutPose + 3 * m], out[kOutPose + 3 * m + 1], out[kOutPose + 3 * m + 2]};
    v.x_b += p * A(frame.posefeat[m]);
  }
  const A* l = out + kOutSkin;
  A lmax = l[0];
  for (int j = 1; j < kJoints; ++j)
    if (value_of(l[j]) > value_of(lmax)) lmax = l[j];
  using std::exp;
  A sum{};
  for (int j = 0; j < kJoints; ++j) {
    v.w[j] = exp(l[j] - lmax);
    sum += v.w[j];
  }
  for (int j = 0; j < kJoints; ++j) v.w[j] = v.w[j] / sum;
  for (int j = 0; j < kJoints; ++j) {
    const Vec3<A> cj = mat_cast<A>(frame.Rp[j]) * v.x_b + vec_cast<A>(frame.tp[j]);
    v.x_d += cj * v.w[j];
  }
  return v;
}

template <typename A>
struct DeformRev {
  std::array<Mat3<A>, kJoints> Rp{};
  std::array<Vec3<A>, kJoints> tp{};
  std::array<A, kPoseFeat> pf{};
  std::array<A, kExpr> psi{};
  std::array<A, kDeformOut> dout{};
  Vec3<A> x_c{};
};

// Reverse sweep of deform_apply. Runs in plain arithmetic for loss
// cotangents and in single-channel dual arithmetic for the Jacobian
// cotangent (forward tangent b, output cotangent value a: the tangent parts
// of the results are then the gradient of a^T J b).
template <typename A>
inline DeformRev<A> deform_reverse(const DeformFrame& frame, const std::array<double, kExpr>& psi,
                                   const Vec3<A>& x_c, const A* out, DeformMode mode,
                                   const Vec3<A>& xd_bar, const A* expr_bar, const A* pose_bar,
                                   const A* w_bar) {
  DeformRev<A> rev;
  const DeformVals<A> v = deform_apply(frame, psi, x_c, out, mode);

  Vec3<A> xb_bar{};
  std::array<A, kJoints> wbar{};
  for (int j = 0; j < kJoints; ++j) {
    const Mat3<A> Rj = mat_cast<A>(frame.Rp[j]);
    const Vec3<A> cj = Rj * v.x_b + vec_cast<A>(frame.tp[j]);
    wbar[j] = dot(xd_bar, cj);
    if (w_bar) wbar[j] += w_bar[j];
    rev.Rp[j] += outer(xd_bar, v.x_b) * v.w[j];
    rev.tp[j] += xd_bar * v.w[j];
    xb_bar += mul_transposed(Rj, xd_bar) * v.w[j];
  }
  A wdot{};
  for (int j = 0; j < kJoints; ++j) wdot += wbar[j] * v.w[j];
  for (int j = 0; j < kJoints; ++j) rev.dout[kOutSkin + j] = v.w[j] * (wbar[j] - wdot);

  for (int k = 0; k < kExpr; ++k) {
    const Vec3<A> e{out[kOutExpr + 3 * k], out[kOutExpr + 3 * k + 1], out[kOutExpr + 3 * k + 2]};
    rev.psi[k] = dot(xb_bar, e);
    for (int i = 0; i < 3; ++i) rev.dout[kOutExpr + 3 * k + i] += A(psi[k]) * xb_bar[i];
  }
  for (int m = 0; m < kPoseFeat; ++m) {
    const Vec3<A> p{out[kOutPose + 3 * m], out[kOutPose + 3 * m + 1], out[kOutPose + 3 * m + 2]};
    rev.pf[m] = dot(xb_bar, p);
    for (int i = 0; i < 3; ++i)
      rev.dout[kOutPose + 3 * m + i] += A(frame.posefeat[m]) * xb_bar[i];
  }
  // the chain x_c -> x_o -> x_b is additive, so the offset head and the
  // input share the blendshape-stage cotangent
  if (mode == DeformMode::kTwoStage)
    for (int i = 0; i < 3; ++i) rev.dout[kOutOffset + i] += xb_bar[i];
  if (expr_bar)
    for (int f = 0; f < kExprDim; ++f) rev.dout[kOutExpr + f] += expr_bar[f];
  if (pose_bar)
    for (int f = 0; f < kPoseDim; ++f) rev.dout[kOutPose + f] += pose_bar[f];
  rev.x_c = xb_bar;
  return rev;
}

}  // namespace detail

struct DeformResult {
  Vec3<double> x_o{};  // offset-stage location, where regularizer targets live
  Vec3<double> x_d{};
  std::array<double, kJoints> w{};
  Mat3<double> J{};      // d x_d / d x_c, when requested
  Mat3<double> blend{};  // sum_j w_j Rp_j (rotation-only normal mode)
  bool has_jacobian = false;
};

// One deformation-net evaluation per point per frame; position, Jacobian and
// regularizer paths all reuse the taped forward.
inline DeformResult deform_point(const Mlp<double>& net, MlpTape<double>& tape,
                                 const DeformFrame& frame, const std::array<double, kExpr>& psi,
                                 const Vec3<double>& x_c, DeformMode mode, bool want_jacobian,
                                 DeformCounters* ctr = nullptr) {
  PR_CHECK(net.dims.front() == 3 && net.dims.back() == kDeformOut,
           "deform_point: net must map 3 -> " << kDeformOut);
  const double in[3] = {x_c.x, x_c.y, x_c.z};
  const double* out = mlp_forward(net, tape, in);
  if (ctr) ++ctr->net_forward;
  DeformResult res;
  if (want_jacobian) {
    for (int i = 0; i < 3; ++i) {
      double v[3] = {0, 0, 0};
      v[i] = 1;
      mlp_forward_tangent(net, tape, v);
      if (ctr) ++ctr->net_tangent;
    }
    using D3 = Dual<double, 3>;
    const Vec3<D3> xc{D3::seeded(x_c.x, 0), D3::seeded(x_c.y, 1), D3::seeded(x_c.z, 2)};
    std::array<D3, kDeformOut> outd;
    const double* t0 = tape.out_tangent(net, 0);
    const double* t1 = tape.out_tangent(net, 1);
    const double* t2 = tape.out_tangent(net, 2);
    for (int i = 0; i < kDeformOut; ++i) {
      outd[i].v = out[i];
      outd[i].t[0] = t0[i];
      outd[i].t[1] = t1[i];
      outd[i].t[2] = t2[i];
    }
    const auto v = detail::deform_apply(frame, psi, xc, outd.data(), mode);
    res.x_o = {v.x_o.x.v, v.x_o.y.v, v.x_o.z.v};
    res.x_d = {v.x_d.x.v, v.x_d.y.v, v.x_d.z.v};
    for (int j = 0; j < kJoints; ++j) res.w[j] = v.w[j].v;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) res.J(r, c) = v.x_d[r].t[c];
    res.has_jacobian = true;
  } else {
    const auto v = detail::deform_apply(frame, psi, x_c, out, mode);
    res.x_o = v.x_o;
    res.x_d = v.x_d;
    res.w = v.w;
  }
  for (int j = 0; j < kJoints; ++j) res.blend += frame.Rp[j] * res.w[j];
  return res;
}

// Incoming cotangents for one point. a/b encode the Jacobian cotangent
// J_bar = a b^T produced by the normal transport reversal.
struct DeformPointCot {
  Vec3<double> x_d{};
  std::array<double, kExprDim> expr{};
  std::array<double, kPoseDim> pose{};
  std::array<double, kJoints> w{};
  bool has_jcot = false;
  Vec3<double> a{}, b{};
};

// Reverse pass for one point over the taped deform_point forward. Parameter
// gradients accumulate into grad; frame-level cotangents into fcot; returns
// the position cotangent x_c_bar.
inline Vec3<double> deform_point_backward(const Mlp<double>& net, MlpTape<double>& tape,
                                          const DeformFrame& frame,
                                          const std::array<double, kExpr>& psi,
                                          const Vec3<double>& x_c, DeformMode mode,
                                          const DeformPointCot& cot, double* grad, FrameCot& fcot,
                                          DeformCounters* ctr = nullptr) {
  const double* out = tape.out(net);
  const auto rev = detail::deform_reverse<double>(frame, psi, x_c, out, mode, cot.x_d,
                                                  cot.expr.data(), cot.pose.data(), cot.w.data());
  Vec3<double> xc_bar = rev.x_c;
  for (int j = 0; j < kJoints; ++j) {
    fcot.Rp[j] += rev.Rp[j];
    fcot.tp[j] += rev.tp[j];
  }
  for (int m = 0; m < kPoseFeat; ++m) fcot.posefeat[m] += rev.pf[m];
  for (int k = 0; k < kExpr; ++k) fcot.psi[k] += rev.psi[k];
  double dx[3] = {0, 0, 0};
  mlp_backward(net, tape, rev.dout.data(), grad, dx);
  if (ctr) ++ctr->net_backward;
  xc_bar += Vec3<double>{dx[0], dx[1], dx[2]};

  if (cot.has_jcot) {
    PR_CHECK(tape.K == 3, "deform_point_backward: jacobian tangent channels missing");
    using D = Dual<double, 1>;
    const Vec3<D> xc{D::seeded(x_c.x, 0, cot.b.x), D::seeded(x_c.y, 0, cot.b.y),
                     D::seeded(x_c.z, 0, cot.b.z)};
    std::array<D, kDeformOut> outd;
    const double* t0 = tape.out_tangent(net, 0);
    const double* t1 = tape.out_tangent(net, 1);
    const double* t2 = tape.out_tangent(net, 2);
    for (int i = 0; i < kDeformOut; ++i) {
      outd[i].v = out[i];
      outd[i].t[0] = cot.b.x * t0[i] + cot.b.y * t1[i] + cot.b.z * t2[i];
    }
    Vec3<D> xdbar;
    xdbar.x.v = cot.a.x;
    xdbar.y.v = cot.a.y;
    xdbar.z.v = cot.a.z;
    const auto drev = detail::deform_reverse<D>(frame, psi, xc, outd.data(), mode, xdbar,
                                                nullptr, nullptr, nullptr);
    for (int j = 0; j < kJoints; ++j)
      for (int e = 0; e < 9; ++e) {
        fcot.Rp[j].m[e] += drev.Rp[j].m[e].t[0];
        if (e < 3) fcot.tp[j][e] += drev.tp[j][e].t[0];
      }
    for (int m = 0; m < kPoseFeat; ++m) fcot.posefeat[m] += drev.pf[m].t[0];
    for (int k = 0; k < kExpr; ++k) fcot.psi[k] += drev.psi[k].t[0];
    xc_bar += Vec3<double>{drev.x_c.x.t[0], drev.x_c.y.t[0], drev.x_c.z.t[0]};

    std::array<double, kDeformOut> dout_v, dout_t;
    for (int i = 0; i < kDeformOut; ++i) {
      dout_v[i] = drev.dout[i].v;
      dout_t[i] = drev.dout[i].t[0];
    }
    const double mix[3] = {cot.b.x, cot.b.y, cot.b.z};
    double dxt[3] = {0, 0, 0};
    mlp_backward_dual(net, tape, mix, dout_v.data(), dout_t.data(), grad, dxt);
    if (ctr) ++ctr->net_backward_dual;
    xc_bar += Vec3<double>{dxt[0], dxt[1], dxt[2]};
  }
  return xc_bar;
}

// --- normal transport ---

enum class NormalMode { kJacobian, kRotationOnly };

struct TransportCache {
  Mat3<double> Jinv{};
  Vec3<double> m{}, n_d{};
  double mnorm = 0;
};

// Normals move by the inverse-transpose Jacobian of the deformation,
// renormalized.
inline Vec3<double> transport_normal(const Mat3<double>& J, const Vec3<double>& n_c,
                                     TransportCache* cache = nullptr) {
  const double det = determinant(J);
  if (!(std::fabs(det) > 1e-8))
    throw NormalUndefined("transport_normal: deformation jacobian is singular");
  const Mat3<double> Jinv = inverse(J, det);
  const Vec3<double> m = mul_transposed(Jinv, n_c);
  const double mn = norm(m);
  if (!(mn > 1e-12)) throw NormalUndefined("transport_normal: transported normal vanished");
  const Vec3<double> n_d = m / mn;
  if (cache) {
    cache->Jinv = Jinv;
    cache->m = m;
    cache->n_d = n_d;
    cache->mnorm = mn;
  }
  return n_d;
}

// Rigid approximation: rotate by the orthogonal polar factor of the blended
// skinning matrix. Evaluation-only (no reverse pass).
inline Vec3<double> rotate_normal(const Mat3<double>& blend, const Vec3<double>& n_c) {
  return polar_rotation(blend) * n_c;
}

struct TransportCot {
  Vec3<double> a{}, b{};   // J_bar = a b^T
  Vec3<double> n_c{};      // cotangent on the canonical normal
};

inline TransportCot transport_backward(const TransportCache& c, const Vec3<double>& nd_bar) {
  const Vec3<double> m_bar = (nd_bar - c.n_d * dot(c.n_d, nd_bar)) / c.mnorm;
  TransportCot t;
  t.b = c.Jinv * m_bar;
  t.a = -c.m;
  t.n_c = t.b;
  return t;
}

}  // namespace pointrig
