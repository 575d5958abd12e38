// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pointrig/core.hpp"

namespace pointrig {

template <typename S>
inline Mat3<S> skew(const Vec3<S>& w) {
  Mat3<S> k = Mat3<S>::zero();
  k(0, 1) = -w.z;
  k(0, 2) = w.y;
  k(1, 0) = w.z;
  k(1, 2) = -w.x;
  k(2, 0) = -w.y;
  k(2, 1) = w.x;
  return k;
}

// Axis-angle to rotation matrix. Series fallbacks keep the small-angle
// region smooth.
template <typename S>
inline Mat3<S> rodrigues(const Vec3<S>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const S t2 = dot(w, w);
  S c1, c2;  // sin(t)/t and (1 - cos(t))/t^2
  if (value_of(t2) < 1e-8) {
    c1 = S(1) - t2 / S(6) + t2 * t2 / S(120);
    c2 = S(0.5) - t2 / S(24) + t2 * t2 / S(720);
  } else {
    const S t = sqrt(t2);
    c1 = sin(t) / t;
    c2 = (S(1) - cos(t)) / t2;
  }
  const Mat3<S> k = skew(w);
  return Mat3<S>::identity() + k * c1 + (k * k) * c2;
}

// Gradient of a scalar through R = rodrigues(w): w_bar[i] = <R_bar, dR/dw_i>.
// Rotation gradient in the compact closed form d R / d w_i =
// (w_i [w]x + [w x (I - R) e_i]x) / |w|^2 * R, with the |w| -> 0 limit [e_i]x.
template <typename S>
inline Vec3<S> rodrigues_vjp(const Vec3<S>& w, const Mat3<S>& R, const Mat3<S>& R_bar) {
  const S t2 = dot(w, w);
  Vec3<S> out{};
  if (value_of(t2) < 1e-14) {
    for (int i = 0; i < 3; ++i) {
      Vec3<S> ei{};
      ei[i] = S(1);
      const Mat3<S> dR = skew(ei) * R;
      S acc{};
      for (int k = 0; k < 9; ++k) acc += R_bar.m[k] * dR.m[k];
      out[i] = acc;
    }
    return out;
  }
  const Mat3<S> ImR = Mat3<S>::identity() - R;
  for (int i = 0; i < 3; ++i) {
    Vec3<S> ei{};
    ei[i] = S(1);
    const Vec3<S> v = cross(w, ImR * ei);
    const Mat3<S> dR = (skew(w) * w[i] + skew(v)) * (S(1) / t2) * R;
    S acc{};
    for (int k = 0; k < 9; ++k) acc += R_bar.m[k] * dR.m[k];
    out[i] = acc;
  }
  return out;
}

// Orthogonal polar factor by Higham's Newton iteration X <- (X + X^-T) / 2.
// Requires det(A) > 0; quadratic convergence for well-conditioned input.
template <typename S>
inline Mat3<S> polar_rotation(const Mat3<S>& a) {
  S det = determinant(a);
  if (!(value_of(det) > 1e-8))
    throw NormalUndefined("polar_rotation: non-positive or singular determinant");
  Mat3<S> x = a;
  for (int it = 0; it < 40; ++it) {
    det = determinant(x);
    PR_CHECK(value_of(det) > S(0), "polar_rotation: iteration lost orientation");
    const Mat3<S> xinvt = inverse(x, det).transposed();
    Mat3<S> next;
    S delta{};
    for (int k = 0; k < 9; ++k) {
      next.m[k] = (x.m[k] + xinvt.m[k]) * S(0.5);
      using std::abs;
      const S d = abs(next.m[k] - x.m[k]);
      if (value_of(d) > value_of(delta)) delta = d;
    }
    x = next;
    if (value_of(delta) < 1e-14) break;
  }
  return x;
}

}  // namespace pointrig
