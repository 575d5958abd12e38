// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pointrig/core.hpp"

namespace pointrig {

// Pinhole camera, OpenCV-style axes: x right, y down, z forward (depth).
// R, t map world to camera. Pixel centers sit on integer coordinates.
template <typename S>
struct Camera {
  int width = 0, height = 0;
  S fx{}, fy{}, cx{}, cy{};
  Mat3<S> R = Mat3<S>::identity();
  Vec3<S> t{};
  S z_near = S(1e-3);
};

template <typename S>
struct Projected {
  S u{}, v{}, z{};
  Vec3<S> cam{};  // camera-space position, kept for the backward pass
  bool ok = false;
};

template <typename S>
inline Projected<S> project(const Camera<S>& cam, const Vec3<S>& x_world) {
  Projected<S> p;
  p.cam = cam.R * x_world + cam.t;
  p.z = p.cam.z;
  if (!(p.z > cam.z_near)) return p;  // behind or too close: invalid
  p.u = cam.cx + cam.fx * p.cam.x / p.z;
  p.v = cam.cy + cam.fy * p.cam.y / p.z;
  p.ok = true;
  return p;
}

template <typename S>
inline Vec3<S> unproject(const Camera<S>& cam, S u, S v, S z) {
  Vec3<S> c{(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z};
  return mul_transposed(cam.R, c - cam.t);
}

}  // namespace pointrig
