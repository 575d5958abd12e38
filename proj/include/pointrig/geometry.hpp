// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "pointrig/core.hpp"

namespace pointrig {

// Signed distances to the scene primitives. Exact distances, so min-unions
// stay 1-Lipschitz.
inline double sd_sphere(const Vec3<double>& x, const Vec3<double>& c, double r) {
  return norm(x - c) - r;
}

inline double sd_capsule(const Vec3<double>& x, const Vec3<double>& a, const Vec3<double>& b,
                         double r) {
  const Vec3<double> ab = b - a, ax = x - a;
  double h = dot(ax, ab) / dot(ab, ab);
  h = std::clamp(h, 0.0, 1.0);
  return norm(ax - ab * h) - r;
}

// Torus centered at c with its axis along z.
inline double sd_torus(const Vec3<double>& x, const Vec3<double>& c, double ring_r,
                       double tube_r) {
  const Vec3<double> p = x - c;
  const double q = std::sqrt(p.x * p.x + p.y * p.y) - ring_r;
  return std::sqrt(q * q + p.z * p.z) - tube_r;
}

// Canonical head-and-shoulders layout shared by the rig template and the
// synthetic scenes. Units are scene units; the head ball has radius 0.45.
struct HeadLayout {
  Vec3<double> head_c{0.0, 0.10, 0.0};
  double head_r = 0.45;
  Vec3<double> jaw_c{0.0, -0.28, 0.12};
  double jaw_r = 0.20;
  Vec3<double> sh_a{-0.45, -0.65, 0.0}, sh_b{0.45, -0.65, 0.0};
  double sh_r = 0.24;
  Vec3<double> torus_c{0.0, 0.16, 0.50};
  double torus_ring = 0.17, torus_tube = 0.035;
};

}  // namespace pointrig
