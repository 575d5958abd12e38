// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "pointrig/rng.hpp"
#include "pointrig/rotation.hpp"
#include "support/finite_diff.hpp"
#include "support/rotation_reference.hpp"

using namespace pointrig;
using testsupport::central_diff;
using testsupport::grad_close;

namespace {

double max_abs_diff(const Mat3<double>& a, const Mat3<double>& b) {
  double m = 0;
  for (int i = 0; i < 9; ++i) m = std::max(m, std::fabs(a.m[i] - b.m[i]));
  return m;
}

Vec3<double> random_axis_angle(Rng& rng, double max_angle) {
  Vec3<double> d = normalized(Vec3<double>{rng.normal(), rng.normal(), rng.normal()});
  return d * rng.uniform(0.0, max_angle);
}

}  // namespace

TEST(Rodrigues, MatchesQuaternionReference) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec3<double> w = random_axis_angle(rng, 3.1);
    EXPECT_LE(max_abs_diff(rodrigues(w), refrot::axis_angle_to_matrix(w)), 1e-12);
  }
}

TEST(Rodrigues, SmallAngleSeries) {
  Rng rng(12);
  for (double scale : {1e-3, 1e-6, 1e-9, 0.0}) {
    Vec3<double> w = random_axis_angle(rng, 1.0) * scale;
    EXPECT_LE(max_abs_diff(rodrigues(w), refrot::axis_angle_to_matrix(w)), 1e-14);
  }
}

TEST(Rodrigues, ProducesRotations) {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    Mat3<double> r = rodrigues(random_axis_angle(rng, 3.0));
    EXPECT_LE(max_abs_diff(r.transposed() * r, Mat3<double>::identity()), 1e-13);
    EXPECT_NEAR(determinant(r), 1.0, 1e-13);
  }
}

TEST(Rodrigues, VjpMatchesFiniteDifference) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3<double> w = trial == 0 ? Vec3<double>{} : random_axis_angle(rng, 3.0);
    Mat3<double> cot;
    for (int i = 0; i < 9; ++i) cot.m[i] = rng.uniform(-1, 1);
    const Mat3<double> r = rodrigues(w);
    const Vec3<double> got = rodrigues_vjp(w, r, cot);
    for (int c = 0; c < 3; ++c) {
      auto loss = [&]() {
        const Mat3<double> rr = rodrigues(w);
        double acc = 0;
        for (int i = 0; i < 9; ++i) acc += cot.m[i] * rr.m[i];
        return acc;
      };
      const double fd = central_diff(loss, w[c], 1e-7);
      EXPECT_TRUE(grad_close(got[c], fd, 1e-6, 1e-9))
          << "trial " << trial << " comp " << c << " got " << got[c] << " fd " << fd;
    }
  }
}

TEST(PolarRotation, RecoversRotationFactor) {
  Rng rng(15);
  for (int i = 0; i < 40; ++i) {
    const Mat3<double> r = rodrigues(random_axis_angle(rng, 3.0));
    EXPECT_LE(max_abs_diff(polar_rotation(r), r), 1e-12);

    // r times a symmetric positive stretch: polar factor is r again
    Mat3<double> s = Mat3<double>::identity();
    for (int d = 0; d < 3; ++d) s(d, d) = rng.uniform(0.4, 2.0);
    Vec3<double> axis = normalized(Vec3<double>{rng.normal(), rng.normal(), rng.normal()});
    s += outer(axis, axis) * rng.uniform(0.0, 0.5);  // stays SPD
    const Mat3<double> a = r * s;
    EXPECT_LE(max_abs_diff(polar_rotation(a), r), 1e-9);
    EXPECT_LE(max_abs_diff(polar_rotation(a), refrot::polar_reference(a)), 1e-8);
  }
}

TEST(PolarRotation, RejectsDegenerate) {
  Mat3<double> z = Mat3<double>::zero();
  EXPECT_THROW(polar_rotation(z), NormalUndefined);
  Mat3<double> flip = Mat3<double>::identity();
  flip(2, 2) = -1.0;  // negative determinant
  EXPECT_THROW(polar_rotation(flip), NormalUndefined);
}
