// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "pointrig/dual.hpp"

using pointrig::Dual;

namespace {

// f(a, b) = a*b + sin(a)/b - sqrt(a + 2b)
template <typename T>
T fn(T a, T b) {
  using std::sin;
  using std::sqrt;
  using pointrig::sin;
  using pointrig::sqrt;
  return a * b + sin(a) / b - sqrt(a + T(2) * b);
}

}  // namespace

TEST(Dual, MatchesFiniteDifference) {
  const double a = 0.8, b = 1.7, h = 1e-7;
  Dual<double, 2> da = Dual<double, 2>::seeded(a, 0);
  Dual<double, 2> db = Dual<double, 2>::seeded(b, 1);
  auto r = fn(da, db);
  EXPECT_NEAR(r.v, fn(a, b), 1e-14);
  double fda = (fn(a + h, b) - fn(a - h, b)) / (2 * h);
  double fdb = (fn(a, b + h) - fn(a, b - h)) / (2 * h);
  EXPECT_NEAR(r.t[0], fda, 1e-6);
  EXPECT_NEAR(r.t[1], fdb, 1e-6);
}

TEST(Dual, ChainThroughExpLog) {
  using D = Dual<double, 1>;
  D x = D::seeded(0.6, 0);
  D y = pointrig::log(pointrig::exp(x) + D(1.0));
  double s = 1.0 / (1.0 + std::exp(-0.6));
  EXPECT_NEAR(y.v, std::log(std::exp(0.6) + 1.0), 1e-14);
  EXPECT_NEAR(y.t[0], s, 1e-12);
}

TEST(Dual, MaxAbsPickByValue) {
  using D = Dual<double, 1>;
  D a = D::seeded(2.0, 0, 1.0);
  D b = D::seeded(3.0, 0, -1.0);
  auto m = pointrig::max(a, b);
  EXPECT_EQ(m.v, 3.0);
  EXPECT_EQ(m.t[0], -1.0);
  auto ab = pointrig::abs(D::seeded(-2.0, 0, 1.0));
  EXPECT_EQ(ab.v, 2.0);
  EXPECT_EQ(ab.t[0], -1.0);
}

TEST(Dual, MixedScalarOps) {
  using D = Dual<double, 1>;
  D x = D::seeded(1.5, 0);
  D y = 2.0 * x + 1.0 - x / 2.0;
  EXPECT_NEAR(y.v, 2.0 * 1.5 + 1.0 - 0.75, 1e-15);
  EXPECT_NEAR(y.t[0], 1.5, 1e-15);
}
