// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "pointrig/adam.hpp"
#include "pointrig/canonical.hpp"
#include "support/finite_diff.hpp"

namespace pointrig {
namespace {

using testsupport::central_diff;
using testsupport::grad_close;

Mlp<double> small_canonical_net(std::uint64_t seed, int width = 16) {
  auto net = Mlp<double>::create({3, width, width, kCanonicalOut}, Act::kSoftplus100,
                                 {{"sdf", 0, 1}, {"albedo", 1, 3}});
  Rng rng(seed);
  init_mlp(net, rng);
  return net;
}

Vec3<double> random_dir(Rng& rng) {
  return normalized(Vec3<double>{rng.normal(), rng.normal(), rng.normal()});
}

TEST(Canonical, GeometricInitStartsOnSphere) {
  auto net = make_canonical_net(11);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(12);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec3<double> d = random_dir(rng);
    const auto on = canonical_query(net, tape, d * 0.5);
    worst = std::max(worst, std::abs(on.sdf));
    EXPECT_LT(std::abs(on.sdf), 0.05);
    EXPECT_GT(canonical_query(net, tape, d * 1.2).sdf, 0.0);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GT(on.albedo[c], 0.3);
      EXPECT_LT(on.albedo[c], 0.7);
    }
  }
  EXPECT_LT(canonical_query(net, tape, Vec3<double>{}).sdf, 0.0);
  std::printf("geometric init: worst |sdf| on the start sphere = %.4f\n", worst);
}

TEST(Canonical, ZeroAlbedoHeadIsMidGray) {
  auto net = small_canonical_net(21, 8);
  const int last = net.layer_count() - 1;
  const int din = net.dims[last];
  for (int r = 1; r < kCanonicalOut; ++r) {
    for (int c = 0; c < din; ++c) net.params[net.off_dir[last] + r * din + c] = 0.0;
    net.params[net.off_bias[last] + r] = 0.0;
  }
  net.refresh();
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(22);
  for (int i = 0; i < 5; ++i) {
    const auto s = canonical_query(net, tape, random_dir(rng));
    for (int c = 0; c < 3; ++c) EXPECT_EQ(s.albedo[c], 0.5);
  }
}

TEST(Canonical, GradMatchesFiniteDifference) {
  auto net = small_canonical_net(31);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(32);
  for (int i = 0; i < 10; ++i) {
    Vec3<double> x = random_dir(rng) * rng.uniform(0.1, 1.5);
    canonical_query(net, tape, x);
    const Vec3<double> g = canonical_grad(net, tape);
    for (int c = 0; c < 3; ++c) {
      const double fd =
          central_diff([&] { return canonical_query(net, tape, x).sdf; }, x[c], 1e-4);
      EXPECT_LE(std::abs(g[c] - fd), 1e-4);
      EXPECT_TRUE(grad_close(g[c], fd, 1e-3, 1e-6)) << "component " << c << ": " << g[c]
                                                     << " vs " << fd;
    }
  }
}

TEST(Canonical, NormalUnitAndInvariantToHeadRescale) {
  auto net = small_canonical_net(41);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(42);
  std::vector<Vec3<double>> xs, n1;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(random_dir(rng) * rng.uniform(0.2, 1.2));
    n1.push_back(canonical_normal(net, tape, xs.back()));
    EXPECT_NEAR(norm(n1.back()), 1.0, 1e-12);
  }
  const int last = net.layer_count() - 1;
  const int din = net.dims[last];
  for (int c = 0; c < din; ++c) net.params[net.off_dir[last] + c] *= 3.7;
  net.params[net.off_bias[last]] *= 3.7;
  net.refresh();
  for (int i = 0; i < 8; ++i)
    EXPECT_LE(norm(canonical_normal(net, tape, xs[i]) - n1[i]), 1e-12);
}

TEST(Canonical, NormalThrowsOnVanishingGradient) {
  auto net = small_canonical_net(51, 8);
  const int last = net.layer_count() - 1;
  const int din = net.dims[last];
  for (int c = 0; c < din; ++c) net.params[net.off_dir[last] + c] = 0.0;
  net.params[net.off_bias[last]] = 0.25;
  net.refresh();
  MlpTape<double> tape;
  tape.bind(net);
  try {
    canonical_normal(net, tape, Vec3<double>{0.3, -0.1, 0.2}, 7);
    FAIL() << "expected NormalUndefined";
  } catch (const NormalUndefined& e) {
    EXPECT_NE(std::string(e.what()).find("point 7"), std::string::npos);
  }
}

TEST(Canonical, AnalyticFieldLossesExact) {
  auto unit_sdf = [](const Vec3<double>& x) { return std::make_pair(norm(x) - 1.0, x / norm(x)); };
  auto double_sdf = [](const Vec3<double>& x) {
    return std::make_pair(2.0 * (norm(x) - 1.0), x / norm(x) * 2.0);
  };
  Rng rng(61);
  std::vector<Vec3<double>> pts;
  EikonalBatch eik;
  for (int i = 0; i < 64; ++i) {
    pts.push_back(random_dir(rng));
    eik.x.push_back(random_dir(rng) * rng.uniform(0.5, 2.0));
  }
  const auto a = sdf_losses(unit_sdf, pts, eik);
  EXPECT_LE(a.l_sdf, 1e-30);
  EXPECT_LE(a.l_eik, 1e-30);
  const auto b = sdf_losses(double_sdf, pts, eik);
  EXPECT_NEAR(b.l_eik, 1.0, 1e-12);
}

TEST(Canonical, LossGradMatchesFiniteDifference) {
  auto net = small_canonical_net(71, 10);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(72);
  const int n = 6;
  std::vector<Vec3<double>> pts;
  for (int i = 0; i < n; ++i) pts.push_back(random_dir(rng) * rng.uniform(0.3, 1.4));
  EikonalBatch eik0 = make_eikonal_batch(pts, 0.2, rng);
  std::vector<Vec3<double>> noise(n);
  for (int i = 0; i < n; ++i) noise[i] = eik0.x[n + i] - pts[i];
  const double ls = 0.7, le = 0.3;

  auto loss = [&]() {
    net.refresh();
    EikonalBatch eik;
    eik.x = pts;
    for (int i = 0; i < n; ++i) eik.x.push_back(pts[i] + noise[i]);
    const auto v = sdf_losses(mlp_sdf_field(net, tape), pts, eik);
    return ls * v.l_sdf + le * v.l_eik;
  };

  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<Vec3<double>> pos_bar(n);
  const auto v = sdf_losses_grad(net, tape, pts, eik0, ls, le, grad.data(), &pos_bar);
  EXPECT_GT(v.l_sdf, 0.0);
  EXPECT_GT(v.l_eik, 0.0);
  for (int p = 0; p < net.param_count(); ++p) {
    const double fd = central_diff([&] { return loss(); }, net.params[p], 1e-6);
    EXPECT_TRUE(grad_close(grad[p], fd, 1e-4, 1e-7))
        << "param " << p << ": " << grad[p] << " vs " << fd;
  }
  net.refresh();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const double fd = central_diff([&] { return loss(); }, pts[i][c], 1e-6);
      EXPECT_TRUE(grad_close(pos_bar[i][c], fd, 1e-4, 1e-7))
          << "point " << i << " axis " << c << ": " << pos_bar[i][c] << " vs " << fd;
    }
}

TEST(Canonical, SphereFitExtrapolatesAndOrientsNormals) {
  // geometric start at radius 0.5, then fit the unit sphere: the zero set
  // has to genuinely move outward
  auto net = make_canonical_net(81, {64, 64}, 0.5);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(82);
  AdamState<double> st;
  st.bind(net.param_count());
  AdamHyper<double> hp;
  hp.lr = 1e-3;
  std::vector<double> grad(net.param_count());
  const int batch = 256;
  for (int step = 0; step < 800; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int i = 0; i < batch; ++i) {
      const double r = 2.5 * rng.uniform();
      const Vec3<double> d = random_dir(rng);
      const Vec3<double> x = d * r;
      const auto s = canonical_query(net, tape, x);
      canonical_query_backward(net, tape, 2.0 * (s.sdf - (r - 1.0)) / batch, {}, grad.data());
      // supervise the gradient field toward the analytic radial direction too
      const Vec3<double> g = canonical_grad(net, tape);
      canonical_grad_backward(net, tape, (g - d) * (8.0 / batch), grad.data());
    }
    adam_step(net.params, grad, st, hp, "canonical");
    net.refresh();
  }
  EXPECT_NEAR(canonical_query(net, tape, Vec3<double>{2, 0, 0}).sdf, 1.0, 0.1);
  const Vec3<double> nrm = canonical_normal(net, tape, Vec3<double>{0, 0, 0.5});
  const double ang = std::acos(std::min(1.0, dot(nrm, Vec3<double>{0, 0, 1}))) * 180.0 / kPi;
  EXPECT_LT(ang, 2.0);
  std::printf("sphere fit: sdf(2,0,0) = %.4f, normal tilt at (0,0,0.5) = %.3f deg\n",
              canonical_query(net, tape, Vec3<double>{2, 0, 0}).sdf, ang);
}

TEST(Canonical, FitRunCrushesSdfLoss) {
  auto net = small_canonical_net(91, 32);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(92);
  std::vector<Vec3<double>> pts;
  for (int i = 0; i < 512; ++i) pts.push_back(random_dir(rng));
  const double sigma = eikonal_sigma(pts);
  AdamState<double> st;
  st.bind(net.param_count());
  AdamHyper<double> hp;
  hp.lr = 1e-3;
  std::vector<double> grad(net.param_count());
  std::vector<double> l_sdf;
  for (int step = 0; step < 200; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    EikonalBatch eik = make_eikonal_batch(pts, sigma, rng);
    const auto v = sdf_losses_grad(net, tape, pts, eik, 1.0, 0.1, grad.data());
    l_sdf.push_back(v.l_sdf);
    adam_step(net.params, grad, st, hp, "canonical");
    net.refresh();
  }
  // decreasing on average: late-window mean far below the starting loss
  double tail = 0;
  for (int i = 180; i < 200; ++i) tail += l_sdf[i] / 20.0;
  EXPECT_LT(l_sdf.back(), 0.1 * l_sdf.front());
  EXPECT_LT(tail, 0.1 * l_sdf.front());
  std::printf("sdf fit: L_sdf %.5f -> %.6f in 200 steps\n", l_sdf.front(), l_sdf.back());
}

TEST(Canonical, EikonalBatchLayout) {
  Rng rng(101);
  std::vector<Vec3<double>> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(random_dir(rng) * rng.uniform(0.5, 1.5));
  Rng ra(7), rb(7), rc(8);
  const EikonalBatch a = make_eikonal_batch(pts, 1e-12, ra);
  ASSERT_EQ(a.x.size(), 10u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(norm(a.x[i] - pts[i]), 0.0);
    EXPECT_LE(norm(a.x[5 + i] - pts[i]), 1e-10);
  }
  const EikonalBatch b = make_eikonal_batch(pts, 1e-12, rb);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(norm(a.x[i] - b.x[i]), 0.0);
  const EikonalBatch c = make_eikonal_batch(pts, 1e-12, rc);
  EXPECT_GT(norm(a.x[5] - c.x[5]), 0.0);
  EXPECT_THROW(make_eikonal_batch(pts, 0.0, ra), std::runtime_error);
}

TEST(Canonical, PerturbationVarianceMatchesSigma) {
  const int n = 10000;
  std::vector<Vec3<double>> pts(n);
  Rng rng(111);
  const double sigma = 0.3;
  const EikonalBatch eik = make_eikonal_batch(pts, sigma, rng);
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const double d = eik.x[n + i][c];
      sum += d;
      sum2 += d * d;
    }
  const double mean = sum / (3 * n);
  const double var = sum2 / (3 * n) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, sigma * sigma, 0.1 * sigma * sigma);
}

TEST(Canonical, AlbedoLipschitzNearby) {
  auto net = make_canonical_net(121);
  MlpTape<double> tape;
  tape.bind(net);
  Rng rng(122);
  for (int i = 0; i < 50; ++i) {
    const Vec3<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec3<double> x2 = x + random_dir(rng) * 1e-4;
    const Vec3<double> da = canonical_query(net, tape, x).albedo -
                            canonical_query(net, tape, x2).albedo;
    for (int c = 0; c < 3; ++c) EXPECT_LT(std::abs(da[c]), 1e-2);
  }
}

TEST(Canonical, CloudValidationRejects) {
  PointCloud empty;
  empty.radius = 0.1;
  EXPECT_THROW(validate_cloud(empty), std::runtime_error);
  PointCloud flat;
  flat.x = {{0, 0, 0}};
  flat.radius = 0.0;
  EXPECT_THROW(validate_cloud(flat), std::runtime_error);
  PointCloud nan_cloud;
  nan_cloud.x = {{0, 0, std::nan("")}};
  nan_cloud.radius = 0.1;
  EXPECT_THROW(validate_cloud(nan_cloud), std::runtime_error);
  PointCloud ok;
  ok.x = {{0, 0, 0}, {1, 2, 2}};
  ok.radius = 0.05;
  validate_cloud(ok);
  EXPECT_EQ(bbox_diag(ok.x), 3.0);
}

}  // namespace
}  // namespace pointrig
