// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pointrig/metrics.hpp"
#include "pointrig/scene.hpp"
#include "support/finite_diff.hpp"

using namespace pointrig;

namespace {

SceneConfig small_cfg() {
  SceneConfig cfg;
  cfg.width = cfg.height = 24;
  cfg.frames = 6;
  cfg.heldout = 2;
  cfg.gt_samples = 2000;
  return cfg;
}

std::string tmp_dir(const char* name) {
  const std::string d = (std::filesystem::temp_directory_path() / name).string();
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(Scene, KindsAndPrimCounts) {
  EXPECT_EQ(scene_prims(parse_scene_kind("sphere")).size(), 1u);
  EXPECT_EQ(scene_prims(parse_scene_kind("sphere_jaw")).size(), 3u);
  EXPECT_EQ(scene_prims(parse_scene_kind("glasses")).size(), 4u);
  EXPECT_THROW(parse_scene_kind("cube"), std::runtime_error);
}

// Stored gt normals must equal the gradient of the canonical signed-distance
// union. Central differences of the union are the independent oracle.
TEST(Scene, GtNormalsMatchSdfGradient) {
  for (const char* kind : {"sphere_jaw", "glasses"}) {
    const std::vector<ScenePrim> ps = scene_prims(parse_scene_kind(kind));
    Rng rng(42);
    const PlyCloud cloud = sample_scene_surface(ps, 600, rng);
    int checked = 0;
    for (std::size_t i = 0; i < cloud.x.size(); ++i) {
      const Vec3<double> x = cloud.x[i];
      EXPECT_LT(std::fabs(canonical_scene_sd(ps, x)), 1e-9);

      // Skip samples close to another primitive: the union kinks there and
      // finite differences would straddle the seam.
      double second = 1e300;
      for (const auto& p : ps) {
        const double s = prim_sd(p, x);
        if (std::fabs(s) > 1e-6) second = std::min(second, std::fabs(s));
      }
      if (second < 1e-3) continue;
      ++checked;

      const double h = 1e-6;
      Vec3<double> g;
      for (int c = 0; c < 3; ++c) {
        Vec3<double> xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        g[c] = (canonical_scene_sd(ps, xp) - canonical_scene_sd(ps, xm)) / (2.0 * h);
      }
      EXPECT_LT(norm(g - cloud.n[i]), 1e-6) << kind << " sample " << i;
    }
    EXPECT_GT(checked, 400) << kind;
  }
}

TEST(Scene, SurfaceSamplesAvoidBuriedRegions) {
  const std::vector<ScenePrim> ps = scene_prims(SceneKind::kSphereJaw);
  Rng rng(7);
  const PlyCloud cloud = sample_scene_surface(ps, 3000, rng);
  ASSERT_EQ(cloud.x.size(), 3000u);
  for (std::size_t i = 0; i < cloud.x.size(); ++i) {
    EXPECT_GT(canonical_scene_sd(ps, cloud.x[i]), -1e-9);
    const Vec3<double> a = scene_albedo(cloud.x[i]);
    EXPECT_EQ(a.x, cloud.rgb[i].x);
    for (double v : {a.x, a.y, a.z}) {
      EXPECT_GT(v, 0.1);
      EXPECT_LT(v, 0.95);
    }
  }
}

TEST(Scene, AlbedoIsMirrorSymmetric) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const Vec3<double> p{rng.normal(), rng.normal(), rng.normal()};
    const Vec3<double> q{-p.x, p.y, p.z};
    EXPECT_EQ(scene_albedo(p).x, scene_albedo(q).x);
    EXPECT_EQ(scene_albedo(p).y, scene_albedo(q).y);
    EXPECT_EQ(scene_albedo(p).z, scene_albedo(q).z);
  }
}

// A frontal view of the bare sphere must produce a filled disc whose area
// matches the analytic perspective silhouette.
TEST(Scene, SphereMaskIsAnalyticDisc) {
  SceneConfig cfg;
  cfg.kind = "sphere";
  cfg.width = cfg.height = 128;
  cfg.look_y = 0.1;  // aim straight at the sphere center
  const std::vector<ScenePrim> ps = scene_prims(SceneKind::kSphere);
  const MiniRig rig = make_mini_rig(cfg.rig_seed);
  const DeformFrame f = compute_frame(rig, PoseExpr{});
  const Camera<double> cam = orbit_camera(cfg, 0.0, 0.0);
  const GtFrame g = render_gt_frame(ps, f, cfg, cam);

  const double d = cfg.cam_dist, r = 0.45;
  const double rho = cam.fx * r / std::sqrt(d * d - r * r);
  double area = 0.0;
  for (double m : g.mask) area += m;
  EXPECT_NEAR(area, kPi * rho * rho, 2.0 * kPi * rho * 0.25);

  // Disc is centered and round: bounding box matches the radius.
  int x0 = cfg.width, x1 = -1, y0 = cfg.height, y1 = -1;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x)
      if (g.mask[static_cast<std::size_t>(y) * cfg.width + x] > 0.5) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  EXPECT_NEAR(0.5 * (x1 - x0), rho, 1.5);
  EXPECT_NEAR(0.5 * (y1 - y0), rho, 1.5);
  EXPECT_NEAR(0.5 * (x0 + x1), cam.cx, 1.0);
  EXPECT_NEAR(0.5 * (y0 + y1), cam.cy, 1.0);

  // Interior pixels carry shaded albedo, background stays black with mask 0.
  const std::size_t center = (static_cast<std::size_t>(cfg.height) / 2) * cfg.width + cfg.width / 2;
  EXPECT_GT(g.color[3 * center], 0.05);
  EXPECT_EQ(g.mask[0], 0.0);
  EXPECT_EQ(g.color[0], 0.0);
}

TEST(Scene, ZeroAmplitudeScriptIsStatic) {
  SceneConfig cfg = small_cfg();
  cfg.neck_deg = 0.0;
  cfg.jaw_deg = 0.0;
  cfg.expr_amp = 0.0;
  for (int k = 0; k < 8; ++k) {
    const PoseExpr p = scene_pose(cfg, k, 8);
    for (int j = 0; j < kJoints; ++j) EXPECT_EQ(norm(p.theta[j]), 0.0);
    EXPECT_EQ(norm(p.t_global), 0.0);
    for (double psi : p.psi) EXPECT_EQ(psi, 0.0);
  }
}

TEST(Scene, PoseScriptStaysValidAndMovesJaw) {
  const SceneConfig cfg;  // full default amplitudes
  double jaw_min = 1e300, jaw_max = -1e300;
  for (int k = 0; k < 220; ++k) {
    const PoseExpr p = scene_pose(cfg, k, 220);
    validate_pose(p);
    EXPECT_EQ(norm(p.theta[kStaticJoint]), 0.0);
    jaw_min = std::min(jaw_min, p.theta[kJawJoint].x);
    jaw_max = std::max(jaw_max, p.theta[kJawJoint].x);
  }
  EXPECT_GE(jaw_min, 0.0);
  EXPECT_GT(jaw_max, 0.3);  // 22 degrees reaches ~0.38 rad
}

TEST(Scene, OrbitCameraLooksAtHead) {
  const SceneConfig cfg;
  for (double az : {0.0, 1.1, kPi, 4.4}) {
    const Camera<double> cam = orbit_camera(cfg, az, 0.07);
    // Rotation is proper and orthonormal.
    const Mat3<double> should_be_eye = cam.R * cam.R.transposed();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        EXPECT_NEAR(should_be_eye(i, j), i == j ? 1.0 : 0.0, 1e-12);
    // The look-at point lands on the optical axis at distance cam_dist.
    const Projected<double> p = project(cam, Vec3<double>{0.0, cfg.look_y, 0.0});
    ASSERT_TRUE(p.ok);
    EXPECT_NEAR(p.u, cam.cx, 1e-9);
    EXPECT_NEAR(p.v, cam.cy, 1e-9);
    EXPECT_NEAR(p.z, cfg.cam_dist, 1e-12);
  }
  // az = 0 is the frontal view from +z with world +x on image right.
  const Camera<double> front = orbit_camera(cfg, 0.0, 0.0);
  const Projected<double> right = project(front, Vec3<double>{0.2, cfg.look_y, 0.0});
  EXPECT_GT(right.u, front.cx);
}

TEST(Scene, GenWritesLoadableDeterministicDataset) {
  const SceneConfig cfg = small_cfg();
  const std::string dir = tmp_dir("pr_scene_a");
  gen_scene(cfg, dir);

  for (const char* f : {"/scene.cfg", "/cameras.json", "/poses.csv", "/gt_points.ply",
                        "/frames/0000.pfm", "/frames/0005.png", "/masks/0005.png",
                        "/heldout/cameras.json", "/heldout/frames/0001.pfm",
                        "/heldout/masks/0001.png"})
    EXPECT_TRUE(std::filesystem::exists(dir + f)) << f;

  const SceneSplit train = load_split(dir);
  const SceneSplit held = load_split(dir, true);
  ASSERT_EQ(train.frames.size(), 6u);
  ASSERT_EQ(held.frames.size(), 2u);
  EXPECT_EQ(train.cfg.width, 24);

  // Frames carry the scripted poses/cameras of their global orbit index and
  // pixel data reproduces an exact re-render.
  const std::vector<ScenePrim> ps = scene_prims(parse_scene_kind(cfg.kind));
  const MiniRig rig = make_mini_rig(cfg.rig_seed);
  const int total = cfg.frames + cfg.heldout;
  std::vector<int> held_idx(total, 0);
  for (int j = 0; j < cfg.heldout; ++j)
    held_idx[static_cast<int>((j + 0.5) * total / cfg.heldout)] = 1;
  int ti = 0, hi = 0;
  for (int k = 0; k < total; ++k) {
    const SceneFrameData& fd = held_idx[k] ? held.frames[hi++] : train.frames[ti++];
    const PoseExpr want = scene_pose(cfg, k, total);
    EXPECT_EQ(fd.pose.theta[kNeckJoint].y, want.theta[kNeckJoint].y);
    EXPECT_EQ(fd.pose.psi[1], want.psi[1]);
    const Camera<double> cam = scene_camera(cfg, k, total);
    EXPECT_EQ(fd.cam.t.z, cam.t.z);
    EXPECT_EQ(fd.cam.R.m[4], cam.R.m[4]);

    const GtFrame g = render_gt_frame(ps, compute_frame(rig, want), cfg, cam);
    double max_err = 0.0;
    for (std::size_t i = 0; i < g.color.size(); ++i)
      max_err = std::max(max_err,
                         std::fabs(static_cast<double>(static_cast<float>(g.color[i])) -
                                   fd.rgb[i]));
    EXPECT_EQ(max_err, 0.0) << "frame " << k;
    for (std::size_t i = 0; i < g.mask.size(); ++i) {
      EXPECT_EQ(g.mask[i], fd.mask[i]);
      EXPECT_TRUE(fd.mask[i] == 0.0 || fd.mask[i] == 1.0);
    }
  }
  EXPECT_EQ(ti, 6);
  EXPECT_EQ(hi, 2);

  // Regenerating under the same config is byte-identical.
  const std::string dir2 = tmp_dir("pr_scene_b");
  gen_scene(cfg, dir2);
  for (const char* f :
       {"/frames/0000.pfm", "/masks/0003.png", "/gt_points.ply", "/poses.csv"})
    EXPECT_EQ(file_hash(dir + f), file_hash(dir2 + f)) << f;

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST(Scene, FlipLightSwapsImageHalves) {
  SceneConfig cfg = small_cfg();
  cfg.width = cfg.height = 48;
  const std::vector<ScenePrim> ps = scene_prims(parse_scene_kind(cfg.kind));
  const MiniRig rig = make_mini_rig(cfg.rig_seed);
  const DeformFrame f = compute_frame(rig, PoseExpr{});
  const Camera<double> cam = orbit_camera(cfg, 0.0, 0.0);
  const GtFrame a = render_gt_frame(ps, f, cfg, cam, false);
  const GtFrame b = render_gt_frame(ps, f, cfg, cam, true);

  auto half_lum = [&](const GtFrame& g, bool right) {
    double acc = 0.0;
    int n = 0;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = right ? cfg.width / 2 : 0; x < (right ? cfg.width : cfg.width / 2); ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
        acc += (g.color[3 * i] + g.color[3 * i + 1] + g.color[3 * i + 2]) / 3.0;
        ++n;
      }
    return acc / n;
  };
  const double al = half_lum(a, false), ar = half_lum(a, true);
  const double bl = half_lum(b, false), br = half_lum(b, true);
  EXPECT_GT(al, ar * 1.05);  // default light favors image left
  EXPECT_NEAR(al, br, 1e-12);  // exact mirror thanks to symmetric geometry/albedo
  EXPECT_NEAR(ar, bl, 1e-12);
}

TEST(Metrics, ImageMetricsHandValues) {
  Rng rng(23);
  std::vector<double> a(300);
  for (double& v : a) v = rng.uniform();
  EXPECT_EQ(metric_psnr(a, a), 99.0);
  EXPECT_EQ(metric_l1(a, a), 0.0);

  std::vector<double> b = a;
  for (double& v : b) v += 0.1;
  EXPECT_NEAR(metric_psnr(a, b), 20.0, 1e-9);
  EXPECT_NEAR(metric_l1(a, b), 0.1, 1e-12);
  EXPECT_THROW(metric_psnr(a, std::vector<double>(5, 0.0)), std::runtime_error);

  const std::vector<double> m1 = {1, 1, 1, 0, 0, 0, 1, 0};
  const std::vector<double> m2 = {1, 1, 0, 1, 0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(metric_mask_iou(m1, m1), 1.0);
  EXPECT_DOUBLE_EQ(metric_mask_iou(m1, m2), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(metric_mask_iou(std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)), 1.0);
}

TEST(Metrics, ChamferAndNormalsAgainstShiftOracle) {
  const std::vector<ScenePrim> ps = scene_prims(SceneKind::kSphereJaw);
  Rng rng(31);
  const PlyCloud gt = sample_scene_surface(ps, 4000, rng);

  EXPECT_EQ(metric_chamfer(gt.x, gt.x), 0.0);
  EXPECT_DOUBLE_EQ(metric_normal_consistency(gt.x, gt.n, gt.x, gt.n), 1.0);

  // Shift every point by s, much smaller than the sample spacing: both
  // directed means approach s.
  const double s = 0.01;
  std::vector<Vec3<double>> shifted = gt.x;
  for (auto& p : shifted) p.x += s;
  Vec3<double> lo{1e300, 1e300, 1e300}, hi = lo * -1.0;
  for (const auto& p : gt.x)
    for (int c = 0; c < 3; ++c) {
      lo[c] = std::min(lo[c], p[c]);
      hi[c] = std::max(hi[c], p[c]);
    }
  const double diag = norm(hi - lo);
  const double ch = metric_chamfer(shifted, gt.x);
  EXPECT_GT(ch * diag, 0.2 * s);
  EXPECT_LE(ch * diag, s * 1.0000001);

  std::vector<Vec3<double>> flipped = gt.n;
  for (auto& n : flipped) n = n * -1.0;
  EXPECT_DOUBLE_EQ(metric_normal_consistency(gt.x, flipped, gt.x, gt.n), -1.0);

  // Dropping whole parts (keep the head ball only) must show up as a large
  // chamfer: this is what catches over-pruned reconstructions.
  std::vector<Vec3<double>> head_only;
  for (const auto& p : gt.x)
    if (prim_sd(ps[0], p) > -1e-9 && std::fabs(prim_sd(ps[0], p)) < 1e-9) head_only.push_back(p);
  ASSERT_GT(head_only.size(), 500u);
  EXPECT_GT(metric_chamfer(head_only, gt.x), 0.02);
}
