// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/rig.hpp"

namespace pointrig {

struct Metrics {
  double psnr = 0.0;
  double l1 = 0.0;
  double mask_iou = 0.0;
  double chamfer = 0.0;             // symmetric, fraction of the gt bbox diagonal
  double normal_consistency = 0.0;  // mean cosine against the nearest gt normal
};

// PSNR for unit-range images, capped at 99 dB so identical images stay finite.
inline double metric_psnr(const std::vector<double>& a, const std::vector<double>& b) {
  PR_CHECK(a.size() == b.size() && !a.empty(), "psnr: size mismatch or empty input");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

inline double metric_l1(const std::vector<double>& a, const std::vector<double>& b) {
  PR_CHECK(a.size() == b.size() && !a.empty(), "l1 metric: size mismatch or empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// Intersection over union of the >0.5 level sets. Empty union counts as a
// perfect match.
inline double metric_mask_iou(const std::vector<double>& a, const std::vector<double>& b) {
  PR_CHECK(a.size() == b.size() && !a.empty(), "iou: size mismatch or empty input");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] > 0.5, pb = b[i] > 0.5;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

inline void bbox_of(const std::vector<Vec3<double>>& pts, Vec3<double>& lo, Vec3<double>& hi) {
  lo = hi = pts[0];
  for (const auto& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
}

inline double mean_nn_dist(const std::vector<Vec3<double>>& from,
                           const std::vector<Vec3<double>>& to, const VertexGrid& to_grid) {
  double acc = 0.0;
  for (const auto& p : from) acc += norm(to[to_grid.nearest(to, p)] - p);
  return acc / static_cast<double>(from.size());
}

}  // namespace detail

// Symmetric chamfer distance (mean of both directed means), reported as a
// fraction of the gt bounding-box diagonal.
inline double metric_chamfer(const std::vector<Vec3<double>>& pred,
                             const std::vector<Vec3<double>>& gt) {
  PR_CHECK(!pred.empty() && !gt.empty(), "chamfer: empty point set");
  Vec3<double> lo, hi;
  detail::bbox_of(gt, lo, hi);
  const double diag = norm(hi - lo);
  PR_CHECK(diag > 1e-12, "chamfer: degenerate gt bounding box");
  const double cell = diag / 48.0;
  VertexGrid gt_grid, pred_grid;
  gt_grid.build(gt, cell);
  pred_grid.build(pred, cell);
  const double a = detail::mean_nn_dist(pred, gt, gt_grid);
  const double b = detail::mean_nn_dist(gt, pred, pred_grid);
  return 0.5 * (a + b) / diag;
}

// Mean cosine between each predicted normal and the normal of the nearest gt
// sample. Orientation matters; both sides should point outward.
inline double metric_normal_consistency(const std::vector<Vec3<double>>& pred_x,
                                        const std::vector<Vec3<double>>& pred_n,
                                        const std::vector<Vec3<double>>& gt_x,
                                        const std::vector<Vec3<double>>& gt_n) {
  PR_CHECK(pred_x.size() == pred_n.size() && !pred_x.empty(),
           "normal consistency: bad prediction arrays");
  PR_CHECK(gt_x.size() == gt_n.size() && !gt_x.empty(), "normal consistency: bad gt arrays");
  Vec3<double> lo, hi;
  detail::bbox_of(gt_x, lo, hi);
  VertexGrid grid;
  grid.build(gt_x, std::max(1e-6, norm(hi - lo) / 48.0));
  double acc = 0.0;
  for (std::size_t i = 0; i < pred_x.size(); ++i) {
    const int j = grid.nearest(gt_x, pred_x[i]);
    acc += dot(normalized(pred_n[i]), normalized(gt_n[j]));
  }
  return acc / static_cast<double>(pred_x.size());
}

}  // namespace pointrig
