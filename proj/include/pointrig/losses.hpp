// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/deform.hpp"
#include "pointrig/rig.hpp"

namespace pointrig {

struct LossWeights {
  double rgb = 1.0, mask = 1.0, flame = 1.0, pyr = 0.1, sdf = 1.0, eik = 0.1;
  double flame_e = 1000.0, flame_p = 1000.0, flame_w = 1.0;
};

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

namespace detail {

inline double l1_mean(const std::vector<double>& a, const std::vector<double>& b,
                      const char* what) {
  PR_CHECK(a.size() == b.size() && !a.empty(), what << ": shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / double(a.size());
}

inline void l1_mean_backward(const std::vector<double>& a, const std::vector<double>& b,
                             double scale, std::vector<double>& a_bar) {
  PR_CHECK(a_bar.size() == a.size(), "l1 backward: gradient shape mismatch");
  const double k = scale / double(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) a_bar[i] += k * sgn(a[i] - b[i]);
}

}  // namespace detail

inline double loss_rgb(const std::vector<double>& c, const std::vector<double>& c_gt) {
  return detail::l1_mean(c, c_gt, "loss_rgb");
}

inline double loss_mask(const std::vector<double>& m, const std::vector<double>& m_gt) {
  return detail::l1_mean(m, m_gt, "loss_mask");
}

inline void loss_rgb_backward(const std::vector<double>& c, const std::vector<double>& c_gt,
                              double scale, std::vector<double>& c_bar) {
  detail::l1_mean_backward(c, c_gt, scale, c_bar);
}

inline void loss_mask_backward(const std::vector<double>& m, const std::vector<double>& m_gt,
                               double scale, std::vector<double>& m_bar) {
  detail::l1_mean_backward(m, m_gt, scale, m_bar);
}

// 2x2 average pooling over an interleaved-channel image.
inline std::vector<double> avg_pool2(const std::vector<double>& img, int w, int h, int ch) {
  PR_CHECK(w % 2 == 0 && h % 2 == 0, "avg_pool2: dimensions must be even, got " << w << "x" << h);
  PR_CHECK(static_cast<int>(img.size()) == w * h * ch, "avg_pool2: buffer size mismatch");
  const int w2 = w / 2, h2 = h / 2;
  std::vector<double> out(static_cast<std::size_t>(w2) * h2 * ch);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x)
      for (int c = 0; c < ch; ++c) {
        const auto at = [&](int yy, int xx) {
          return img[(static_cast<std::size_t>(yy) * w + xx) * ch + c];
        };
        out[(static_cast<std::size_t>(y) * w2 + x) * ch + c] =
            0.25 * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) +
                    at(2 * y + 1, 2 * x + 1));
      }
  return out;
}

namespace detail {

inline void check_pyramid_shape(int w, int h, int levels) {
  PR_CHECK(levels >= 1, "loss_pyramid: need at least one level");
  PR_CHECK(w >= (1 << levels) && h >= (1 << levels),
           "loss_pyramid: image " << w << "x" << h << " too small for " << levels << " levels");
  const int div = 1 << (levels - 1);
  PR_CHECK(w % div == 0 && h % div == 0,
           "loss_pyramid: " << w << "x" << h << " not divisible by " << div
                            << " for exact pooling");
}

}  // namespace detail

// Multi-scale L1: mean over `levels` pyramid levels (level 0 is the raw
// image), each level a 2x average-pooled copy of the previous one.
inline double loss_pyramid(const std::vector<double>& c, const std::vector<double>& c_gt,
                           int w, int h, int ch, int levels = 4) {
  detail::check_pyramid_shape(w, h, levels);
  PR_CHECK(c.size() == c_gt.size() && static_cast<int>(c.size()) == w * h * ch,
           "loss_pyramid: shape mismatch");
  std::vector<double> a = c, b = c_gt;
  double total = 0;
  int lw = w, lh = h;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      a = avg_pool2(a, lw, lh, ch);
      b = avg_pool2(b, lw, lh, ch);
      lw /= 2;
      lh /= 2;
    }
    total += detail::l1_mean(a, b, "loss_pyramid");
  }
  return total / double(levels);
}

// Accumulates scale * d loss_pyramid / d c into c_bar by unpooling each
// level's L1 sign field back to full resolution.
inline void loss_pyramid_backward(const std::vector<double>& c, const std::vector<double>& c_gt,
                                  int w, int h, int ch, int levels, double scale,
                                  std::vector<double>& c_bar) {
  detail::check_pyramid_shape(w, h, levels);
  PR_CHECK(c_bar.size() == c.size(), "loss_pyramid backward: gradient shape mismatch");
  std::vector<double> a = c, b = c_gt;
  int lw = w, lh = h;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      a = avg_pool2(a, lw, lh, ch);
      b = avg_pool2(b, lw, lh, ch);
      lw /= 2;
      lh /= 2;
    }
    // sign field at this level, scaled, then unpooled: each pooling stage
    // spreads a quarter of the cotangent to each source pixel
    const double k = scale / (double(levels) * double(a.size()));
    std::vector<double> g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = k * sgn(a[i] - b[i]);
    int gw = lw, gh = lh;
    while (gw < w) {
      std::vector<double> up(static_cast<std::size_t>(gw * 2) * (gh * 2) * ch);
      for (int y = 0; y < gh; ++y)
        for (int x = 0; x < gw; ++x)
          for (int cc = 0; cc < ch; ++cc) {
            const double v = 0.25 * g[(static_cast<std::size_t>(y) * gw + x) * ch + cc];
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                up[(static_cast<std::size_t>(2 * y + dy) * (2 * gw) + 2 * x + dx) * ch + cc] = v;
          }
      g.swap(up);
      gw *= 2;
      gh *= 2;
    }
    for (std::size_t i = 0; i < c_bar.size(); ++i) c_bar[i] += g[i];
  }
}

// One point's share of the rig regularizer: plain 2-norm distances between
// the emitted bases/weights and the nearest-template-vertex pseudo targets.
inline double flame_point_loss(const double* expr, const double* pose,
                               const std::array<double, kJoints>& w, const PseudoGt& gt,
                               const LossWeights& lw) {
  double de = 0, dp = 0, dw = 0;
  for (int f = 0; f < kExprDim; ++f) de += sqr(expr[f] - gt.expr[f]);
  for (int f = 0; f < kPoseDim; ++f) dp += sqr(pose[f] - gt.pose[f]);
  for (int j = 0; j < kJoints; ++j) dw += sqr(w[j] - gt.skin[j]);
  return lw.flame_e * std::sqrt(de) + lw.flame_p * std::sqrt(dp) + lw.flame_w * std::sqrt(dw);
}

// Accumulates scale * d flame_point_loss / d {expr,pose,w} into the point's
// deformation cotangent. A zero distance contributes no gradient.
inline void flame_point_backward(const double* expr, const double* pose,
                                 const std::array<double, kJoints>& w, const PseudoGt& gt,
                                 const LossWeights& lw, double scale, DeformPointCot& cot) {
  double de = 0, dp = 0, dw = 0;
  for (int f = 0; f < kExprDim; ++f) de += sqr(expr[f] - gt.expr[f]);
  for (int f = 0; f < kPoseDim; ++f) dp += sqr(pose[f] - gt.pose[f]);
  for (int j = 0; j < kJoints; ++j) dw += sqr(w[j] - gt.skin[j]);
  de = std::sqrt(de);
  dp = std::sqrt(dp);
  dw = std::sqrt(dw);
  if (de > 0)
    for (int f = 0; f < kExprDim; ++f)
      cot.expr[f] += scale * lw.flame_e * (expr[f] - gt.expr[f]) / de;
  if (dp > 0)
    for (int f = 0; f < kPoseDim; ++f)
      cot.pose[f] += scale * lw.flame_p * (pose[f] - gt.pose[f]) / dp;
  if (dw > 0)
    for (int j = 0; j < kJoints; ++j) cot.w[j] += scale * lw.flame_w * (w[j] - gt.skin[j]) / dw;
}

struct LossComponents {
  double rgb = 0, mask = 0, flame = 0, pyr = 0, sdf = 0, eik = 0;
};

inline double total_loss(const LossComponents& c, const LossWeights& w) {
  const struct {
    const char* name;
    double value;
  } parts[] = {{"rgb", c.rgb},     {"mask", c.mask}, {"flame", c.flame},
               {"pyramid", c.pyr}, {"sdf", c.sdf},   {"eikonal", c.eik}};
  for (const auto& p : parts)
    PR_CHECK(std::isfinite(p.value), "total loss: non-finite " << p.name << " component");
  return w.rgb * c.rgb + w.mask * c.mask + w.flame * c.flame + w.pyr * c.pyr + w.sdf * c.sdf +
         w.eik * c.eik;
}

}  // namespace pointrig
