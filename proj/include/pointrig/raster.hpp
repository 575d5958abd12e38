// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pointrig/camera.hpp"
#include "pointrig/core.hpp"

namespace pointrig {

// Screen-space splat opacity. d2 is squared pixel distance to the splat
// center, r the splat radius in pixels.
template <typename S>
inline S splat_alpha(S d2, S r) {
  S a = S(1) - d2 / (r * r);
  return a > S(0) ? a : S(0);
}

template <typename S>
struct Fragment {
  int point = -1;
  S z{};
  S alpha{};
};

// Depth-then-index ordering. Point indices are unique, so the key is a
// strict total order and top-K selection is independent of arrival order.
template <typename S>
inline bool frag_before(const Fragment<S>& a, const Fragment<S>& b) {
  if (a.z != b.z) return a.z < b.z;
  return a.point < b.point;
}

template <typename S>
struct FrameBuffer {
  int width = 0, height = 0, max_frags = 0;
  std::vector<S> color;           // 3 * w * h, row-major rgb
  std::vector<S> mask;            // w * h, sum of alpha * transmittance
  std::vector<Projected<S>> proj; // per point
  std::vector<Fragment<S>> frag;  // max_frags slots per pixel, front-to-back
  std::vector<int> nfrag;         // live slots per pixel
  std::vector<S> point_vis;       // per point, max alpha * T over all pixels

  const Fragment<S>* frags_at(int px) const { return frag.data() + size_t(px) * max_frags; }
  int count_at(int px) const { return nfrag[px]; }
};

// Front-to-back alpha compositing over an opaque background. Fragments must
// arrive sorted by frag_before.
template <typename S>
inline void composite_pixel(const Fragment<S>* frags, int n,
                            const std::vector<Vec3<S>>& colors, const Vec3<S>& bg,
                            Vec3<S>& out_rgb, S& out_mask) {
  for (int i = 1; i < n; ++i)
    PR_CHECK(!frag_before(frags[i], frags[i - 1]), "composite_pixel: fragments not sorted");
  Vec3<S> c{};
  S m = S(0), T = S(1);
  for (int i = 0; i < n; ++i) {
    S w = frags[i].alpha * T;
    c = c + colors[frags[i].point] * w;
    m += w;
    T *= S(1) - frags[i].alpha;
  }
  if (m > S(1)) m = S(1);  // guard accumulated roundoff
  out_rgb = c + bg * (S(1) - m);
  out_mask = m;
}

namespace detail {

// Insert into a per-pixel top-K list kept sorted by frag_before.
template <typename S>
inline void push_fragment(Fragment<S>* slot, int& n, int cap, const Fragment<S>& f) {
  if (n == cap) {
    if (!frag_before(f, slot[n - 1])) return;
    --n;
  }
  int i = n;
  while (i > 0 && frag_before(f, slot[i - 1])) {
    slot[i] = slot[i - 1];
    --i;
  }
  slot[i] = f;
  ++n;
}

}  // namespace detail

// Rasterize an oriented point cloud as screen-space disc splats with
// per-pixel top-K fragment lists, composited front to back. radius is in
// pixels and shared by all points.
template <typename S>
inline void render(const std::vector<Vec3<S>>& positions,
                   const std::vector<Vec3<S>>& colors, S radius,
                   const Camera<S>& cam, const Vec3<S>& bg, int max_frags,
                   FrameBuffer<S>& fb) {
  PR_CHECK(positions.size() == colors.size(), "render: positions/colors size mismatch");
  PR_CHECK(radius > S(0), "render: radius must be positive");
  PR_CHECK(max_frags > 0, "render: max_frags must be positive");
  const int w = cam.width, h = cam.height;
  const size_t npix = size_t(w) * h;
  fb.width = w;
  fb.height = h;
  fb.max_frags = max_frags;
  fb.color.assign(npix * 3, S(0));
  fb.mask.assign(npix, S(0));
  fb.proj.resize(positions.size());
  fb.frag.assign(npix * max_frags, Fragment<S>{});
  fb.nfrag.assign(npix, 0);
  fb.point_vis.assign(positions.size(), S(0));

  const S r2 = radius * radius;

  // Row bins: point indices whose splat footprint touches each pixel row.
  std::vector<int> row_count(h, 0);
  std::vector<int> ylo(positions.size()), yhi(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    fb.proj[i] = project(cam, positions[i]);
    ylo[i] = 1;
    yhi[i] = 0;
    if (!fb.proj[i].ok) continue;
    const S u = fb.proj[i].u, v = fb.proj[i].v;
    if (u + radius < S(0) || u - radius > S(w - 1)) continue;
    int y0 = int(std::ceil(value_of(v - radius)));
    int y1 = int(std::floor(value_of(v + radius)));
    y0 = std::max(y0, 0);
    y1 = std::min(y1, h - 1);
    if (y0 > y1) continue;
    ylo[i] = y0;
    yhi[i] = y1;
    for (int y = y0; y <= y1; ++y) ++row_count[y];
  }
  std::vector<int> row_off(h + 1, 0);
  for (int y = 0; y < h; ++y) row_off[y + 1] = row_off[y] + row_count[y];
  std::vector<int> row_pts(row_off[h]);
  std::vector<int> cursor(row_off.begin(), row_off.end() - 1);
  for (size_t i = 0; i < positions.size(); ++i)
    for (int y = ylo[i]; y <= yhi[i]; ++y) row_pts[cursor[y]++] = int(i);

  for (int y = 0; y < h; ++y) {
    for (int k = row_off[y]; k < row_off[y + 1]; ++k) {
      const int i = row_pts[k];
      const Projected<S>& p = fb.proj[i];
      const S dy = p.v - S(y);
      const S span2 = r2 - dy * dy;
      if (!(span2 > S(0))) continue;
      using std::sqrt;
      const S span = sqrt(span2);
      int x0 = std::max(int(std::ceil(value_of(p.u - span))), 0);
      int x1 = std::min(int(std::floor(value_of(p.u + span))), w - 1);
      for (int x = x0; x <= x1; ++x) {
        const S dx = p.u - S(x);
        const S d2 = dx * dx + dy * dy;
        if (!(d2 < r2)) continue;  // strict: boundary excluded
        Fragment<S> f{i, p.z, S(1) - d2 / r2};
        const size_t px = size_t(y) * w + x;
        detail::push_fragment(fb.frag.data() + px * max_frags, fb.nfrag[px], max_frags, f);
      }
    }
    for (int x = 0; x < w; ++x) {
      const size_t px = size_t(y) * w + x;
      Vec3<S> rgb;
      S m;
      composite_pixel(fb.frag.data() + px * max_frags, fb.nfrag[px], colors, bg, rgb, m);
      fb.color[px * 3 + 0] = rgb.x;
      fb.color[px * 3 + 1] = rgb.y;
      fb.color[px * 3 + 2] = rgb.z;
      fb.mask[px] = m;
      S T = S(1);
      const Fragment<S>* fr = fb.frag.data() + px * max_frags;
      for (int j = 0; j < fb.nfrag[px]; ++j) {
        S vis = fr[j].alpha * T;
        if (vis > fb.point_vis[fr[j].point]) fb.point_vis[fr[j].point] = vis;
        T *= S(1) - fr[j].alpha;
      }
    }
  }
}

// Reverse pass of render. d_color is 3*w*h, d_mask w*h; gradients are
// accumulated into d_positions (world space), d_colors and d_radius.
// Depth ordering and the top-K selection are treated as locally constant;
// points covering no pixel receive no contribution.
template <typename S>
inline void render_backward(const FrameBuffer<S>& fb,
                            const std::vector<Vec3<S>>& positions,
                            const std::vector<Vec3<S>>& colors, S radius,
                            const Camera<S>& cam, const Vec3<S>& bg,
                            const std::vector<S>& d_color, const std::vector<S>& d_mask,
                            std::vector<Vec3<S>>& d_positions,
                            std::vector<Vec3<S>>& d_colors, S& d_radius) {
  PR_CHECK(d_positions.size() == positions.size() && d_colors.size() == colors.size(),
           "render_backward: gradient buffer size mismatch");
  const int w = fb.width, h = fb.height;
  PR_CHECK(d_color.size() == size_t(w) * h * 3 && d_mask.size() == size_t(w) * h,
           "render_backward: cotangent image size mismatch");
  const S r2 = radius * radius;
  std::vector<S> T(fb.max_frags + 1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t px = size_t(y) * w + x;
      const int n = fb.nfrag[px];
      if (n == 0) continue;
      const Fragment<S>* fr = fb.frag.data() + px * fb.max_frags;
      const Vec3<S> cbar{d_color[px * 3 + 0], d_color[px * 3 + 1], d_color[px * 3 + 2]};
      const S mbar = d_mask[px];
      T[0] = S(1);
      for (int i = 0; i < n; ++i) T[i + 1] = T[i] * (S(1) - fr[i].alpha);
      for (int k = 0; k < n; ++k) {
        const int pk = fr[k].point;
        const S wk = fr[k].alpha * T[k];
        d_colors[pk] = d_colors[pk] + cbar * wk;
        // dC/da_k = T_k (c_k - bg) - sum_{i>k} a_i Tt_i (c_i - bg),
        // Tt_i = prod_{j<i, j!=k} (1 - a_j). Division-free, exact at a = 1.
        Vec3<S> dc = (colors[pk] - bg) * T[k];
        S dm = T[k];
        S Tt = T[k];
        for (int i = k + 1; i < n; ++i) {
          const S aT = fr[i].alpha * Tt;
          dc = dc - (colors[fr[i].point] - bg) * aT;
          dm -= aT;
          Tt *= S(1) - fr[i].alpha;
        }
        const S abar = dot(cbar, dc) + mbar * dm;
        if (abar == S(0)) continue;
        // a = 1 - d2/r2
        const Projected<S>& p = fb.proj[pk];
        const S dx = p.u - S(x), dy = p.v - S(y);
        const S d2 = dx * dx + dy * dy;
        const S d2bar = -abar / r2;
        d_radius += abar * S(2) * d2 / (r2 * radius);
        const S ubar = d2bar * S(2) * dx;
        const S vbar = d2bar * S(2) * dy;
        // u = cx + fx X / Z, v = cy + fy Y / Z in camera space
        const S Z = p.cam.z;
        Vec3<S> gc{cam.fx * ubar / Z, cam.fy * vbar / Z,
                   -(cam.fx * p.cam.x * ubar + cam.fy * p.cam.y * vbar) / (Z * Z)};
        d_positions[pk] = d_positions[pk] + mul_transposed(cam.R, gc);
      }
    }
  }
}

}  // namespace pointrig
