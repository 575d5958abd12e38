// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "pointrig/core.hpp"
#include "pointrig/geometry.hpp"
#include "pointrig/rng.hpp"

namespace pointrig {

inline constexpr int kJoints = 4;
inline constexpr int kExpr = 10;
inline constexpr int kPoseFeat = 9 * (kJoints - 1);  // 27
inline constexpr int kExprDim = 3 * kExpr;           // 30
inline constexpr int kPoseDim = 3 * kPoseFeat;       // 81
// deformation net output layout: canonical offset, expression bases, pose
// corrective bases, skinning logits
inline constexpr int kOutOffset = 0;
inline constexpr int kOutExpr = 3;
inline constexpr int kOutPose = kOutExpr + kExprDim;      // 33
inline constexpr int kOutSkin = kOutPose + kPoseDim;      // 114
inline constexpr int kDeformOut = kOutSkin + kJoints;     // 118
inline constexpr int kRootJoint = 0;
inline constexpr int kNeckJoint = 1;
inline constexpr int kJawJoint = 2;
inline constexpr int kStaticJoint = 3;

// Low-frequency plane-wave series; the analytic generators behind the rig's
// blendshape and corrective fields.
struct TrigField {
  struct Wave {
    Vec3<double> dir;
    double freq = 0, phase = 0, amp = 0;
  };
  std::vector<Wave> waves;

  double eval(const Vec3<double>& x) const {
    double s = 0;
    for (const Wave& w : waves) s += w.amp * std::sin(w.freq * dot(w.dir, x) + w.phase);
    return s;
  }
  Vec3<double> grad(const Vec3<double>& x) const {
    Vec3<double> g{};
    for (const Wave& w : waves)
      g += w.dir * (w.amp * w.freq * std::cos(w.freq * dot(w.dir, x) + w.phase));
    return g;
  }
};

// Four-joint articulated head rig: root, neck, jaw (child of neck) and a
// static shoulder anchor whose skinning transform is pinned to identity.
// Blendshape bases and skinning weights are smooth analytic fields; the
// template vertices carry their sampled values for nearest-vertex lookups.
struct MiniRig {
  std::array<int, kJoints> parent{-1, 0, 1, 0};
  std::array<Vec3<double>, kJoints> rest_joint;
  std::array<std::array<Vec3<double>, kJoints>, kExpr> joint_delta;

  // distance-softmax skinning field
  std::array<Vec3<double>, kJoints> skin_center;
  std::array<double, kJoints> skin_sigma;
  std::array<double, kJoints> skin_bias;

  std::array<TrigField, kExprDim> expr_field;
  std::array<TrigField, kPoseDim> pose_field;

  std::vector<Vec3<double>> verts;
  std::vector<int> region;  // 0 head, 1 jaw, 2 shoulder
  std::vector<double> vert_expr;  // n * kExprDim
  std::vector<double> vert_pose;  // n * kPoseDim
  std::vector<double> vert_skin;  // n * kJoints

  Vec3<double> joint_pos(int j, const double* psi) const {
    Vec3<double> p = rest_joint[j];
    for (int k = 0; k < kExpr; ++k) p += joint_delta[k][j] * psi[k];
    return p;
  }

  void expr_at(const Vec3<double>& x, double* out) const {
    for (int f = 0; f < kExprDim; ++f) out[f] = expr_field[f].eval(x);
  }
  void pose_at(const Vec3<double>& x, double* out) const {
    for (int f = 0; f < kPoseDim; ++f) out[f] = pose_field[f].eval(x);
  }
  void skin_at(const Vec3<double>& x, double* w) const {
    double l[kJoints], lmax = -1e300;
    for (int j = 0; j < kJoints; ++j) {
      const Vec3<double> d = x - skin_center[j];
      l[j] = skin_bias[j] - dot(d, d) / (skin_sigma[j] * skin_sigma[j]);
      lmax = std::max(lmax, l[j]);
    }
    double sum = 0;
    for (int j = 0; j < kJoints; ++j) {
      w[j] = std::exp(l[j] - lmax);
      sum += w[j];
    }
    for (int j = 0; j < kJoints; ++j) w[j] /= sum;
  }
};

namespace detail {

inline TrigField make_field(Rng& rng, double amp_lo, double amp_hi, double freq_lo,
                            double freq_hi) {
  TrigField f;
  for (int h = 0; h < 3; ++h) {
    TrigField::Wave w;
    w.dir = normalized(Vec3<double>{rng.normal(), rng.normal(), rng.normal()});
    w.freq = rng.uniform(freq_lo, freq_hi);
    w.phase = rng.uniform(0.0, 6.283185307179586);
    w.amp = rng.uniform(amp_lo, amp_hi) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    f.waves.push_back(w);
  }
  return f;
}

inline Vec3<double> sphere_dir(Rng& rng) {
  return normalized(Vec3<double>{rng.normal(), rng.normal(), rng.normal()});
}

}  // namespace detail

inline MiniRig make_mini_rig(std::uint64_t seed) {
  MiniRig rig;
  rig.rest_joint = {Vec3<double>{0, -0.50, 0}, Vec3<double>{0, -0.42, 0.02},
                    Vec3<double>{0, -0.16, 0.04}, Vec3<double>{0, -0.70, 0}};
  rig.skin_center = {Vec3<double>{0, 0.10, 0}, Vec3<double>{0, 0.12, -0.02},
                     Vec3<double>{0, -0.30, 0.16}, Vec3<double>{0, -0.78, 0}};
  rig.skin_sigma = {0.8, 0.5, 0.25, 0.45};
  rig.skin_bias = {-4.0, 0.0, 1.0, 1.0};

  Rng frng(split_seed(seed, 0));
  for (int f = 0; f < kExprDim; ++f)
    rig.expr_field[f] = detail::make_field(frng, 0.004, 0.012, 0.5, 2.5);
  for (int f = 0; f < kPoseDim; ++f)
    rig.pose_field[f] = detail::make_field(frng, 0.0008, 0.002, 0.5, 2.0);

  Rng jrng(split_seed(seed, 2));
  for (int k = 0; k < kExpr; ++k) {
    for (int j = 0; j < kJoints; ++j) rig.joint_delta[k][j] = Vec3<double>{};
    rig.joint_delta[k][kNeckJoint] = detail::sphere_dir(jrng) * jrng.uniform(0.005, 0.015);
    rig.joint_delta[k][kJawJoint] = detail::sphere_dir(jrng) * jrng.uniform(0.01, 0.02);
  }

  // Template samples on the union surface: per-primitive surface draws,
  // rejecting points buried inside another primitive.
  const HeadLayout lay;
  Rng vrng(split_seed(seed, 1));
  auto keep_push = [&](const Vec3<double>& x, int reg, double own_guard) {
    if (own_guard < 1e-9) return;  // inside some other primitive
    rig.verts.push_back(x);
    rig.region.push_back(reg);
  };
  for (int i = 0; i < 800; ++i) {
    Vec3<double> x = lay.head_c + detail::sphere_dir(vrng) * lay.head_r;
    double other = std::min(sd_sphere(x, lay.jaw_c, lay.jaw_r),
                            sd_capsule(x, lay.sh_a, lay.sh_b, lay.sh_r));
    keep_push(x, 0, other);
  }
  for (int i = 0; i < 340; ++i) {
    Vec3<double> x = lay.jaw_c + detail::sphere_dir(vrng) * lay.jaw_r;
    double other = std::min(sd_sphere(x, lay.head_c, lay.head_r),
                            sd_capsule(x, lay.sh_a, lay.sh_b, lay.sh_r));
    keep_push(x, 1, other);
  }
  for (int i = 0; i < 460; ++i) {
    // capsule surface: pick tube or a cap by area
    const Vec3<double> ab = lay.sh_b - lay.sh_a;
    const double len = norm(ab);
    const Vec3<double> u = ab / len;
    const double area_tube = 6.283185307179586 * lay.sh_r * len;
    const double area_caps = 4.0 * 3.141592653589793 * sqr(lay.sh_r);
    Vec3<double> x;
    if (vrng.uniform() * (area_tube + area_caps) < area_tube) {
      const double t = vrng.uniform();
      Vec3<double> d = detail::sphere_dir(vrng);
      d = normalized(d - u * dot(d, u));
      x = lay.sh_a + ab * t + d * lay.sh_r;
    } else {
      Vec3<double> d = detail::sphere_dir(vrng);
      const bool at_b = vrng.uniform() < 0.5;
      const Vec3<double> out = at_b ? u : -u;
      if (dot(d, out) < 0) d = -d;
      x = (at_b ? lay.sh_b : lay.sh_a) + d * lay.sh_r;
    }
    double other = std::min(sd_sphere(x, lay.head_c, lay.head_r),
                            sd_sphere(x, lay.jaw_c, lay.jaw_r));
    keep_push(x, 2, other);
  }

  const size_t n = rig.verts.size();
  rig.vert_expr.resize(n * kExprDim);
  rig.vert_pose.resize(n * kPoseDim);
  rig.vert_skin.resize(n * kJoints);
  for (size_t v = 0; v < n; ++v) {
    rig.expr_at(rig.verts[v], rig.vert_expr.data() + v * kExprDim);
    rig.pose_at(rig.verts[v], rig.vert_pose.data() + v * kPoseDim);
    rig.skin_at(rig.verts[v], rig.vert_skin.data() + v * kJoints);
  }
  return rig;
}

// Uniform-grid nearest template vertex. Exact: candidate cells are pruned by
// their true minimum distance, ties resolve to the lowest vertex index.
struct VertexGrid {
  Vec3<double> lo{};
  double cell = 0;
  int nx = 0, ny = 0, nz = 0;
  std::vector<int> offs, items;  // CSR cell -> vertex indices

  void build(const std::vector<Vec3<double>>& verts, double cell_size) {
    PR_CHECK(!verts.empty(), "VertexGrid: no vertices");
    cell = cell_size;
    Vec3<double> hi = verts[0];
    lo = verts[0];
    for (const auto& v : verts)
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], v[c]);
        hi[c] = std::max(hi[c], v[c]);
      }
    lo -= Vec3<double>{cell, cell, cell} * 0.5;
    nx = int((hi.x - lo.x) / cell) + 2;
    ny = int((hi.y - lo.y) / cell) + 2;
    nz = int((hi.z - lo.z) / cell) + 2;
    std::vector<int> count(size_t(nx) * ny * nz, 0);
    auto cell_of = [&](const Vec3<double>& v) {
      int ix = int((v.x - lo.x) / cell), iy = int((v.y - lo.y) / cell), iz = int((v.z - lo.z) / cell);
      return (size_t(iz) * ny + iy) * nx + ix;
    };
    for (const auto& v : verts) ++count[cell_of(v)];
    offs.assign(count.size() + 1, 0);
    for (size_t i = 0; i < count.size(); ++i) offs[i + 1] = offs[i] + count[i];
    items.resize(verts.size());
    std::vector<int> cur(offs.begin(), offs.end() - 1);
    for (size_t i = 0; i < verts.size(); ++i) items[cur[cell_of(verts[i])]++] = int(i);
  }

  int nearest(const std::vector<Vec3<double>>& verts, const Vec3<double>& q) const {
    const int qx = int(std::floor((q.x - lo.x) / cell));
    const int qy = int(std::floor((q.y - lo.y) / cell));
    const int qz = int(std::floor((q.z - lo.z) / cell));
    double best_d2 = 1e300;
    int best = -1;
    const int rmax = std::max({nx, ny, nz}) + 1;
    for (int ring = 0; ring <= rmax; ++ring) {
      // Cheapest possible distance to any unvisited cell in this ring.
      if (best >= 0) {
        const double ring_min = (ring - 1) * cell;
        if (ring_min > 0 && ring_min * ring_min > best_d2) break;
      }
      for (int iz = qz - ring; iz <= qz + ring; ++iz) {
        if (iz < 0 || iz >= nz) continue;
        for (int iy = qy - ring; iy <= qy + ring; ++iy) {
          if (iy < 0 || iy >= ny) continue;
          for (int ix = qx - ring; ix <= qx + ring; ++ix) {
            if (ix < 0 || ix >= nx) continue;
            const int lvl =
                std::max({std::abs(ix - qx), std::abs(iy - qy), std::abs(iz - qz)});
            if (lvl != ring) continue;  // shell only
            // exact min distance from q to this cell's box
            double md2 = 0;
            const double cl[3] = {lo.x + ix * cell, lo.y + iy * cell, lo.z + iz * cell};
            const double qv[3] = {q.x, q.y, q.z};
            for (int c = 0; c < 3; ++c) {
              double d = 0;
              if (qv[c] < cl[c]) d = cl[c] - qv[c];
              else if (qv[c] > cl[c] + cell) d = qv[c] - (cl[c] + cell);
              md2 += d * d;
            }
            if (md2 > best_d2) continue;
            const size_t ci = (size_t(iz) * ny + iy) * nx + ix;
            for (int s = offs[ci]; s < offs[ci + 1]; ++s) {
              const int vi = items[s];
              const Vec3<double> d = verts[vi] - q;
              const double d2 = dot(d, d);
              if (d2 < best_d2 || (d2 == best_d2 && vi < best)) {
                best_d2 = d2;
                best = vi;
              }
            }
          }
        }
      }
    }
    PR_CHECK(best >= 0, "VertexGrid: empty query result");
    return best;
  }
};

// Regularization targets: field values stored at the nearest template vertex.
// Piecewise constant in the query point by construction.
struct PseudoGt {
  int vertex = -1;
  const double* expr = nullptr;  // kExprDim
  const double* pose = nullptr;  // kPoseDim
  const double* skin = nullptr;  // kJoints
};

inline PseudoGt rig_pseudo_gt(const MiniRig& rig, const VertexGrid& grid,
                              const Vec3<double>& x) {
  PseudoGt g;
  g.vertex = grid.nearest(rig.verts, x);
  g.expr = rig.vert_expr.data() + size_t(g.vertex) * kExprDim;
  g.pose = rig.vert_pose.data() + size_t(g.vertex) * kPoseDim;
  g.skin = rig.vert_skin.data() + size_t(g.vertex) * kJoints;
  return g;
}

// --- JSON serialization (exact: doubles survive the round trip) ---

inline nlohmann::json rig_to_json(const MiniRig& rig) {
  nlohmann::json j;
  auto vec = [](const Vec3<double>& v) { return nlohmann::json::array({v.x, v.y, v.z}); };
  auto field = [&](const TrigField& f) {
    nlohmann::json waves = nlohmann::json::array();
    for (const auto& w : f.waves)
      waves.push_back({{"dir", vec(w.dir)}, {"freq", w.freq}, {"phase", w.phase}, {"amp", w.amp}});
    return waves;
  };
  j["parent"] = rig.parent;
  for (int i = 0; i < kJoints; ++i) {
    j["rest_joint"].push_back(vec(rig.rest_joint[i]));
    j["skin_center"].push_back(vec(rig.skin_center[i]));
  }
  j["skin_sigma"] = rig.skin_sigma;
  j["skin_bias"] = rig.skin_bias;
  for (int k = 0; k < kExpr; ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < kJoints; ++i) row.push_back(vec(rig.joint_delta[k][i]));
    j["joint_delta"].push_back(row);
  }
  for (const auto& f : rig.expr_field) j["expr_field"].push_back(field(f));
  for (const auto& f : rig.pose_field) j["pose_field"].push_back(field(f));
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : rig.verts) {
    verts.push_back(v.x);
    verts.push_back(v.y);
    verts.push_back(v.z);
  }
  j["verts"] = std::move(verts);
  j["region"] = rig.region;
  j["vert_expr"] = rig.vert_expr;
  j["vert_pose"] = rig.vert_pose;
  j["vert_skin"] = rig.vert_skin;
  return j;
}

inline MiniRig rig_from_json(const nlohmann::json& j) {
  MiniRig rig;
  auto vec = [](const nlohmann::json& a) {
    return Vec3<double>{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  };
  auto field = [&](const nlohmann::json& waves) {
    TrigField f;
    for (const auto& w : waves) {
      TrigField::Wave wave;
      wave.dir = vec(w.at("dir"));
      wave.freq = w.at("freq").get<double>();
      wave.phase = w.at("phase").get<double>();
      wave.amp = w.at("amp").get<double>();
      f.waves.push_back(wave);
    }
    return f;
  };
  for (int i = 0; i < kJoints; ++i) {
    rig.parent[i] = j.at("parent").at(i).get<int>();
    rig.rest_joint[i] = vec(j.at("rest_joint").at(i));
    rig.skin_center[i] = vec(j.at("skin_center").at(i));
    rig.skin_sigma[i] = j.at("skin_sigma").at(i).get<double>();
    rig.skin_bias[i] = j.at("skin_bias").at(i).get<double>();
  }
  for (int k = 0; k < kExpr; ++k)
    for (int i = 0; i < kJoints; ++i) rig.joint_delta[k][i] = vec(j.at("joint_delta").at(k).at(i));
  for (int f = 0; f < kExprDim; ++f) rig.expr_field[f] = field(j.at("expr_field").at(f));
  for (int f = 0; f < kPoseDim; ++f) rig.pose_field[f] = field(j.at("pose_field").at(f));
  const auto& vj = j.at("verts");
  PR_CHECK(vj.size() % 3 == 0, "rig_from_json: bad vertex array");
  for (size_t i = 0; i + 2 < vj.size(); i += 3)
    rig.verts.push_back({vj.at(i).get<double>(), vj.at(i + 1).get<double>(), vj.at(i + 2).get<double>()});
  rig.region = j.at("region").get<std::vector<int>>();
  rig.vert_expr = j.at("vert_expr").get<std::vector<double>>();
  rig.vert_pose = j.at("vert_pose").get<std::vector<double>>();
  rig.vert_skin = j.at("vert_skin").get<std::vector<double>>();
  const size_t n = rig.verts.size();
  PR_CHECK(rig.region.size() == n && rig.vert_expr.size() == n * kExprDim &&
               rig.vert_pose.size() == n * kPoseDim && rig.vert_skin.size() == n * kJoints,
           "rig_from_json: inconsistent template arrays");
  return rig;
}

}  // namespace pointrig
