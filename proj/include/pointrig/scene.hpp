// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "pointrig/camera.hpp"
#include "pointrig/config.hpp"
#include "pointrig/core.hpp"
#include "pointrig/deform.hpp"
#include "pointrig/geometry.hpp"
#include "pointrig/image.hpp"
#include "pointrig/ply.hpp"
#include "pointrig/rig.hpp"
#include "pointrig/rng.hpp"
#include "pointrig/serialize.hpp"

#include <nlohmann/json.hpp>

namespace pointrig {

// Synthetic scenes are unions of rigid primitives, each welded to one rig
// joint. Ground truth comes from per-pixel ray casts against this union, so
// images, masks and surface samples are exact up to the marcher tolerance.
enum class SceneKind { kSphere, kSphereJaw, kGlasses };

inline SceneKind parse_scene_kind(const std::string& s) {
  if (s == "sphere") return SceneKind::kSphere;
  if (s == "sphere_jaw") return SceneKind::kSphereJaw;
  if (s == "glasses") return SceneKind::kGlasses;
  PR_CHECK(false, "unknown scene kind '" << s << "'");
}

enum class PrimShape { kSphere, kCapsule, kTorus };

// One rigid primitive in canonical space, welded to joint `joint`.
struct ScenePrim {
  PrimShape shape = PrimShape::kSphere;
  int joint = kRootJoint;
  Vec3<double> a{};  // sphere center / capsule end / torus center
  Vec3<double> b{};  // capsule other end
  double r = 0.0;    // sphere or capsule radius, torus ring radius
  double r2 = 0.0;   // torus tube radius
};

inline std::vector<ScenePrim> scene_prims(SceneKind kind, const HeadLayout& hl = {}) {
  std::vector<ScenePrim> ps;
  ps.push_back({PrimShape::kSphere, kNeckJoint, hl.head_c, {}, hl.head_r, 0.0});
  if (kind == SceneKind::kSphere) return ps;
  ps.push_back({PrimShape::kSphere, kJawJoint, hl.jaw_c, {}, hl.jaw_r, 0.0});
  ps.push_back({PrimShape::kCapsule, kStaticJoint, hl.sh_a, hl.sh_b, hl.sh_r, 0.0});
  if (kind == SceneKind::kGlasses)
    ps.push_back({PrimShape::kTorus, kNeckJoint, hl.torus_c, {}, hl.torus_ring, hl.torus_tube});
  return ps;
}

inline double prim_sd(const ScenePrim& p, const Vec3<double>& x) {
  switch (p.shape) {
    case PrimShape::kSphere: return sd_sphere(x, p.a, p.r);
    case PrimShape::kCapsule: return sd_capsule(x, p.a, p.b, p.r);
    default: return sd_torus(x, p.a, p.r, p.r2);
  }
}

// Outward unit normal of the primitive's level set through x.
inline Vec3<double> prim_normal(const ScenePrim& p, const Vec3<double>& x) {
  switch (p.shape) {
    case PrimShape::kSphere: return normalized(x - p.a);
    case PrimShape::kCapsule: {
      const Vec3<double> ab = p.b - p.a, ax = x - p.a;
      const double h = std::clamp(dot(ax, ab) / dot(ab, ab), 0.0, 1.0);
      return normalized(ax - ab * h);
    }
    default: {
      const Vec3<double> q = x - p.a;
      const double rho = std::sqrt(q.x * q.x + q.y * q.y);
      PR_CHECK(rho > 1e-12, "torus normal undefined on the axis");
      const double d = (rho - p.r) / rho;
      return normalized(Vec3<double>{q.x * d, q.y * d, q.z});
    }
  }
}

// Min-union over primitives in canonical pose. Exact distances in, exact
// distance out, so the field stays 1-Lipschitz.
inline double canonical_scene_sd(const std::vector<ScenePrim>& ps, const Vec3<double>& x,
                                 int* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double s = prim_sd(ps[i], x);
    if (s < best) {
      best = s;
      if (which) *which = static_cast<int>(i);
    }
  }
  return best;
}

// Same union with every primitive rigidly moved by its joint's posed
// transform x_world = Rp x_canon + tp.
inline double posed_scene_sd(const std::vector<ScenePrim>& ps, const DeformFrame& f,
                             const Vec3<double>& y, int* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const int j = ps[i].joint;
    const Vec3<double> x = mul_transposed(f.Rp[j], y - f.tp[j]);
    const double s = prim_sd(ps[i], x);
    if (s < best) {
      best = s;
      if (which) *which = static_cast<int>(i);
    }
  }
  return best;
}

// Smooth analytic albedo over canonical space. Mirror-symmetric in x so a
// light flip swaps the shading of the two image halves without an albedo
// confound.
inline Vec3<double> scene_albedo(const Vec3<double>& p) {
  const double ax = std::fabs(p.x);
  return {0.55 + 0.30 * std::sin(2.3 * ax + 1.6 * p.y - 0.8 * p.z + 0.4),
          0.50 + 0.28 * std::sin(1.9 * p.y + 1.2 * p.z + 2.1 - 1.4 * ax),
          0.52 + 0.30 * std::sin(2.6 * ax - 1.1 * p.y + 1.7 * p.z + 4.0)};
}

namespace detail {

inline double prim_area(const ScenePrim& p) {
  switch (p.shape) {
    case PrimShape::kSphere: return 4.0 * kPi * p.r * p.r;
    case PrimShape::kCapsule: return 2.0 * kPi * p.r * norm(p.b - p.a) + 4.0 * kPi * p.r * p.r;
    default: return 4.0 * kPi * kPi * p.r * p.r2;
  }
}

inline Vec3<double> uniform_dir(Rng& rng) {
  for (;;) {
    Vec3<double> v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const double n2 = dot(v, v);
    if (n2 > 1e-6 && n2 <= 1.0) return v / std::sqrt(n2);
  }
}

// Uniform area sample of one primitive's surface; returns position and
// outward normal in canonical space.
inline void sample_prim(const ScenePrim& p, Rng& rng, Vec3<double>& x, Vec3<double>& n) {
  switch (p.shape) {
    case PrimShape::kSphere: {
      n = uniform_dir(rng);
      x = p.a + n * p.r;
      return;
    }
    case PrimShape::kCapsule: {
      const Vec3<double> ab = p.b - p.a;
      const double len = norm(ab);
      const Vec3<double> axis = ab / len;
      const double tube = 2.0 * kPi * p.r * len, caps = 4.0 * kPi * p.r * p.r;
      if (rng.uniform() * (tube + caps) < caps) {
        Vec3<double> d = uniform_dir(rng);
        const double s = dot(d, axis);
        x = (s >= 0.0 ? p.b : p.a) + d * p.r;
        n = d;
      } else {
        Vec3<double> u{-axis.y, axis.x, 0.0};
        if (norm(u) < 1e-6) u = {1.0, 0.0, 0.0};
        u = normalized(u);
        const Vec3<double> v = cross(axis, u);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        n = u * std::cos(phi) + v * std::sin(phi);
        x = p.a + ab * rng.uniform() + n * p.r;
      }
      return;
    }
    default: {
      // Accept-reject in the tube angle to account for the area element.
      for (;;) {
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        if (rng.uniform() * (p.r + p.r2) > p.r + p.r2 * std::cos(phi)) continue;
        const double th = rng.uniform(0.0, 2.0 * kPi);
        const double rho = p.r + p.r2 * std::cos(phi);
        x = p.a + Vec3<double>{rho * std::cos(th), rho * std::sin(th), p.r2 * std::sin(phi)};
        n = {std::cos(phi) * std::cos(th), std::cos(phi) * std::sin(th), std::sin(phi)};
        return;
      }
    }
  }
}

}  // namespace detail

// Uniform samples of the visible union surface: area-weighted primitive
// choice, rejecting samples buried inside another primitive. Colors hold the
// albedo, not the shaded color.
inline PlyCloud sample_scene_surface(const std::vector<ScenePrim>& ps, int count, Rng& rng) {
  std::vector<double> cum(ps.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) cum[i] = (total += detail::prim_area(ps[i]));
  PlyCloud out;
  out.x.reserve(count);
  while (static_cast<int>(out.x.size()) < count) {
    const double u = rng.uniform() * total;
    std::size_t pick = 0;
    while (pick + 1 < ps.size() && u > cum[pick]) ++pick;
    Vec3<double> x, n;
    detail::sample_prim(ps[pick], rng, x, n);
    bool buried = false;
    for (std::size_t i = 0; i < ps.size() && !buried; ++i)
      if (i != pick && prim_sd(ps[i], x) < 1e-9) buried = true;
    if (buried) continue;
    out.x.push_back(x);
    out.n.push_back(n);
    out.rgb.push_back(scene_albedo(x));
  }
  return out;
}

// Scripted pose for global frame k of n: a neck sway, a jaw open-close cycle
// and two expression channels. The static joint stays untouched.
inline PoseExpr scene_pose(const SceneConfig& cfg, int k, int n) {
  const double phi = 2.0 * kPi * k / n;
  const double a_neck = cfg.neck_deg * kPi / 180.0;
  const double a_jaw = cfg.jaw_deg * kPi / 180.0;
  PoseExpr pose;
  pose.theta[kNeckJoint] = {0.3 * a_neck * std::sin(2.0 * phi + 0.7), a_neck * std::sin(phi), 0.0};
  pose.theta[kJawJoint] = {0.5 * a_jaw * (1.0 - std::cos(2.0 * phi + 0.9)), 0.0, 0.0};
  pose.psi[0] = cfg.expr_amp * std::sin(2.0 * phi + 0.3);
  pose.psi[1] = cfg.expr_amp * std::sin(3.0 * phi + 1.9);
  return pose;
}

// Look-at camera on an orbit around the head. az = 0 is the frontal view
// from +z; el > 0 raises the camera.
inline Camera<double> orbit_camera(const SceneConfig& cfg, double az, double el) {
  Camera<double> cam;
  cam.width = cfg.width;
  cam.height = cfg.height;
  cam.fx = cam.fy = cfg.cam_fov_scale * cfg.width;
  cam.cx = 0.5 * (cfg.width - 1);
  cam.cy = 0.5 * (cfg.height - 1);
  const Vec3<double> look{0.0, cfg.look_y, 0.0};
  const Vec3<double> pos =
      look + Vec3<double>{std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el)} *
                 cfg.cam_dist;
  const Vec3<double> z = normalized(look - pos);
  Vec3<double> x = cross(z, Vec3<double>{0.0, 1.0, 0.0});
  PR_CHECK(norm(x) > 1e-6, "camera looking straight along the up axis");
  x = normalized(x);
  const Vec3<double> y = cross(z, x);
  for (int c = 0; c < 3; ++c) {
    cam.R(0, c) = (c == 0 ? x.x : c == 1 ? x.y : x.z);
    cam.R(1, c) = (c == 0 ? y.x : c == 1 ? y.y : y.z);
    cam.R(2, c) = (c == 0 ? z.x : c == 1 ? z.y : z.z);
  }
  cam.t = (cam.R * pos) * -1.0;
  return cam;
}

// Orbit azimuth and a slow elevation wobble for global frame k of n.
inline void scene_azel(int k, int n, double& az, double& el) {
  const double phi = 2.0 * kPi * k / n;
  az = phi;
  el = 0.12 * std::sin(3.0 * phi + 0.5);
}

inline Camera<double> scene_camera(const SceneConfig& cfg, int k, int n) {
  double az, el;
  scene_azel(k, n, az, el);
  return orbit_camera(cfg, az, el);
}

struct GtFrame {
  std::vector<double> color;  // w*h*3, interleaved, linear
  std::vector<double> mask;   // w*h in {0,1}
};

inline double lambert_shade(const SceneConfig& cfg, const Vec3<double>& n,
                            const Vec3<double>& light_dir) {
  return cfg.k_ambient + cfg.k_diffuse * std::max(0.0, dot(n, light_dir));
}

// Exact ground-truth render: sphere-trace the posed union per pixel, shade
// the hit with the canonical albedo and a Lambertian term under a fixed
// world-space light.
inline GtFrame render_gt_frame(const std::vector<ScenePrim>& ps, const DeformFrame& f,
                               const SceneConfig& cfg, const Camera<double>& cam,
                               bool flip_light = false) {
  GtFrame out;
  out.color.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0.0);
  out.mask.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
  Vec3<double> light = normalized(cfg.light);
  if (flip_light) light.x = -light.x;
  const Vec3<double> origin = mul_transposed(cam.R, cam.t) * -1.0;
  const double t_max = cfg.cam_dist + 2.0;
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      const Vec3<double> dir = normalized(mul_transposed(
          cam.R, Vec3<double>{(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0}));
      double t = 0.0;
      int which = -1;
      bool hit = false;
      for (int step = 0; step < 512 && t < t_max; ++step) {
        const double s = posed_scene_sd(ps, f, origin + dir * t, &which);
        if (s < 1e-7) {
          hit = true;
          break;
        }
        t += s;
      }
      if (!hit) continue;
      const Vec3<double> y = origin + dir * t;
      const int j = ps[which].joint;
      const Vec3<double> x_c = mul_transposed(f.Rp[j], y - f.tp[j]);
      const Vec3<double> n = f.Rp[j] * prim_normal(ps[which], x_c);
      const Vec3<double> alb = scene_albedo(x_c);
      const double s = lambert_shade(cfg, n, light);
      const std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
      out.color[3 * pix + 0] = alb.x * s;
      out.color[3 * pix + 1] = alb.y * s;
      out.color[3 * pix + 2] = alb.z * s;
      out.mask[pix] = 1.0;
    }
  }
  return out;
}

// Dataset on disk:
//   scene.cfg         effective generator config, JSON
//   cameras.json      shared intrinsics plus per-frame R (row-major) and t
//   poses.csv         frame index, 12 joint rotations, global translation,
//                     10 expression coefficients, %.17g
//   frames/NNNN.pfm   linear float render       frames/NNNN.png preview
//   masks/NNNN.png    binary mask
//   gt_points.ply     canonical surface samples with normals and albedo
//   heldout/          same layout for the held-out split
namespace detail {

inline std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

inline void write_cameras_json(const std::string& path, const std::vector<Camera<double>>& cams) {
  PR_CHECK(!cams.empty(), "cameras: empty list");
  nlohmann::json j;
  j["width"] = cams[0].width;
  j["height"] = cams[0].height;
  j["fx"] = cams[0].fx;
  j["fy"] = cams[0].fy;
  j["cx"] = cams[0].cx;
  j["cy"] = cams[0].cy;
  j["z_near"] = cams[0].z_near;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& c : cams) {
    nlohmann::json e;
    e["R"] = std::vector<double>(c.R.m, c.R.m + 9);
    e["t"] = std::vector<double>{c.t.x, c.t.y, c.t.z};
    frames.push_back(e);
  }
  j["frames"] = frames;
  save_json_file(path, j, "cameras");
}

inline std::vector<Camera<double>> read_cameras_json(const std::string& path) {
  const nlohmann::json j = load_json_file(path, "cameras");
  Camera<double> base;
  base.width = j.at("width").get<int>();
  base.height = j.at("height").get<int>();
  base.fx = j.at("fx").get<double>();
  base.fy = j.at("fy").get<double>();
  base.cx = j.at("cx").get<double>();
  base.cy = j.at("cy").get<double>();
  base.z_near = j.at("z_near").get<double>();
  std::vector<Camera<double>> cams;
  for (const auto& e : j.at("frames")) {
    Camera<double> c = base;
    const auto R = e.at("R").get<std::vector<double>>();
    const auto t = e.at("t").get<std::vector<double>>();
    PR_CHECK(R.size() == 9 && t.size() == 3, "cameras: bad extrinsics shape");
    std::copy(R.begin(), R.end(), c.R.m);
    c.t = {t[0], t[1], t[2]};
    cams.push_back(c);
  }
  return cams;
}

inline void write_poses_csv(const std::string& path, const std::vector<PoseExpr>& poses) {
  FileCloser fc;
  const std::string tmp = path + ".tmp";
  fc.f = std::fopen(tmp.c_str(), "wb");
  PR_CHECK(fc.f, "poses: cannot open " << tmp << " for writing");
  std::fprintf(fc.f, "frame");
  for (int j = 0; j < kJoints; ++j)
    std::fprintf(fc.f, ",theta%dx,theta%dy,theta%dz", j, j, j);
  std::fprintf(fc.f, ",tgx,tgy,tgz");
  for (int e = 0; e < kExpr; ++e) std::fprintf(fc.f, ",psi%d", e);
  std::fprintf(fc.f, "\n");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const PoseExpr& p = poses[i];
    std::fprintf(fc.f, "%zu", i);
    for (int j = 0; j < kJoints; ++j)
      std::fprintf(fc.f, ",%.17g,%.17g,%.17g", p.theta[j].x, p.theta[j].y, p.theta[j].z);
    std::fprintf(fc.f, ",%.17g,%.17g,%.17g", p.t_global.x, p.t_global.y, p.t_global.z);
    for (int e = 0; e < kExpr; ++e) std::fprintf(fc.f, ",%.17g", p.psi[e]);
    std::fprintf(fc.f, "\n");
  }
  PR_CHECK(std::fflush(fc.f) == 0, "poses: flush failed for " << tmp);
  fc.close();
  std::filesystem::rename(tmp, path);
}

inline std::vector<PoseExpr> read_poses_csv(const std::string& path) {
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "poses: cannot open " << path);
  char header[512];
  PR_CHECK(std::fgets(header, sizeof(header), fc.f), "poses: missing header in " << path);
  std::vector<PoseExpr> poses;
  for (;;) {
    long idx = 0;
    if (std::fscanf(fc.f, "%ld", &idx) != 1) break;
    PoseExpr p;
    double vals[3 * kJoints + 3 + kExpr];
    for (double& v : vals)
      PR_CHECK(std::fscanf(fc.f, ",%lf", &v) == 1, "poses: short row in " << path);
    for (int j = 0; j < kJoints; ++j)
      p.theta[j] = {vals[3 * j], vals[3 * j + 1], vals[3 * j + 2]};
    p.t_global = {vals[3 * kJoints], vals[3 * kJoints + 1], vals[3 * kJoints + 2]};
    for (int e = 0; e < kExpr; ++e) p.psi[e] = vals[3 * kJoints + 3 + e];
    PR_CHECK(idx == static_cast<long>(poses.size()), "poses: non-contiguous frame index");
    poses.push_back(p);
  }
  return poses;
}

inline void write_split(const std::string& dir, const std::vector<ScenePrim>& ps,
                        const MiniRig& rig, const SceneConfig& cfg,
                        const std::vector<PoseExpr>& poses,
                        const std::vector<Camera<double>>& cams) {
  namespace fs = std::filesystem;
  fs::create_directories(dir + "/frames");
  fs::create_directories(dir + "/masks");
  write_cameras_json(dir + "/cameras.json", cams);
  write_poses_csv(dir + "/poses.csv", poses);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const DeformFrame f = compute_frame(rig, poses[i]);
    const GtFrame g = render_gt_frame(ps, f, cfg, cams[i]);
    const std::string name = frame_name(static_cast<int>(i));
    write_pfm(dir + "/frames/" + name + ".pfm", g.color, cfg.width, cfg.height, 3);
    write_png(dir + "/frames/" + name + ".png", quantize8(g.color, cfg.width, cfg.height, 3));
    write_png(dir + "/masks/" + name + ".png", quantize8(g.mask, cfg.width, cfg.height, 1));
  }
}

}  // namespace detail

// Generates the full dataset under `dir`. Frames orbit the head over one
// revolution; held-out views are spread evenly between training views and
// share the same pose script.
inline void gen_scene(SceneConfig cfg, const std::string& dir) {
  cfg.validate();
  const SceneKind kind = parse_scene_kind(cfg.kind);
  const std::vector<ScenePrim> ps = scene_prims(kind);
  const MiniRig rig = make_mini_rig(cfg.rig_seed);
  const int total = cfg.frames + cfg.heldout;
  std::vector<int> is_heldout(total, 0);
  for (int j = 0; j < cfg.heldout; ++j)
    is_heldout[static_cast<int>((j + 0.5) * total / cfg.heldout)] = 1;
  std::vector<PoseExpr> train_poses, held_poses;
  std::vector<Camera<double>> train_cams, held_cams;
  for (int k = 0; k < total; ++k) {
    const PoseExpr pose = scene_pose(cfg, k, total);
    const Camera<double> cam = scene_camera(cfg, k, total);
    if (is_heldout[k]) {
      held_poses.push_back(pose);
      held_cams.push_back(cam);
    } else {
      train_poses.push_back(pose);
      train_cams.push_back(cam);
    }
  }
  PR_CHECK(static_cast<int>(train_poses.size()) == cfg.frames,
           "scene: held-out split produced a duplicate index");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::save_json_file(dir + "/scene.cfg", config_to_json(cfg), "scene config");
  Rng rng(split_seed(cfg.seed, 101));
  write_ply(dir + "/gt_points.ply", sample_scene_surface(ps, cfg.gt_samples, rng));
  detail::write_split(dir, ps, rig, cfg, train_poses, train_cams);
  if (cfg.heldout > 0) detail::write_split(dir + "/heldout", ps, rig, cfg, held_poses, held_cams);
}

// One loaded frame: float render target, binary mask, scripted pose and its
// camera.
struct SceneFrameData {
  PoseExpr pose;
  Camera<double> cam;
  std::vector<double> rgb;   // w*h*3
  std::vector<double> mask;  // w*h
};

struct SceneSplit {
  SceneConfig cfg;
  std::vector<SceneFrameData> frames;
};

inline SceneSplit load_split(const std::string& dataset_dir, bool heldout = false) {
  SceneSplit out;
  out.cfg = config_from_file<SceneConfig>(dataset_dir + "/scene.cfg", "scene config");
  const std::string dir = heldout ? dataset_dir + "/heldout" : dataset_dir;
  const std::vector<PoseExpr> poses = detail::read_poses_csv(dir + "/poses.csv");
  const std::vector<Camera<double>> cams = detail::read_cameras_json(dir + "/cameras.json");
  PR_CHECK(poses.size() == cams.size(), "dataset: pose and camera counts differ");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    SceneFrameData fd;
    fd.pose = poses[i];
    fd.cam = cams[i];
    const std::string name = detail::frame_name(static_cast<int>(i));
    const PfmImage pfm = read_pfm(dir + "/frames/" + name + ".pfm");
    PR_CHECK(pfm.w == out.cfg.width && pfm.h == out.cfg.height && pfm.ch == 3,
             "dataset: frame " << name << " shape mismatch");
    fd.rgb = pfm.data;
    const Image8 m = read_png(dir + "/masks/" + name + ".png");
    PR_CHECK(m.w == out.cfg.width && m.h == out.cfg.height && m.ch == 1,
             "dataset: mask " << name << " shape mismatch");
    fd.mask = to_unit(m);
    out.frames.push_back(std::move(fd));
  }
  return out;
}

}  // namespace pointrig
