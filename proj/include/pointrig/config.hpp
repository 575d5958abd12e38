// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pointrig/core.hpp"
#include "pointrig/losses.hpp"

namespace pointrig {

namespace detail {

// Flat key -> member binding so every config knob merges, validates and
// echoes through one code path. Unknown keys are rejected by name.
struct ConfigField {
  enum class Type { kDouble, kInt, kBool, kString, kVec3 };
  std::string name;
  Type type;
  void* p;
};

class ConfigSchema {
 public:
  void add(const std::string& n, double* p) { f_.push_back({n, ConfigField::Type::kDouble, p}); }
  void add(const std::string& n, int* p) { f_.push_back({n, ConfigField::Type::kInt, p}); }
  void add(const std::string& n, bool* p) { f_.push_back({n, ConfigField::Type::kBool, p}); }
  void add(const std::string& n, std::string* p) {
    f_.push_back({n, ConfigField::Type::kString, p});
  }
  void add(const std::string& n, Vec3<double>* p) {
    f_.push_back({n, ConfigField::Type::kVec3, p});
  }

  void merge(const nlohmann::json& j, const char* what) const {
    PR_CHECK(j.is_object(), what << ": config root must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const ConfigField* fld = nullptr;
      for (const auto& f : f_)
        if (f.name == it.key()) {
          fld = &f;
          break;
        }
      PR_CHECK(fld, what << ": unknown config key '" << it.key() << "'");
      const auto& v = it.value();
      switch (fld->type) {
        case ConfigField::Type::kDouble:
          PR_CHECK(v.is_number(), what << ": key '" << fld->name << "' must be a number");
          *static_cast<double*>(fld->p) = v.get<double>();
          break;
        case ConfigField::Type::kInt:
          PR_CHECK(v.is_number_integer(), what << ": key '" << fld->name << "' must be an integer");
          *static_cast<int*>(fld->p) = v.get<int>();
          break;
        case ConfigField::Type::kBool:
          PR_CHECK(v.is_boolean(), what << ": key '" << fld->name << "' must be a boolean");
          *static_cast<bool*>(fld->p) = v.get<bool>();
          break;
        case ConfigField::Type::kString:
          PR_CHECK(v.is_string(), what << ": key '" << fld->name << "' must be a string");
          *static_cast<std::string*>(fld->p) = v.get<std::string>();
          break;
        case ConfigField::Type::kVec3: {
          PR_CHECK(v.is_array() && v.size() == 3,
                   what << ": key '" << fld->name << "' must be an array of 3 numbers");
          auto* vec = static_cast<Vec3<double>*>(fld->p);
          vec->x = v.at(0).get<double>();
          vec->y = v.at(1).get<double>();
          vec->z = v.at(2).get<double>();
          break;
        }
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& f : f_) {
      switch (f.type) {
        case ConfigField::Type::kDouble:
          j[f.name] = *static_cast<double*>(f.p);
          break;
        case ConfigField::Type::kInt:
          j[f.name] = *static_cast<int*>(f.p);
          break;
        case ConfigField::Type::kBool:
          j[f.name] = *static_cast<bool*>(f.p);
          break;
        case ConfigField::Type::kString:
          j[f.name] = *static_cast<std::string*>(f.p);
          break;
        case ConfigField::Type::kVec3: {
          const auto* v = static_cast<Vec3<double>*>(f.p);
          j[f.name] = {v->x, v->y, v->z};
          break;
        }
      }
    }
    return j;
  }

 private:
  std::vector<ConfigField> f_;
};

inline nlohmann::json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  PR_CHECK(in.good(), what << ": cannot open " << path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    PR_CHECK(false, what << ": " << path << " is not valid JSON (" << e.what() << ")");
  }
  return j;
}

inline void save_json_file(const std::string& path, const nlohmann::json& j, const char* what) {
  std::ofstream out(path);
  PR_CHECK(out.good(), what << ": cannot open " << path << " for writing");
  out << j.dump(2) << "\n";
  PR_CHECK(out.good(), what << ": short write to " << path);
}

}  // namespace detail

// Generator settings for the synthetic ground-truth scenes. The camera
// orbits the figure so every surface region is observed during training.
struct SceneConfig {
  std::string kind = "sphere_jaw";  // sphere | sphere_jaw | glasses
  int seed = 7;
  int rig_seed = 7;
  int frames = 200;
  int heldout = 20;
  int width = 128;
  int height = 128;
  Vec3<double> light{-0.5, 0.25, 0.8};  // toward the light, image-left lit
  double k_ambient = 0.2;
  double k_diffuse = 0.8;
  double cam_dist = 2.2;
  double cam_fov_scale = 1.25;  // fx = cam_fov_scale * width
  double look_y = -0.15;
  double neck_deg = 30.0;
  double jaw_deg = 22.0;
  double expr_amp = 1.0;
  int gt_samples = 120000;

  detail::ConfigSchema schema() {
    detail::ConfigSchema s;
    s.add("kind", &kind);
    s.add("seed", &seed);
    s.add("rig_seed", &rig_seed);
    s.add("frames", &frames);
    s.add("heldout", &heldout);
    s.add("width", &width);
    s.add("height", &height);
    s.add("light", &light);
    s.add("k_ambient", &k_ambient);
    s.add("k_diffuse", &k_diffuse);
    s.add("cam_dist", &cam_dist);
    s.add("cam_fov_scale", &cam_fov_scale);
    s.add("look_y", &look_y);
    s.add("neck_deg", &neck_deg);
    s.add("jaw_deg", &jaw_deg);
    s.add("expr_amp", &expr_amp);
    s.add("gt_samples", &gt_samples);
    return s;
  }

  void validate() const {
    PR_CHECK(kind == "sphere" || kind == "sphere_jaw" || kind == "glasses",
             "scene config: unknown kind '" << kind << "'");
    PR_CHECK(frames > 0 && heldout >= 0, "scene config: frame counts must be positive");
    PR_CHECK(width >= 16 && height >= 16, "scene config: image too small");
    PR_CHECK(norm(light) > 0, "scene config: light direction must be nonzero");
    PR_CHECK(k_ambient >= 0 && k_diffuse >= 0 && k_ambient + k_diffuse <= 1.0 + 1e-12,
             "scene config: ambient+diffuse must stay within [0,1]");
    PR_CHECK(gt_samples >= 1000, "scene config: gt_samples too small");
  }
};

// Trainer settings. Every field has a default; a run directory always gets
// the merged effective config echoed back so runs are reproducible.
struct RunConfig {
  int seed = 1;
  LossWeights weights;
  int total_epochs = 63;
  int upsample_every = 5;
  double radius_factor = 0.75;
  double prune_threshold = 0.5;
  int initial_points = 512;
  int max_points = 16384;
  double initial_radius_px = 4.0;
  int canon_width = 48;
  int canon_depth = 2;
  double canon_init_radius = 0.55;
  int deform_width = 48;
  int deform_depth = 2;
  int shade_width = 24;
  int shade_depth = 2;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool finetune_pose = true;
  bool sdf_to_positions = false;
  int max_frags = 16;
  int pyramid_levels = 4;
  Vec3<double> bg{0, 0, 0};
  int psnr_probe_frames = 4;
  int checkpoint_every = 16;

  detail::ConfigSchema schema() {
    detail::ConfigSchema s;
    s.add("seed", &seed);
    s.add("lw_rgb", &weights.rgb);
    s.add("lw_mask", &weights.mask);
    s.add("lw_flame", &weights.flame);
    s.add("lw_pyr", &weights.pyr);
    s.add("lw_sdf", &weights.sdf);
    s.add("lw_eik", &weights.eik);
    s.add("lw_flame_e", &weights.flame_e);
    s.add("lw_flame_p", &weights.flame_p);
    s.add("lw_flame_w", &weights.flame_w);
    s.add("total_epochs", &total_epochs);
    s.add("upsample_every", &upsample_every);
    s.add("radius_factor", &radius_factor);
    s.add("prune_threshold", &prune_threshold);
    s.add("initial_points", &initial_points);
    s.add("max_points", &max_points);
    s.add("initial_radius_px", &initial_radius_px);
    s.add("canon_width", &canon_width);
    s.add("canon_depth", &canon_depth);
    s.add("canon_init_radius", &canon_init_radius);
    s.add("deform_width", &deform_width);
    s.add("deform_depth", &deform_depth);
    s.add("shade_width", &shade_width);
    s.add("shade_depth", &shade_depth);
    s.add("lr", &lr);
    s.add("beta1", &beta1);
    s.add("beta2", &beta2);
    s.add("finetune_pose", &finetune_pose);
    s.add("sdf_to_positions", &sdf_to_positions);
    s.add("max_frags", &max_frags);
    s.add("pyramid_levels", &pyramid_levels);
    s.add("bg", &bg);
    s.add("psnr_probe_frames", &psnr_probe_frames);
    s.add("checkpoint_every", &checkpoint_every);
    return s;
  }

  void validate() const {
    PR_CHECK(weights.rgb >= 0 && weights.mask >= 0 && weights.flame >= 0 && weights.pyr >= 0 &&
                 weights.sdf >= 0 && weights.eik >= 0 && weights.flame_e >= 0 &&
                 weights.flame_p >= 0 && weights.flame_w >= 0,
             "run config: loss weights must be nonnegative");
    PR_CHECK(total_epochs > 0 && upsample_every > 0, "run config: schedule counts must be positive");
    PR_CHECK(radius_factor > 0 && radius_factor < 1,
             "run config: radius_factor must lie in (0,1)");
    PR_CHECK(prune_threshold > 0 && prune_threshold <= 1,
             "run config: prune_threshold must lie in (0,1]");
    PR_CHECK(initial_points > 0 && max_points >= initial_points,
             "run config: point counts inconsistent");
    PR_CHECK(initial_radius_px > 0, "run config: initial radius must be positive");
    PR_CHECK(canon_width >= 4 && deform_width >= 4 && shade_width >= 4 && canon_depth >= 1 &&
                 deform_depth >= 1 && shade_depth >= 1,
             "run config: net sizes too small");
    PR_CHECK(lr > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1,
             "run config: bad optimizer settings");
    PR_CHECK(max_frags > 0 && pyramid_levels >= 1, "run config: bad renderer settings");
  }
};

template <typename Cfg>
inline Cfg config_from_json(const nlohmann::json& j, const char* what) {
  Cfg cfg;
  cfg.schema().merge(j, what);
  cfg.validate();
  return cfg;
}

template <typename Cfg>
inline Cfg config_from_file(const std::string& path, const char* what) {
  return config_from_json<Cfg>(detail::load_json_file(path, what), what);
}

template <typename Cfg>
inline nlohmann::json config_to_json(Cfg& cfg) {
  return cfg.schema().to_json();
}

}  // namespace pointrig
