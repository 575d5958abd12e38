// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/serialize.hpp"

namespace pointrig {

// Oriented, colored point cloud in the interchange format: positions and
// normals as float32, colors as 8-bit.
struct PlyCloud {
  std::vector<Vec3<double>> x;
  std::vector<Vec3<double>> n;
  std::vector<Vec3<double>> rgb;  // unit range; quantized to uchar on write
};

inline void write_ply(const std::string& path, const PlyCloud& cloud) {
  PR_CHECK(cloud.n.size() == cloud.x.size() && cloud.rgb.size() == cloud.x.size(),
           "ply: positions, normals and colors must have equal counts");
  detail::FileCloser fc;
  const std::string tmp = path + ".tmp";
  fc.f = std::fopen(tmp.c_str(), "wb");
  PR_CHECK(fc.f, "ply: cannot open " << tmp << " for writing");
  std::fprintf(fc.f,
               "ply\nformat ascii 1.0\nelement vertex %zu\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property float nx\nproperty float ny\nproperty float nz\n"
               "property uchar red\nproperty uchar green\nproperty uchar blue\n"
               "end_header\n",
               cloud.x.size());
  auto u8 = [](double v) {
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    return static_cast<int>(v * 255.0 + 0.5);
  };
  for (std::size_t i = 0; i < cloud.x.size(); ++i) {
    const auto& p = cloud.x[i];
    const auto& nn = cloud.n[i];
    std::fprintf(fc.f, "%.9g %.9g %.9g %.9g %.9g %.9g %d %d %d\n", p.x, p.y, p.z, nn.x, nn.y,
                 nn.z, u8(cloud.rgb[i].x), u8(cloud.rgb[i].y), u8(cloud.rgb[i].z));
  }
  PR_CHECK(std::fflush(fc.f) == 0, "ply: flush failed for " << tmp);
  std::fclose(fc.f);
  fc.f = nullptr;
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  PR_CHECK(!ec, "ply: rename to " << path << " failed: " << ec.message());
}

inline PlyCloud read_ply(const std::string& path) {
  detail::FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "ply: cannot open " << path);
  char line[512];
  PR_CHECK(std::fgets(line, sizeof(line), fc.f) && std::strncmp(line, "ply", 3) == 0,
           "ply: " << path << " is not a PLY file");
  std::size_t count = 0;
  bool ascii = false, header_done = false;
  std::vector<std::string> props;
  while (!header_done && std::fgets(line, sizeof(line), fc.f)) {
    if (std::strncmp(line, "format ascii", 12) == 0) ascii = true;
    else if (std::strncmp(line, "element vertex", 14) == 0)
      PR_CHECK(std::sscanf(line, "element vertex %zu", &count) == 1,
               "ply: bad element line in " << path);
    else if (std::strncmp(line, "property", 8) == 0) {
      char type[64], name[64];
      PR_CHECK(std::sscanf(line, "property %63s %63s", type, name) == 2,
               "ply: bad property line in " << path);
      props.push_back(name);
    } else if (std::strncmp(line, "end_header", 10) == 0)
      header_done = true;
    else if (std::strncmp(line, "element", 7) == 0)
      PR_CHECK(false, "ply: only vertex elements supported (" << path << ")");
  }
  PR_CHECK(header_done, "ply: missing end_header in " << path);
  PR_CHECK(ascii, "ply: only ascii format supported (" << path << ")");
  const std::vector<std::string> want = {"x",  "y",  "z",   "nx",    "ny",   "nz",
                                         "red", "green", "blue"};
  PR_CHECK(props.size() == want.size(), "ply: unexpected property layout in " << path);
  for (std::size_t i = 0; i < want.size(); ++i)
    PR_CHECK(props[i] == want[i], "ply: property " << i << " is '" << props[i] << "', expected '"
                                                   << want[i] << "' in " << path);
  PlyCloud cloud;
  cloud.x.resize(count);
  cloud.n.resize(count);
  cloud.rgb.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double px, py, pz, nx, ny, nz;
    int r, g, b;
    PR_CHECK(std::fscanf(fc.f, "%lf %lf %lf %lf %lf %lf %d %d %d", &px, &py, &pz, &nx, &ny, &nz,
                         &r, &g, &b) == 9,
             "ply: truncated vertex " << i << " in " << path);
    cloud.x[i] = {px, py, pz};
    cloud.n[i] = {nx, ny, nz};
    cloud.rgb[i] = {r / 255.0, g / 255.0, b / 255.0};
  }
  return cloud;
}

}  // namespace pointrig
