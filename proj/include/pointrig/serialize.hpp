// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "pointrig/core.hpp"

namespace pointrig {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts need byte swaps");

// One named flat double array. Checkpoints are ordered lists of these; the
// writer preserves order so identical state produces identical bytes.
struct NamedTensor {
  std::string name;
  std::vector<double> data;
};

namespace detail {

inline constexpr char kTensorMagic[8] = {'P', 'R', 'T', 'F', '0', '0', '0', '1'};

struct FileCloser {
  std::FILE* f = nullptr;
  void close() {
    if (f) std::fclose(f);
    f = nullptr;
  }
  ~FileCloser() { close(); }
};

inline void put_bytes(std::FILE* f, const void* p, std::size_t n, const std::string& path) {
  PR_CHECK(std::fwrite(p, 1, n, f) == n, "tensor file: short write to " << path);
}

inline void get_bytes(std::FILE* f, void* p, std::size_t n, const std::string& path) {
  PR_CHECK(std::fread(p, 1, n, f) == n, "tensor file: truncated read from " << path);
}

}  // namespace detail

// Writes atomically: a temp file in the same directory is renamed over the
// target, so readers never observe a half-written checkpoint.
inline void write_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  const std::string tmp = path + ".tmp";
  {
    detail::FileCloser fc;
    fc.f = std::fopen(tmp.c_str(), "wb");
    PR_CHECK(fc.f, "tensor file: cannot open " << tmp << " for writing");
    detail::put_bytes(fc.f, detail::kTensorMagic, 8, tmp);
    const std::uint32_t count = static_cast<std::uint32_t>(tensors.size());
    detail::put_bytes(fc.f, &count, 4, tmp);
    for (const auto& t : tensors) {
      PR_CHECK(!t.name.empty() && t.name.size() < (1u << 16),
               "tensor file: bad tensor name length");
      const std::uint32_t nlen = static_cast<std::uint32_t>(t.name.size());
      detail::put_bytes(fc.f, &nlen, 4, tmp);
      detail::put_bytes(fc.f, t.name.data(), nlen, tmp);
      const std::uint64_t cnt = t.data.size();
      detail::put_bytes(fc.f, &cnt, 8, tmp);
      if (cnt) detail::put_bytes(fc.f, t.data.data(), cnt * sizeof(double), tmp);
    }
    PR_CHECK(std::fflush(fc.f) == 0, "tensor file: flush failed for " << tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  PR_CHECK(!ec, "tensor file: rename " << tmp << " -> " << path << " failed: " << ec.message());
}

inline std::vector<NamedTensor> read_tensors(const std::string& path) {
  detail::FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "tensor file: cannot open " << path);
  char magic[8];
  detail::get_bytes(fc.f, magic, 8, path);
  PR_CHECK(std::memcmp(magic, detail::kTensorMagic, 8) == 0,
           "tensor file: " << path << " has wrong magic (not a PRTF0001 file)");
  std::uint32_t count = 0;
  detail::get_bytes(fc.f, &count, 4, path);
  std::vector<NamedTensor> out(count);
  for (auto& t : out) {
    std::uint32_t nlen = 0;
    detail::get_bytes(fc.f, &nlen, 4, path);
    PR_CHECK(nlen > 0 && nlen < (1u << 16), "tensor file: corrupt name length in " << path);
    t.name.resize(nlen);
    detail::get_bytes(fc.f, t.name.data(), nlen, path);
    std::uint64_t cnt = 0;
    detail::get_bytes(fc.f, &cnt, 8, path);
    PR_CHECK(cnt < (1ull << 32), "tensor file: implausible tensor size in " << path);
    t.data.resize(cnt);
    if (cnt) detail::get_bytes(fc.f, t.data.data(), cnt * sizeof(double), path);
  }
  char extra;
  PR_CHECK(std::fread(&extra, 1, 1, fc.f) == 0, "tensor file: trailing bytes in " << path);
  return out;
}

inline const std::vector<double>& find_tensor(const std::vector<NamedTensor>& tensors,
                                              const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t.data;
  PR_CHECK(false, "tensor file: no tensor named '" << name << "'");
  throw std::logic_error("unreachable");
}

// FNV-1a over the raw file bytes; used for determinism checks.
inline std::uint64_t file_hash(const std::string& path) {
  detail::FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "file_hash: cannot open " << path);
  std::uint64_t h = 14695981039346656037ull;
  unsigned char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), fc.f)) > 0)
    for (std::size_t i = 0; i < n; ++i) h = (h ^ buf[i]) * 1099511628211ull;
  return h;
}

}  // namespace pointrig
