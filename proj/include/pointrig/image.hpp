// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "pointrig/core.hpp"
#include "pointrig/serialize.hpp"

namespace pointrig {

// In-memory images are row-major, top row first, channels interleaved,
// values in [0,1] for 8-bit sources and raw floats for PFM.

// --- PFM: float32, bottom row first, scale -1.0 marks little-endian ---

inline void write_pfm(const std::string& path, const std::vector<double>& data, int w, int h,
                      int ch) {
  PR_CHECK(ch == 1 || ch == 3, "pfm: channel count must be 1 or 3");
  PR_CHECK(static_cast<int>(data.size()) == w * h * ch, "pfm: buffer size mismatch");
  detail::FileCloser fc;
  const std::string tmp = path + ".tmp";
  fc.f = std::fopen(tmp.c_str(), "wb");
  PR_CHECK(fc.f, "pfm: cannot open " << tmp << " for writing");
  std::fprintf(fc.f, "%s\n%d %d\n-1.0\n", ch == 3 ? "PF" : "Pf", w, h);
  std::vector<float> row(static_cast<std::size_t>(w) * ch);
  for (int y = h - 1; y >= 0; --y) {
    const double* src = data.data() + static_cast<std::size_t>(y) * w * ch;
    for (int i = 0; i < w * ch; ++i) row[i] = static_cast<float>(src[i]);
    detail::put_bytes(fc.f, row.data(), row.size() * sizeof(float), tmp);
  }
  PR_CHECK(std::fflush(fc.f) == 0, "pfm: flush failed for " << tmp);
  std::fclose(fc.f);
  fc.f = nullptr;
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  PR_CHECK(!ec, "pfm: rename to " << path << " failed: " << ec.message());
}

struct PfmImage {
  int w = 0, h = 0, ch = 0;
  std::vector<double> data;
};

inline PfmImage read_pfm(const std::string& path) {
  detail::FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "pfm: cannot open " << path);
  char tag[3] = {0, 0, 0};
  PfmImage img;
  double scale = 0;
  PR_CHECK(std::fscanf(fc.f, "%2s %d %d %lf", tag, &img.w, &img.h, &scale) == 4,
           "pfm: malformed header in " << path);
  std::fgetc(fc.f);  // single whitespace byte after the scale
  if (std::strcmp(tag, "PF") == 0)
    img.ch = 3;
  else if (std::strcmp(tag, "Pf") == 0)
    img.ch = 1;
  else
    PR_CHECK(false, "pfm: " << path << " is not a PFM file");
  PR_CHECK(img.w > 0 && img.h > 0, "pfm: bad dimensions in " << path);
  PR_CHECK(scale < 0, "pfm: big-endian PFM not supported (" << path << ")");
  img.data.resize(static_cast<std::size_t>(img.w) * img.h * img.ch);
  std::vector<float> row(static_cast<std::size_t>(img.w) * img.ch);
  for (int y = img.h - 1; y >= 0; --y) {
    detail::get_bytes(fc.f, row.data(), row.size() * sizeof(float), path);
    double* dst = img.data.data() + static_cast<std::size_t>(y) * img.w * img.ch;
    for (int i = 0; i < img.w * img.ch; ++i) dst[i] = row[i];
  }
  return img;
}

// --- PNG: 8-bit grayscale or RGB, filter 0 on write, full defilter on read ---

struct Image8 {
  int w = 0, h = 0, ch = 0;
  std::vector<unsigned char> pix;
};

namespace detail {

inline void png_chunk(std::FILE* f, const char type[4], const unsigned char* data,
                      std::uint32_t len, const std::string& path) {
  unsigned char hdr[8];
  hdr[0] = static_cast<unsigned char>(len >> 24);
  hdr[1] = static_cast<unsigned char>(len >> 16);
  hdr[2] = static_cast<unsigned char>(len >> 8);
  hdr[3] = static_cast<unsigned char>(len);
  std::memcpy(hdr + 4, type, 4);
  put_bytes(f, hdr, 8, path);
  if (len) put_bytes(f, data, len, path);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, hdr + 4, 4);
  if (len) crc = crc32(crc, data, len);
  unsigned char tail[4] = {static_cast<unsigned char>(crc >> 24),
                           static_cast<unsigned char>(crc >> 16),
                           static_cast<unsigned char>(crc >> 8),
                           static_cast<unsigned char>(crc)};
  put_bytes(f, tail, 4, path);
}

inline unsigned char paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
  if (pb <= pc) return static_cast<unsigned char>(b);
  return static_cast<unsigned char>(c);
}

}  // namespace detail

inline void write_png(const std::string& path, const Image8& img) {
  PR_CHECK(img.ch == 1 || img.ch == 3, "png: channel count must be 1 or 3");
  PR_CHECK(img.pix.size() == static_cast<std::size_t>(img.w) * img.h * img.ch,
           "png: buffer size mismatch");
  const std::size_t stride = static_cast<std::size_t>(img.w) * img.ch;
  std::vector<unsigned char> raw((stride + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    raw[y * (stride + 1)] = 0;  // filter none
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.pix.data() + y * stride, stride);
  }
  uLongf zcap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> zbuf(zcap);
  PR_CHECK(compress2(zbuf.data(), &zcap, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK,
           "png: deflate failed for " << path);

  detail::FileCloser fc;
  const std::string tmp = path + ".tmp";
  fc.f = std::fopen(tmp.c_str(), "wb");
  PR_CHECK(fc.f, "png: cannot open " << tmp << " for writing");
  static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  detail::put_bytes(fc.f, sig, 8, tmp);
  unsigned char ihdr[13];
  ihdr[0] = static_cast<unsigned char>(img.w >> 24);
  ihdr[1] = static_cast<unsigned char>(img.w >> 16);
  ihdr[2] = static_cast<unsigned char>(img.w >> 8);
  ihdr[3] = static_cast<unsigned char>(img.w);
  ihdr[4] = static_cast<unsigned char>(img.h >> 24);
  ihdr[5] = static_cast<unsigned char>(img.h >> 16);
  ihdr[6] = static_cast<unsigned char>(img.h >> 8);
  ihdr[7] = static_cast<unsigned char>(img.h);
  ihdr[8] = 8;                                // bit depth
  ihdr[9] = img.ch == 3 ? 2 : 0;              // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;         // compression, filter, interlace
  detail::png_chunk(fc.f, "IHDR", ihdr, 13, tmp);
  detail::png_chunk(fc.f, "IDAT", zbuf.data(), static_cast<std::uint32_t>(zcap), tmp);
  detail::png_chunk(fc.f, "IEND", nullptr, 0, tmp);
  PR_CHECK(std::fflush(fc.f) == 0, "png: flush failed for " << tmp);
  std::fclose(fc.f);
  fc.f = nullptr;
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  PR_CHECK(!ec, "png: rename to " << path << " failed: " << ec.message());
}

inline Image8 read_png(const std::string& path) {
  detail::FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  PR_CHECK(fc.f, "png: cannot open " << path);
  unsigned char sig[8];
  detail::get_bytes(fc.f, sig, 8, path);
  static const unsigned char want[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  PR_CHECK(std::memcmp(sig, want, 8) == 0, "png: " << path << " is not a PNG file");

  Image8 img;
  std::vector<unsigned char> idat;
  bool seen_end = false;
  while (!seen_end) {
    unsigned char hdr[8];
    detail::get_bytes(fc.f, hdr, 8, path);
    const std::uint32_t len = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                              (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
    char type[5] = {char(hdr[4]), char(hdr[5]), char(hdr[6]), char(hdr[7]), 0};
    std::vector<unsigned char> data(len);
    if (len) detail::get_bytes(fc.f, data.data(), len, path);
    unsigned char crcb[4];
    detail::get_bytes(fc.f, crcb, 4, path);
    if (std::strcmp(type, "IHDR") == 0) {
      PR_CHECK(len == 13, "png: bad IHDR in " << path);
      img.w = int((std::uint32_t(data[0]) << 24) | (std::uint32_t(data[1]) << 16) |
                  (std::uint32_t(data[2]) << 8) | data[3]);
      img.h = int((std::uint32_t(data[4]) << 24) | (std::uint32_t(data[5]) << 16) |
                  (std::uint32_t(data[6]) << 8) | data[7]);
      PR_CHECK(data[8] == 8, "png: only 8-bit depth supported (" << path << ")");
      PR_CHECK(data[9] == 0 || data[9] == 2,
               "png: only grayscale or RGB supported (" << path << ")");
      img.ch = data[9] == 2 ? 3 : 1;
      PR_CHECK(data[12] == 0, "png: interlaced PNG not supported (" << path << ")");
    } else if (std::strcmp(type, "IDAT") == 0) {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (std::strcmp(type, "IEND") == 0) {
      seen_end = true;
    }
    // ancillary chunks are skipped
  }
  PR_CHECK(img.w > 0 && img.h > 0 && !idat.empty(), "png: missing image data in " << path);

  const std::size_t stride = static_cast<std::size_t>(img.w) * img.ch;
  std::vector<unsigned char> raw((stride + 1) * img.h);
  uLongf rawlen = static_cast<uLongf>(raw.size());
  PR_CHECK(uncompress(raw.data(), &rawlen, idat.data(), static_cast<uLong>(idat.size())) == Z_OK &&
               rawlen == raw.size(),
           "png: inflate failed for " << path);

  img.pix.assign(stride * img.h, 0);
  const int bpp = img.ch;
  for (int y = 0; y < img.h; ++y) {
    const unsigned char filter = raw[y * (stride + 1)];
    const unsigned char* src = raw.data() + y * (stride + 1) + 1;
    unsigned char* dst = img.pix.data() + y * stride;
    const unsigned char* up = y > 0 ? img.pix.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= std::size_t(bpp) ? dst[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= std::size_t(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: PR_CHECK(false, "png: unknown filter " << int(filter) << " in " << path);
      }
      dst[i] = static_cast<unsigned char>(v & 0xff);
    }
  }
  return img;
}

// --- conversions between unit-range float buffers and 8-bit images ---

inline Image8 quantize8(const std::vector<double>& data, int w, int h, int ch) {
  PR_CHECK(static_cast<int>(data.size()) == w * h * ch, "quantize8: buffer size mismatch");
  Image8 img;
  img.w = w;
  img.h = h;
  img.ch = ch;
  img.pix.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double v = data[i];
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    img.pix[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  return img;
}

inline std::vector<double> to_unit(const Image8& img) {
  std::vector<double> out(img.pix.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pix[i] / 255.0;
  return out;
}

}  // namespace pointrig
