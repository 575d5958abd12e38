// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pointrig {

inline constexpr double kPi = 3.14159265358979323846;

// Contract violations throw; the CLI turns them into one-line failures.
#define PR_CHECK(cond, msg)                                     \
  do {                                                          \
    if (!(cond)) {                                              \
      std::ostringstream pr_oss_;                               \
      pr_oss_ << msg;                                           \
      throw std::runtime_error(pr_oss_.str());                  \
    }                                                           \
  } while (0)

// Raised when a surface normal cannot be produced (vanishing gradient or a
// degenerate deformation Jacobian).
struct NormalUndefined : std::runtime_error {
  explicit NormalUndefined(const std::string& what) : std::runtime_error(what) {}
};

template <typename S>
inline S sqr(S x) {
  return x * x;
}

template <typename S>
struct Vec3 {
  S x{}, y{}, z{};

  Vec3() = default;
  Vec3(S x_, S y_, S z_) : x(x_), y(y_), z(z_) {}

  S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(S s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(S s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3& operator*=(S s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
};

template <typename S>
inline Vec3<S> operator*(S s, const Vec3<S>& v) {
  return v * s;
}

template <typename S>
inline S dot(const Vec3<S>& a, const Vec3<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename S>
inline Vec3<S> cross(const Vec3<S>& a, const Vec3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename S>
inline S norm(const Vec3<S>& v) {
  using std::sqrt;
  return sqrt(dot(v, v));
}

template <typename S>
inline Vec3<S> normalized(const Vec3<S>& v) {
  return v / norm(v);
}

// Row-major 3x3.
template <typename S>
struct Mat3 {
  S m[9]{};

  static Mat3 identity() {
    Mat3 r;
    r.m[0] = r.m[4] = r.m[8] = S(1);
    return r;
  }
  static Mat3 zero() { return Mat3(); }

  S& operator()(int r, int c) { return m[3 * r + c]; }
  const S& operator()(int r, int c) const { return m[3 * r + c]; }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
    return r;
  }
  Mat3 operator*(S s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
  }
  Mat3& operator+=(const Mat3& o) {
    for (int i = 0; i < 9; ++i) m[i] += o.m[i];
    return *this;
  }
  Vec3<S> operator*(const Vec3<S>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        S acc{};
        for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
        r(i, j) = acc;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
};

template <typename S>
inline Vec3<S> mul_transposed(const Mat3<S>& a, const Vec3<S>& v) {
  return {a.m[0] * v.x + a.m[3] * v.y + a.m[6] * v.z,
          a.m[1] * v.x + a.m[4] * v.y + a.m[7] * v.z,
          a.m[2] * v.x + a.m[5] * v.y + a.m[8] * v.z};
}

template <typename S>
inline Mat3<S> outer(const Vec3<S>& a, const Vec3<S>& b) {
  Mat3<S> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
  return r;
}

template <typename S>
inline S determinant(const Mat3<S>& a) {
  return a.m[0] * (a.m[4] * a.m[8] - a.m[5] * a.m[7]) -
         a.m[1] * (a.m[3] * a.m[8] - a.m[5] * a.m[6]) +
         a.m[2] * (a.m[3] * a.m[7] - a.m[4] * a.m[6]);
}

// Inverse via adjugate; caller checks the determinant.
template <typename S>
inline Mat3<S> inverse(const Mat3<S>& a, const S& det) {
  Mat3<S> r;
  S inv_det = S(1) / det;
  r.m[0] = (a.m[4] * a.m[8] - a.m[5] * a.m[7]) * inv_det;
  r.m[1] = (a.m[2] * a.m[7] - a.m[1] * a.m[8]) * inv_det;
  r.m[2] = (a.m[1] * a.m[5] - a.m[2] * a.m[4]) * inv_det;
  r.m[3] = (a.m[5] * a.m[6] - a.m[3] * a.m[8]) * inv_det;
  r.m[4] = (a.m[0] * a.m[8] - a.m[2] * a.m[6]) * inv_det;
  r.m[5] = (a.m[2] * a.m[3] - a.m[0] * a.m[5]) * inv_det;
  r.m[6] = (a.m[3] * a.m[7] - a.m[4] * a.m[6]) * inv_det;
  r.m[7] = (a.m[1] * a.m[6] - a.m[0] * a.m[7]) * inv_det;
  r.m[8] = (a.m[0] * a.m[4] - a.m[1] * a.m[3]) * inv_det;
  return r;
}

template <typename A, typename S>
inline Vec3<A> vec_cast(const Vec3<S>& v) {
  return {A(v.x), A(v.y), A(v.z)};
}

template <typename A, typename S>
inline Mat3<A> mat_cast(const Mat3<S>& m) {
  Mat3<A> r;
  for (int i = 0; i < 9; ++i) r.m[i] = A(m.m[i]);
  return r;
}

inline double value_of(double x) { return x; }
inline float value_of(float x) { return x; }

inline double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace pointrig
