// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pointrig/core.hpp"

namespace pointrig {

// Forward-mode scalar carrying K tangent channels alongside the value.
// Used to push directional derivatives through straight-line geometry code;
// the MLP kernels handle their tangents by hand for speed.
template <typename S, int K = 1>
struct Dual {
  S v{};
  S t[K]{};

  Dual() = default;
  Dual(S value) : v(value) {}  // NOLINT: implicit lift, tangents zero
  static Dual seeded(S value, int k, S tk = S(1)) {
    Dual d(value);
    d.t[k] = tk;
    return d;
  }

  Dual operator-() const {
    Dual r;
    r.v = -v;
    for (int k = 0; k < K; ++k) r.t[k] = -t[k];
    return r;
  }
  Dual operator+(const Dual& o) const {
    Dual r;
    r.v = v + o.v;
    for (int k = 0; k < K; ++k) r.t[k] = t[k] + o.t[k];
    return r;
  }
  Dual operator-(const Dual& o) const {
    Dual r;
    r.v = v - o.v;
    for (int k = 0; k < K; ++k) r.t[k] = t[k] - o.t[k];
    return r;
  }
  Dual operator*(const Dual& o) const {
    Dual r;
    r.v = v * o.v;
    for (int k = 0; k < K; ++k) r.t[k] = t[k] * o.v + v * o.t[k];
    return r;
  }
  Dual operator/(const Dual& o) const {
    Dual r;
    S inv = S(1) / o.v;
    r.v = v * inv;
    for (int k = 0; k < K; ++k) r.t[k] = (t[k] - r.v * o.t[k]) * inv;
    return r;
  }
  Dual& operator+=(const Dual& o) { return *this = *this + o; }
  Dual& operator-=(const Dual& o) { return *this = *this - o; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }

  bool operator<(const Dual& o) const { return v < o.v; }
  bool operator>(const Dual& o) const { return v > o.v; }
  bool operator<=(const Dual& o) const { return v <= o.v; }
  bool operator>=(const Dual& o) const { return v >= o.v; }
};

template <typename S, int K>
inline Dual<S, K> operator+(S a, const Dual<S, K>& b) {
  return Dual<S, K>(a) + b;
}
template <typename S, int K>
inline Dual<S, K> operator-(S a, const Dual<S, K>& b) {
  return Dual<S, K>(a) - b;
}
template <typename S, int K>
inline Dual<S, K> operator*(S a, const Dual<S, K>& b) {
  Dual<S, K> r;
  r.v = a * b.v;
  for (int k = 0; k < K; ++k) r.t[k] = a * b.t[k];
  return r;
}
template <typename S, int K>
inline Dual<S, K> operator/(S a, const Dual<S, K>& b) {
  return Dual<S, K>(a) / b;
}

template <typename S, int K>
inline S value_of(const Dual<S, K>& d) {
  return d.v;
}

template <typename S, int K>
inline Dual<S, K> sqrt(const Dual<S, K>& d) {
  using std::sqrt;
  Dual<S, K> r;
  r.v = sqrt(d.v);
  S inv = S(1) / (S(2) * r.v);
  for (int k = 0; k < K; ++k) r.t[k] = d.t[k] * inv;
  return r;
}

template <typename S, int K>
inline Dual<S, K> exp(const Dual<S, K>& d) {
  using std::exp;
  Dual<S, K> r;
  r.v = exp(d.v);
  for (int k = 0; k < K; ++k) r.t[k] = d.t[k] * r.v;
  return r;
}

template <typename S, int K>
inline Dual<S, K> log(const Dual<S, K>& d) {
  using std::log;
  Dual<S, K> r;
  r.v = log(d.v);
  S inv = S(1) / d.v;
  for (int k = 0; k < K; ++k) r.t[k] = d.t[k] * inv;
  return r;
}

template <typename S, int K>
inline Dual<S, K> sin(const Dual<S, K>& d) {
  using std::cos;
  using std::sin;
  Dual<S, K> r;
  r.v = sin(d.v);
  S c = cos(d.v);
  for (int k = 0; k < K; ++k) r.t[k] = d.t[k] * c;
  return r;
}

template <typename S, int K>
inline Dual<S, K> cos(const Dual<S, K>& d) {
  using std::cos;
  using std::sin;
  Dual<S, K> r;
  r.v = cos(d.v);
  S s = -sin(d.v);
  for (int k = 0; k < K; ++k) r.t[k] = d.t[k] * s;
  return r;
}

template <typename S, int K>
inline Dual<S, K> max(const Dual<S, K>& a, const Dual<S, K>& b) {
  return a.v >= b.v ? a : b;
}

template <typename S, int K>
inline Dual<S, K> abs(const Dual<S, K>& d) {
  return d.v < S(0) ? -d : d;
}

}  // namespace pointrig
