// Copyright Contributors to the pointrig Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pointrig/core.hpp"

namespace pointrig {

template <typename S>
struct AdamHyper {
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

template <typename S>
struct AdamState {
  std::vector<S> m, v;
  std::int64_t step = 0;

  void bind(std::size_t n) {
    m.assign(n, S(0));
    v.assign(n, S(0));
    step = 0;
  }
};

// One bias-corrected Adam step over a flat parameter block. Non-finite
// gradients are a hard error naming the block.
template <typename S>
inline void adam_step(std::vector<S>& params, const std::vector<S>& grad,
                      AdamState<S>& st, const AdamHyper<S>& hp,
                      const char* block_name) {
  PR_CHECK(params.size() == grad.size() && params.size() == st.m.size(),
           "adam: size mismatch in block '" << block_name << "'");
  using std::isfinite;
  using std::pow;
  using std::sqrt;
  st.step += 1;
  const S bc1 = S(1) - S(pow(static_cast<double>(hp.beta1),
                             static_cast<double>(st.step)));
  const S bc2 = S(1) - S(pow(static_cast<double>(hp.beta2),
                             static_cast<double>(st.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const S g = grad[i];
    PR_CHECK(isfinite(g), "adam: non-finite gradient in block '"
                              << block_name << "' at index " << i);
    st.m[i] = hp.beta1 * st.m[i] + (S(1) - hp.beta1) * g;
    st.v[i] = hp.beta2 * st.v[i] + (S(1) - hp.beta2) * g * g;
    const S mhat = st.m[i] / bc1;
    const S vhat = st.v[i] / bc2;
    params[i] -= hp.lr * mhat / (sqrt(vhat) + hp.eps);
  }
}

}  // namespace pointrig
