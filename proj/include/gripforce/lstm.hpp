// Copyright 2026 The gripforce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Two-layer LSTM encoder over a wrench window with a direct 70-step affine
// head on the last hidden state of the top layer:
//
//   a_t = W_ih x_t + W_hh h_{t-1} + b          gate blocks in order [i f g o]
//   i,f,o = sigmoid(.)   g = tanh(.)
//   c_t = f * c_{t-1} + i * g
//   h_t = o * tanh(c_t)
//   y   = W_head h2_T + b_head
//
// Loss is the mean of squared residuals over the horizon. Gradients are
// exact, by backpropagation through time over both layers.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gripforce/dataset.hpp"
#include "gripforce/error.hpp"
#include "gripforce/numerics.hpp"

namespace gripforce {

inline constexpr std::string_view kGateOrder = "ifgo";

struct LstmLayerParams {
  Matrix w_ih;  // 4H x D
  Matrix w_hh;  // 4H x H
  Vector b;     // 4H

  std::size_t hidden() const { return w_hh.cols(); }
  std::size_t input_size() const { return w_ih.cols(); }

  static LstmLayerParams zeros(std::size_t input, std::size_t hidden) {
    return {Matrix(4 * hidden, input), Matrix(4 * hidden, hidden), Vector(4 * hidden, 0.0)};
  }
  bool operator==(const LstmLayerParams&) const = default;
};

struct Gradients {
  LstmLayerParams layer1;
  LstmLayerParams layer2;
  Matrix head_w;
  Vector head_b;

  bool operator==(const Gradients&) const = default;
};

struct ModelParams {
  static constexpr std::size_t horizon = kHorizon;

  LstmLayerParams layer1;  // D_in = 6
  LstmLayerParams layer2;  // D_in = H
  Matrix head_w;           // 70 x H
  Vector head_b;           // 70
  NormStats norm;

  std::size_t hidden() const { return layer1.hidden(); }
  std::size_t input_size() const { return layer1.input_size(); }
  bool operator==(const ModelParams&) const = default;
};

/// Calls f(name, shape, data) for every trainable tensor, in a fixed order.
/// Works for ModelParams and Gradients alike (const or not).
template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
  auto layer = [&](auto& l, std::string_view prefix) {
    const std::string pre(prefix);
    f(pre + ".w_ih", std::vector<std::size_t>{l.w_ih.rows(), l.w_ih.cols()}, l.w_ih.flat());
    f(pre + ".w_hh", std::vector<std::size_t>{l.w_hh.rows(), l.w_hh.cols()}, l.w_hh.flat());
    f(pre + ".b", std::vector<std::size_t>{l.b.size()}, std::span(l.b));
  };
  layer(p.layer1, "layer1");
  layer(p.layer2, "layer2");
  f(std::string("head.w"), std::vector<std::size_t>{p.head_w.rows(), p.head_w.cols()},
    p.head_w.flat());
  f(std::string("head.b"), std::vector<std::size_t>{p.head_b.size()}, std::span(p.head_b));
}

template <typename P>
Gradients zeros_like(const P& p) {
  return {LstmLayerParams::zeros(p.layer1.input_size(), p.layer1.hidden()),
          LstmLayerParams::zeros(p.layer2.input_size(), p.layer2.hidden()),
          Matrix(p.head_w.rows(), p.head_w.cols()), Vector(p.head_b.size(), 0.0)};
}

template <typename A, typename B>
bool same_shapes(const A& a, const B& b) {
  std::vector<std::vector<std::size_t>> sa, sb;
  for_each_tensor(a, [&](const std::string&, std::vector<std::size_t> s, auto) {
    sa.push_back(std::move(s));
  });
  for_each_tensor(b, [&](const std::string&, std::vector<std::size_t> s, auto) {
    sb.push_back(std::move(s));
  });
  return sa == sb;
}

/// Weights ~ U(-1/sqrt(H), 1/sqrt(H)) drawn in tensor order from Rng(seed);
/// forget-gate biases +1, other biases 0. NormStats default to identity.
inline ModelParams init_params(std::uint64_t seed, std::size_t hidden = 40,
                               std::size_t input = kWrenchChannels) {
  detail::require(hidden >= 1, "init_params: hidden must be >= 1");
  ModelParams p;
  p.layer1 = LstmLayerParams::zeros(input, hidden);
  p.layer2 = LstmLayerParams::zeros(hidden, hidden);
  p.head_w = Matrix(kHorizon, hidden);
  p.head_b = Vector(kHorizon, 0.0);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Matrix* m : {&p.layer1.w_ih, &p.layer1.w_hh, &p.layer2.w_ih, &p.layer2.w_hh, &p.head_w})
    for (double& v : m->flat()) v = rng.uniform(-bound, bound);
  for (LstmLayerParams* l : {&p.layer1, &p.layer2})
    for (std::size_t k = hidden; k < 2 * hidden; ++k) l->b[k] = 1.0;
  return p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Single cell

struct CellCache {
  Vector x, h_prev, c_prev;
  Vector preact;  // 4H, [i f g o] before nonlinearity
  Vector gates;   // 4H, [i f g o] after nonlinearity
  Vector tanh_c;
};

struct CellResult {
  Vector h;
  Vector c;
  CellCache cache;
};

namespace detail {

/// Layer weights plus transposed copies for the forward kernels.
struct PreparedLayer {
  const LstmLayerParams* p = nullptr;
  Matrix w_ih_t;
  Matrix w_hh_t;

  explicit PreparedLayer(const LstmLayerParams& layer)
      : p(&layer), w_ih_t(transpose(layer.w_ih)), w_hh_t(transpose(layer.w_hh)) {}
};

inline void cell_step(const PreparedLayer& L, std::span<const double> x,
                      std::span<const double> h_prev, std::span<const double> c_prev,
                      std::span<double> preact, std::span<double> gates, std::span<double> c,
                      std::span<double> tanh_c, std::span<double> h) {
  const std::size_t H = L.p->hidden();
  std::copy(L.p->b.begin(), L.p->b.end(), preact.begin());
  kernels::matvec_acc_transposed(L.w_ih_t, x, preact);
  kernels::matvec_acc_transposed(L.w_hh_t, h_prev, preact);
  for (std::size_t k = 0; k < 2 * H; ++k) gates[k] = sigmoid(preact[k]);
  for (std::size_t k = 2 * H; k < 3 * H; ++k) gates[k] = std::tanh(preact[k]);
  for (std::size_t k = 3 * H; k < 4 * H; ++k) gates[k] = sigmoid(preact[k]);
  for (std::size_t k = 0; k < H; ++k) {
    c[k] = gates[H + k] * c_prev[k] + gates[k] * gates[2 * H + k];
    tanh_c[k] = std::tanh(c[k]);
    h[k] = gates[3 * H + k] * tanh_c[k];
  }
}

}  // namespace detail

inline CellResult cell_forward(std::span<const double> x_t, std::span<const double> h_prev,
                               std::span<const double> c_prev, const LstmLayerParams& p) {
  const std::size_t H = p.hidden();
  detail::require(x_t.size() == p.input_size() && h_prev.size() == H && c_prev.size() == H &&
                      p.w_ih.rows() == 4 * H && p.b.size() == 4 * H,
                  "cell_forward: inconsistent shapes");
  detail::PreparedLayer L(p);
  CellResult r{Vector(H), Vector(H), {}};
  r.cache.x.assign(x_t.begin(), x_t.end());
  r.cache.h_prev.assign(h_prev.begin(), h_prev.end());
  r.cache.c_prev.assign(c_prev.begin(), c_prev.end());
  r.cache.preact.resize(4 * H);
  r.cache.gates.resize(4 * H);
  r.cache.tanh_c.resize(H);
  detail::cell_step(L, x_t, h_prev, c_prev, r.cache.preact, r.cache.gates, r.c, r.cache.tanh_c,
                    r.h);
  return r;
}

// ---------------------------------------------------------------------------
// Sequence forward / backward

/// Per-layer record of an unrolled pass. Row 0 of h and c is the zero
/// initial state; row t+1 is the state after input t.
struct LayerTrace {
  Matrix h;       // (T+1) x H
  Matrix c;       // (T+1) x H
  Matrix gates;   // T x 4H
  Matrix tanh_c;  // T x H
};

struct ForwardResult {
  Vector y_hat;  // 70, normalised units
  LayerTrace layer1;
  LayerTrace layer2;
};

namespace detail {

inline LayerTrace run_layer(const PreparedLayer& L, std::span<const double> inputs,
                            std::size_t steps) {
  const std::size_t H = L.p->hidden();
  const std::size_t D = L.p->input_size();
  LayerTrace tr{Matrix(steps + 1, H), Matrix(steps + 1, H), Matrix(steps, 4 * H),
                Matrix(steps, H)};
  Vector preact(4 * H);
  for (std::size_t t = 0; t < steps; ++t) {
    cell_step(L, inputs.subspan(t * D, D), tr.h.row(t), tr.c.row(t), preact, tr.gates.row(t),
              tr.c.row(t + 1), tr.tanh_c.row(t), tr.h.row(t + 1));
  }
  return tr;
}

/// BPTT through one layer. dh_out row t is dL/dh_{t+1} from above. Parameter
/// gradients are added to g; input gradients written to dx when non-null.
inline void layer_backward(const PreparedLayer& L, std::span<const double> inputs,
                           const LayerTrace& tr, const Matrix& dh_out, LstmLayerParams& g,
                           Matrix* dx) {
  const LstmLayerParams& p = *L.p;
  const std::size_t H = p.hidden();
  const std::size_t D = p.input_size();
  const std::size_t T = tr.gates.rows();
  Vector dh_next(H, 0.0), dc_next(H, 0.0), da(4 * H);
  // Weight gradients are summed transposed (rows of length 4H) and folded
  // into g at the end.
  Matrix g_ih_t(D, 4 * H), g_hh_t(H, 4 * H);
  for (std::size_t tt = T; tt-- > 0;) {
    auto gates = tr.gates.row(tt);
    auto tanh_c = tr.tanh_c.row(tt);
    auto c_prev = tr.c.row(tt);
    auto dho = dh_out.row(tt);
    for (std::size_t k = 0; k < H; ++k) {
      const double i = gates[k], f = gates[H + k], gg = gates[2 * H + k], o = gates[3 * H + k];
      const double dhk = dho[k] + dh_next[k];
      const double dc = dc_next[k] + dhk * o * (1.0 - tanh_c[k] * tanh_c[k]);
      da[k] = dc * gg * i * (1.0 - i);
      da[H + k] = dc * c_prev[k] * f * (1.0 - f);
      da[2 * H + k] = dc * i * (1.0 - gg * gg);
      da[3 * H + k] = dhk * tanh_c[k] * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    for (std::size_t k = 0; k < 4 * H; ++k) g.b[k] += da[k];
    auto x_t = inputs.subspan(tt * D, D);
    kernels::outer_acc(g_ih_t, x_t, da);
    kernels::outer_acc(g_hh_t, tr.h.row(tt), da);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    kernels::matvec_t_acc(p.w_hh, da, dh_next);
    if (dx) kernels::matvec_t_acc(p.w_ih, da, dx->row(tt));
  }
  for (std::size_t i = 0; i < 4 * H; ++i) {
    for (std::size_t j = 0; j < D; ++j) g.w_ih(i, j) += g_ih_t(j, i);
    for (std::size_t j = 0; j < H; ++j) g.w_hh(i, j) += g_hh_t(j, i);
  }
}

}  // namespace detail

/// Parameters prepared for repeated evaluation (transposed weight copies).
/// Holds a reference to the parameters; they must outlive this object and
/// stay unchanged while it is used.
class PreparedModel {
 public:
  explicit PreparedModel(const ModelParams& p)
      : p_(&p), l1_(p.layer1), l2_(p.layer2) {
    detail::require(p.layer2.input_size() == p.layer1.hidden() &&
                        p.head_w.cols() == p.layer2.hidden() && p.head_w.rows() == kHorizon &&
                        p.head_b.size() == kHorizon,
                    "ModelParams: inconsistent shapes");
  }

  const ModelParams& params() const { return *p_; }

  ForwardResult forward(const Matrix& x) const {
    if (x.rows() == 0) throw ContractViolation("forward: empty input sequence");
    detail::require(x.cols() == p_->input_size(),
                    "forward: input has " + std::to_string(x.cols()) + " channels, model expects " +
                        std::to_string(p_->input_size()));
    ForwardResult r;
    const std::size_t T = x.rows();
    r.layer1 = detail::run_layer(l1_, x.flat(), T);
    r.layer2 = detail::run_layer(l2_, r.layer1.h.flat().subspan(p_->hidden()), T);
    r.y_hat = p_->head_b;
    auto h_last = r.layer2.h.row(T);
    for (std::size_t k = 0; k < kHorizon; ++k) {
      auto w = p_->head_w.row(k);
      double acc = r.y_hat[k];
      for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * h_last[j];
      r.y_hat[k] = acc;
    }
    return r;
  }

  Vector predict(const Matrix& x) const { return forward(x).y_hat; }

  /// Returns the sample's MSE and adds its gradient to `grads`.
  double accumulate_gradients(const Matrix& x, std::span<const double> y_true,
                              Gradients& grads) const {
    if (y_true.size() != kHorizon)
      throw ContractViolation("backward: y_true has length " + std::to_string(y_true.size()) +
                              ", expected 70");
    const ForwardResult fr = forward(x);
    const std::size_t T = x.rows();
    const std::size_t H = p_->hidden();
    Vector dy(kHorizon);
    double loss = 0.0;
    for (std::size_t k = 0; k < kHorizon; ++k) {
      const double r = fr.y_hat[k] - y_true[k];
      loss += r * r;
      dy[k] = 2.0 * r / static_cast<double>(kHorizon);
    }
    loss /= static_cast<double>(kHorizon);

    auto h_last = fr.layer2.h.row(T);
    kernels::outer_acc(grads.head_w, dy, h_last);
    for (std::size_t k = 0; k < kHorizon; ++k) grads.head_b[k] += dy[k];
    Matrix dh2(T, H);
    kernels::matvec_t_acc(p_->head_w, dy, dh2.row(T - 1));

    Matrix dh1(T, H);
    detail::layer_backward(l2_, fr.layer1.h.flat().subspan(H), fr.layer2, dh2, grads.layer2,
                           &dh1);
    detail::layer_backward(l1_, x.flat(), fr.layer1, dh1, grads.layer1, nullptr);
    return loss;
  }

 private:
  const ModelParams* p_;
  detail::PreparedLayer l1_;
  detail::PreparedLayer l2_;
};

inline ForwardResult forward(const Matrix& x, const ModelParams& p) {
  return PreparedModel(p).forward(x);
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

inline LossAndGradients backward(const Matrix& x, std::span<const double> y_true,
                                 const ModelParams& p) {
  LossAndGradients out{0.0, zeros_like(p)};
  out.loss = PreparedModel(p).accumulate_gradients(x, y_true, out.grads);
  return out;
}

inline double mse(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size() && !a.empty(), "mse: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

/// Raw wrench window in, 70 giver grip forces in newtons out.
inline Vector predict_grip(std::span<const WrenchSample> x_raw, const ModelParams& p) {
  if (x_raw.empty()) throw ContractViolation("predict_grip: empty wrench window");
  for (std::size_t t = 0; t < x_raw.size(); ++t)
    if (!x_raw[t].finite())
      throw ContractViolation("predict_grip: non-finite wrench at step " + std::to_string(t));
  Vector y = PreparedModel(p).predict(normalize_wrench(x_raw, p.norm));
  for (double& v : y) v = denormalize_grip(v, p.norm);
  return y;
}

}  // namespace gripforce
