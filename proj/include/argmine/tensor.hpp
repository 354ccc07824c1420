#pragma once

// Small dense numeric engine: exactly the layers the classifiers need, each with
// a hand-written backward pass. Layers keep no hidden state; forward() fills an
// explicit cache when one is passed, so inference on a trained layer is const and
// can run concurrently.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/error.hpp"
#include "argmine/rng.hpp"

namespace argmine {

/// Row-major float64 array.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0) : shape_(std::move(shape)) {
    data_.assign(product(shape_), fill);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (product(shape_) != data_.size())
      throw ShapeError("tensor: shape " + shape_string(shape_) + " does not hold " + std::to_string(data_.size()) +
                       " values");
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  const double& operator[](std::size_t i) const noexcept { return data_[i]; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
  const double& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * shape_[1], shape_[1]}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * shape_[1], shape_[1]}; }

  void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Throws NumericError naming `op` if any value is NaN or infinite.
  const Tensor& check_finite(std::string_view op) const {
    if (!all_finite()) throw NumericError(std::string(op) + ": non-finite value");
    return *this;
  }

  bool operator==(const Tensor&) const = default;

  static std::size_t product(const std::vector<std::size_t>& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() noexcept { grad.fill(0.0); }
  std::size_t size() const noexcept { return value.size(); }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grads(std::span<Parameter* const> params) noexcept {
  for (auto* p : params) p->zero_grad();
}

inline std::size_t parameter_count(std::span<Parameter* const> params) noexcept {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

namespace init {

/// Uniform on +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
}

/// Writes an n x n orthogonal matrix into `out` (row stride `stride`, column
/// offset `col0`) by Gram-Schmidt on a Gaussian matrix.
inline void orthogonal_block(double* out, std::size_t stride, std::size_t col0, std::size_t n, Rng& rng) {
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double* v = &q[i * n];
    for (;;) {
      for (std::size_t j = 0; j < n; ++j) v[j] = rng.normal();
      for (std::size_t p = 0; p < i; ++p) {
        const double* u = &q[p * n];
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += u[j] * v[j];
        for (std::size_t j = 0; j < n; ++j) v[j] -= dot * u[j];
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) norm += v[j] * v[j];
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t j = 0; j < n; ++j) v[j] /= norm;
        break;
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * stride + col0 + c] = q[r * n + c];
}

}  // namespace init

// ---------------------------------------------------------------------------
// dense

/// y = xW + b for x [B x I], W [I x O], b [O].
class Dense {
 public:
  struct Cache {
    Tensor input;
  };

  Parameter W;
  Parameter b;

  Dense() = default;
  Dense(std::size_t in, std::size_t out, std::string name = "dense", bool bias = true)
      : W(name + ".W", {in, out}), has_bias_(bias) {
    if (bias) b = Parameter(name + ".b", {out});
  }

  std::size_t in() const { return W.value.dim(0); }
  std::size_t out() const { return W.value.dim(1); }
  bool has_bias() const noexcept { return has_bias_; }

  void init(Rng& rng) {
    init::glorot_uniform(W.value, in(), out(), rng);
    if (has_bias_) b.value.fill(0.0);
  }

  ParameterList parameters() {
    if (has_bias_) return {&W, &b};
    return {&W};
  }

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    if (x.rank() != 2 || x.dim(1) != in())
      throw ShapeError("dense: input " + Tensor::shape_string(x.shape()) + " vs W " +
                       Tensor::shape_string(W.value.shape()));
    const std::size_t B = x.dim(0), I = in(), O = out();
    Tensor y({B, O});
    for (std::size_t r = 0; r < B; ++r) {
      double* yr = &y(r, 0);
      if (has_bias_) std::copy_n(b.value.data(), O, yr);
      for (std::size_t i = 0; i < I; ++i) {
        const double xi = x(r, i);
        if (xi == 0.0) continue;
        const double* wi = W.value.data() + i * O;
        for (std::size_t o = 0; o < O; ++o) yr[o] += xi * wi[o];
      }
    }
    if (cache) cache->input = x;
    y.check_finite("dense");
    return y;
  }

  /// Accumulates dW, db; returns dx.
  Tensor backward(const Cache& cache, const Tensor& dy) {
    const Tensor& x = cache.input;
    const std::size_t B = x.dim(0), I = in(), O = out();
    if (dy.rank() != 2 || dy.dim(0) != B || dy.dim(1) != O) throw ShapeError("dense: gradient shape mismatch");
    Tensor dx({B, I});
    for (std::size_t r = 0; r < B; ++r) {
      const double* g = &dy(r, 0);
      if (has_bias_)
        for (std::size_t o = 0; o < O; ++o) b.grad[o] += g[o];
      for (std::size_t i = 0; i < I; ++i) {
        const double xi = x(r, i);
        double* dwi = W.grad.data() + i * O;
        const double* wi = W.value.data() + i * O;
        double acc = 0.0;
        for (std::size_t o = 0; o < O; ++o) {
          dwi[o] += xi * g[o];
          acc += wi[o] * g[o];
        }
        dx(r, i) = acc;
      }
    }
    return dx;
  }

 private:
  bool has_bias_ = true;
};

// ---------------------------------------------------------------------------
// conv1d + relu + maxpool(2)

/// Same-padded 1-D convolution over time, ReLU, then non-overlapping max-pool of
/// width 2; an odd final step is pooled alone. Input [T x C], kernels [K x W x C],
/// output [ceil(T/2) x K].
class Conv1dMaxPool {
 public:
  struct Cache {
    Tensor input;
    Tensor pre;                       // [T x K] before ReLU
    std::vector<std::size_t> argmax;  // [P x K], time index that won the pool
  };

  Parameter kernels;
  Parameter bias;

  Conv1dMaxPool() = default;
  Conv1dMaxPool(std::size_t channels, std::size_t filters, std::size_t width, std::string name = "conv")
      : kernels(name + ".kernels", {filters, width, channels}), bias(name + ".bias", {filters}) {
    if (width == 0 || filters == 0 || channels == 0) throw ShapeError("conv1d: zero-sized kernel");
  }

  std::size_t filters() const { return kernels.value.dim(0); }
  std::size_t width() const { return kernels.value.dim(1); }
  std::size_t channels() const { return kernels.value.dim(2); }

  static std::size_t pooled_length(std::size_t T) noexcept { return (T + 1) / 2; }

  void init(Rng& rng) {
    init::glorot_uniform(kernels.value, width() * channels(), width() * filters(), rng);
    bias.value.fill(0.0);
  }

  ParameterList parameters() { return {&kernels, &bias}; }

  /// Pre-activation map [T x K] (no ReLU, no pooling).
  Tensor convolve(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != channels())
      throw ShapeError("conv1d: input " + Tensor::shape_string(x.shape()) + " vs kernels " +
                       Tensor::shape_string(kernels.value.shape()));
    if (x.dim(0) == 0) throw ShapeError("conv1d: empty sequence");
    const std::size_t T = x.dim(0), K = filters(), W = width(), C = channels();
    const std::size_t pad = (W - 1) / 2;
    const double* ker = kernels.value.data();
    Tensor pre({T, K});
    for (std::size_t t = 0; t < T; ++t) {
      double* out = &pre(t, 0);
      std::copy_n(bias.value.data(), K, out);
      for (std::size_t w = 0; w < W; ++w) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + w) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* xr = &x(static_cast<std::size_t>(src), 0);
        for (std::size_t c = 0; c < C; ++c) {
          const double xv = xr[c];
          if (xv == 0.0) continue;
          const double* kp = ker + w * C + c;
          for (std::size_t k = 0; k < K; ++k) out[k] += xv * kp[k * W * C];
        }
      }
    }
    return pre;
  }

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    Tensor pre = convolve(x);
    const std::size_t T = pre.dim(0), K = filters(), P = pooled_length(T);
    Tensor y({P, K});
    std::vector<std::size_t> arg(P * K);
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t k = 0; k < K; ++k) {
        std::size_t best = 2 * p;
        if (2 * p + 1 < T && pre(2 * p + 1, k) > pre(best, k)) best = 2 * p + 1;
        y(p, k) = std::max(0.0, pre(best, k));
        arg[p * K + k] = best;
      }
    }
    y.check_finite("conv1d_maxpool");
    if (cache) {
      cache->input = x;
      cache->pre = std::move(pre);
      cache->argmax = std::move(arg);
    }
    return y;
  }

  /// Accumulates kernel and bias gradients; returns dx when `want_input_grad`.
  Tensor backward(const Cache& cache, const Tensor& dy, bool want_input_grad = true) {
    const Tensor& x = cache.input;
    const std::size_t T = x.dim(0), K = filters(), W = width(), C = channels(), P = pooled_length(T);
    if (dy.rank() != 2 || dy.dim(0) != P || dy.dim(1) != K) throw ShapeError("conv1d: gradient shape mismatch");
    const std::size_t pad = (W - 1) / 2;
    Tensor dpre({T, K});
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t t = cache.argmax[p * K + k];
        if (cache.pre(t, k) > 0.0) dpre(t, k) += dy(p, k);
      }
    Tensor dx;
    if (want_input_grad) dx = Tensor({T, C});
    const double* ker = kernels.value.data();
    double* dker = kernels.grad.data();
    for (std::size_t t = 0; t < T; ++t) {
      const double* g = &dpre(t, 0);
      bool any = false;
      for (std::size_t k = 0; k < K; ++k) {
        bias.grad[k] += g[k];
        any = any || g[k] != 0.0;
      }
      if (!any) continue;
      for (std::size_t w = 0; w < W; ++w) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + w) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const auto s = static_cast<std::size_t>(src);
        const double* xr = &x(s, 0);
        for (std::size_t c = 0; c < C; ++c) {
          const double xv = xr[c];
          const std::size_t off = w * C + c;
          double acc = 0.0;
          for (std::size_t k = 0; k < K; ++k) {
            if (xv != 0.0) dker[k * W * C + off] += g[k] * xv;
            acc += g[k] * ker[k * W * C + off];
          }
          if (want_input_grad) dx(s, c) += acc;
        }
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// global max over time

struct GlobalMaxPool {
  struct Cache {
    std::size_t steps = 0;
    std::vector<std::size_t> argmax;
  };

  /// [T x K] -> [1 x K].
  static Tensor forward(const Tensor& x, Cache* cache = nullptr) {
    if (x.rank() != 2 || x.dim(0) == 0) throw ShapeError("global max pool: expects non-empty [T x K]");
    const std::size_t T = x.dim(0), K = x.dim(1);
    Tensor y({1, K});
    std::vector<std::size_t> arg(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t t = 1; t < T; ++t)
        if (x(t, k) > x(arg[k], k)) arg[k] = t;
      y[k] = x(arg[k], k);
    }
    if (cache) {
      cache->steps = T;
      cache->argmax = std::move(arg);
    }
    return y;
  }

  static Tensor backward(const Cache& cache, const Tensor& dy) {
    const std::size_t K = cache.argmax.size();
    Tensor dx({cache.steps, K});
    for (std::size_t k = 0; k < K; ++k) dx(cache.argmax[k], k) = dy[k];
    return dx;
  }
};

// ---------------------------------------------------------------------------
// elementwise

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = std::max(0.0, v);
  return y;
}

/// Gradient of ReLU given its output.
inline Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (y[i] <= 0.0) dx[i] = 0.0;
  return dx;
}

/// Inverted dropout; `mask` receives the per-element scale (0 or 1/(1-p)).
inline Tensor dropout(const Tensor& x, double p, Rng& rng, std::vector<double>& mask) {
  mask.assign(x.size(), 1.0);
  if (p <= 0.0) return x;
  const double keep = 1.0 - p;
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    y[i] *= mask[i];
  }
  return y;
}

inline Tensor dropout_backward(const std::vector<double>& mask, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
  return dx;
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// LSTM

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

/// Single-layer LSTM, gate order (input, forget, cell, output).
/// W_x [I x 4H], W_h [H x 4H], b [4H].
class Lstm {
 public:
  struct StepCache {
    std::vector<double> x;
    std::vector<double> h_prev, c_prev;
    std::vector<double> gates;   // activated i, f, g, o (4H)
    std::vector<double> tanh_c;  // tanh of the new cell
  };
  struct Cache {
    std::vector<StepCache> steps;
  };

  Parameter Wx;
  Parameter Wh;
  Parameter b;

  Lstm() = default;
  Lstm(std::size_t input, std::size_t hidden, std::string name = "lstm")
      : Wx(name + ".Wx", {input, 4 * hidden}), Wh(name + ".Wh", {hidden, 4 * hidden}), b(name + ".b", {4 * hidden}) {
    if (input == 0 || hidden == 0) throw ShapeError("lstm: zero-sized layer");
  }

  std::size_t input_size() const { return Wx.value.dim(0); }
  std::size_t hidden() const { return Wh.value.dim(0); }

  /// Glorot input weights, orthogonal recurrent blocks, forget-gate bias 1.
  void init(Rng& rng) {
    const std::size_t H = hidden();
    init::glorot_uniform(Wx.value, input_size(), 4 * H, rng);
    for (std::size_t g = 0; g < 4; ++g) init::orthogonal_block(Wh.value.data(), 4 * H, g * H, H, rng);
    b.value.fill(0.0);
    for (std::size_t j = 0; j < H; ++j) b.value[H + j] = 1.0;
  }

  ParameterList parameters() { return {&Wx, &Wh, &b}; }

  LstmState initial_state() const { return {std::vector<double>(hidden(), 0.0), std::vector<double>(hidden(), 0.0)}; }

  /// One time step.
  LstmState step(std::span<const double> x, const LstmState& s, StepCache* cache = nullptr) const {
    const std::size_t I = input_size(), H = hidden(), G = 4 * H;
    if (x.size() != I || s.h.size() != H || s.c.size() != H) throw ShapeError("lstm_step: shape mismatch");
    std::vector<double> z(b.value.values());
    for (std::size_t i = 0; i < I; ++i) {
      if (x[i] == 0.0) continue;
      const double* w = Wx.value.data() + i * G;
      for (std::size_t k = 0; k < G; ++k) z[k] += x[i] * w[k];
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (s.h[j] == 0.0) continue;
      const double* w = Wh.value.data() + j * G;
      for (std::size_t k = 0; k < G; ++k) z[k] += s.h[j] * w[k];
    }
    LstmState out{std::vector<double>(H), std::vector<double>(H)};
    std::vector<double> tc(H);
    for (std::size_t j = 0; j < H; ++j) {
      z[j] = sigmoid(z[j]);
      z[H + j] = sigmoid(z[H + j]);
      z[2 * H + j] = std::tanh(z[2 * H + j]);
      z[3 * H + j] = sigmoid(z[3 * H + j]);
      out.c[j] = z[H + j] * s.c[j] + z[j] * z[2 * H + j];
      tc[j] = std::tanh(out.c[j]);
      out.h[j] = z[3 * H + j] * tc[j];
    }
    if (cache) {
      cache->x.assign(x.begin(), x.end());
      cache->h_prev = s.h;
      cache->c_prev = s.c;
      cache->gates = std::move(z);
      cache->tanh_c = std::move(tc);
    }
    return out;
  }

  /// Runs the whole sequence [T x I] from a zero state; returns the final h as [1 x H].
  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    if (x.rank() != 2 || x.dim(1) != input_size())
      throw ShapeError("lstm: input " + Tensor::shape_string(x.shape()) + " vs input size " +
                       std::to_string(input_size()));
    LstmState s = initial_state();
    if (cache) cache->steps.assign(x.dim(0), {});
    for (std::size_t t = 0; t < x.dim(0); ++t) s = step(x.row(t), s, cache ? &cache->steps[t] : nullptr);
    Tensor h({1, hidden()}, std::move(s.h));
    h.check_finite("lstm");
    return h;
  }

  /// Backward through one step. Takes dL/dh_t and dL/dc_t (cell path), accumulates
  /// parameter gradients, and returns (dh_prev, dc_prev); writes dx when non-null.
  LstmState step_backward(const StepCache& sc, const LstmState& d, std::vector<double>* dx = nullptr) {
    const std::size_t I = input_size(), H = hidden(), G = 4 * H;
    std::vector<double> dz(G);
    LstmState prev{std::vector<double>(H, 0.0), std::vector<double>(H)};
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sc.gates[j], f = sc.gates[H + j], g = sc.gates[2 * H + j], o = sc.gates[3 * H + j];
      const double tc = sc.tanh_c[j];
      const double dc = d.c[j] + d.h[j] * o * (1.0 - tc * tc);
      dz[j] = dc * g * i * (1.0 - i);
      dz[H + j] = dc * sc.c_prev[j] * f * (1.0 - f);
      dz[2 * H + j] = dc * i * (1.0 - g * g);
      dz[3 * H + j] = d.h[j] * tc * o * (1.0 - o);
      prev.c[j] = dc * f;
    }
    for (std::size_t k = 0; k < G; ++k) b.grad[k] += dz[k];
    for (std::size_t i = 0; i < I; ++i) {
      const double xi = sc.x[i];
      if (xi == 0.0 && dx == nullptr) continue;
      double* gw = Wx.grad.data() + i * G;
      if (xi != 0.0)
        for (std::size_t k = 0; k < G; ++k) gw[k] += xi * dz[k];
    }
    if (dx) {
      dx->assign(I, 0.0);
      for (std::size_t i = 0; i < I; ++i) {
        const double* w = Wx.value.data() + i * G;
        double acc = 0.0;
        for (std::size_t k = 0; k < G; ++k) acc += w[k] * dz[k];
        (*dx)[i] = acc;
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double hp = sc.h_prev[j];
      double* gw = Wh.grad.data() + j * G;
      const double* w = Wh.value.data() + j * G;
      double acc = 0.0;
      for (std::size_t k = 0; k < G; ++k) {
        if (hp != 0.0) gw[k] += hp * dz[k];
        acc += w[k] * dz[k];
      }
      prev.h[j] = acc;
    }
    return prev;
  }

  /// Backpropagation through time from dL/dh_T ([1 x H]); returns dx [T x I] when asked.
  Tensor backward(const Cache& cache, const Tensor& dh, bool want_input_grad = false) {
    const std::size_t H = hidden(), T = cache.steps.size();
    if (dh.size() != H) throw ShapeError("lstm: gradient shape mismatch");
    LstmState d{dh.values(), std::vector<double>(H, 0.0)};
    Tensor dx;
    if (want_input_grad) dx = Tensor({T, input_size()});
    std::vector<double> dxt;
    for (std::size_t t = T; t-- > 0;) {
      d = step_backward(cache.steps[t], d, want_input_grad ? &dxt : nullptr);
      if (want_input_grad) std::copy(dxt.begin(), dxt.end(), &dx(t, 0));
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// softmax + cross-entropy

/// Stabilised softmax of one row.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) sum += (v = std::exp(v - m));
  for (auto& v : p) v /= sum;
  return p;
}

struct SoftmaxCE {
  double loss = 0.0;
  Tensor probs;  // [B x K]
  Tensor grad;   // dloss/dlogits, [B x K]
};

/// Mean over the batch of -sum y log p, with optional per-class weights
/// (row weight = weight of its target class). Gradient is w (p - y) / B.
inline SoftmaxCE softmax_ce(const Tensor& logits, const Tensor& targets, std::span<const double> class_weights = {}) {
  if (logits.rank() != 2 || logits.shape() != targets.shape())
    throw ShapeError("softmax_ce: logits " + Tensor::shape_string(logits.shape()) + " vs targets " +
                     Tensor::shape_string(targets.shape()));
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (K < 2) throw ShapeError("softmax_ce: needs at least 2 classes");
  if (!class_weights.empty() && class_weights.size() != K) throw ShapeError("softmax_ce: class weight count");
  logits.check_finite("softmax_ce logits");
  SoftmaxCE r{0.0, Tensor({B, K}), Tensor({B, K})};
  const double inv_b = B > 0 ? 1.0 / static_cast<double>(B) : 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - m);
    const double log_sum = std::log(sum);
    double w = 1.0;
    if (!class_weights.empty()) {
      w = 0.0;
      for (std::size_t k = 0; k < K; ++k) w += targets(i, k) * class_weights[k];
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double log_p = row[k] - m - log_sum;
      const double p = std::exp(log_p);
      r.probs(i, k) = p;
      r.loss -= w * targets(i, k) * log_p * inv_b;
      r.grad(i, k) = w * (p - targets(i, k)) * inv_b;
    }
  }
  return r;
}

/// One-hot rows for class indices.
inline Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw ShapeError("one_hot: label out of range");
    t(i, labels[i]) = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// optimisation

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by position in the
/// parameter list, which must stay the same between calls.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return t_; }

  void step(std::span<Parameter* const> params) {
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t n = 0; n < params.size(); ++n) {
      Parameter& p = *params[n];
      if (m_[n].size() != p.size()) throw ShapeError("adam: parameter '" + p.name + "' changed size");
      auto& m = m_[n];
      auto& v = v_[n];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        p.value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      }
      p.value.check_finite("adam update of " + p.name);
    }
  }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

inline double global_grad_norm(std::span<Parameter* const> params) noexcept {
  double ss = 0.0;
  for (const auto* p : params)
    for (double g : p->grad.values()) ss += g * g;
  return std::sqrt(ss);
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(std::span<Parameter* const> params, double max_norm) noexcept {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (auto& g : p->grad.values()) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// finite-difference gradient check

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t coords_per_parameter = 50;  // all coordinates when the parameter is smaller
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator max(|analytic|, |numeric|).
  /// Central differences at step 1e-5 carry ~1e-11 absolute round-off, which
  /// would otherwise swamp coordinates whose true gradient is ~0.
  double denominator_floor = 1e-4;
};

struct GradCheckEntry {
  std::string parameter;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const noexcept {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

inline double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

/// `loss()` evaluates the objective at the current parameter values without
/// touching gradients; `analytic()` zeroes and recomputes every gradient.
/// Both must be deterministic (no dropout).
template <class LossFn, class GradFn>
GradCheckResult gradient_check(std::span<Parameter* const> params, LossFn&& loss, GradFn&& analytic,
                               const GradCheckOptions& opt = {}) {
  analytic();
  Rng rng(opt.seed);
  GradCheckResult result;
  for (auto* p : params) {
    GradCheckEntry e{p->name};
    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.coords_per_parameter) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(opt.coords_per_parameter);
    }
    for (auto i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + opt.step;
      const double up = loss();
      p->value[i] = saved - opt.step;
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = p->grad[i];
      e.max_rel_error = std::max(e.max_rel_error, relative_error(a, numeric, opt.denominator_floor));
      e.max_abs_error = std::max(e.max_abs_error, std::abs(a - numeric));
    }
    e.coords = coords.size();
    result.entries.push_back(std::move(e));
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoints
//
// Layout (all integers little-endian, floats IEEE-754 binary64 little-endian):
//   8 bytes   magic "ARGMCKPT"
//   u32       format version (1)
//   u64       length of the config block, then that many bytes of UTF-8 JSON
//   u32       tensor count
//   per tensor:
//     u32     name length, then the name bytes
//     u32     rank, then rank x u64 dims
//     f64     product(dims) values, row-major

struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(std::string_view name) const noexcept {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline constexpr std::array<char, 8> kCheckpointMagic{'A', 'R', 'G', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline void put(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, bytes);
}

inline std::uint64_t get(std::istream& in, int bytes) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), bytes)) throw ParseError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (std::uint64_t{1} << 32)) throw ParseError("checkpoint: implausible block length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint: truncated file");
  return s;
}

}  // namespace ckpt_detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  using ckpt_detail::put;
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put(out, kCheckpointVersion, 4);
  const std::string cfg = ck.config.dump();
  put(out, cfg.size(), 8);
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put(out, ck.tensors.size(), 4);
  for (const auto& [name, t] : ck.tensors) {
    put(out, name.size(), 4);
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, t.rank(), 4);
    for (auto d : t.shape()) put(out, d, 8);
    for (double v : t.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put(out, bits, 8);
    }
  }
  if (!out) throw Error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using ckpt_detail::get;
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw ParseError("checkpoint: bad magic");
  const auto version = get(in, 4);
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.config = nlohmann::json::parse(ckpt_detail::get_bytes(in, get(in, 8)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: config block: ") + e.what());
  }
  const auto n = get(in, 4);
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string name = ckpt_detail::get_bytes(in, get(in, 4));
    const auto rank = get(in, 4);
    if (rank > 8) throw ParseError("checkpoint: tensor '" + name + "' has implausible rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get(in, 8));
    const std::size_t count = Tensor::product(shape);
    if (count > (std::size_t{1} << 31)) throw ParseError("checkpoint: tensor '" + name + "' too large");
    std::vector<double> data(count);
    for (auto& v : data) {
      const std::uint64_t bits = get(in, 8);
      std::memcpy(&v, &bits, sizeof v);
    }
    ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace argmine
