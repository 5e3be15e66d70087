#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddcnn/error.hpp"
#include "ddcnn/parallel.hpp"
#include "ddcnn/rng.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

/// Per-side zero padding of a convolution.
struct Padding {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  /// Size-preserving padding for a stride-1 k x k kernel. Odd k pads
  /// symmetrically; even k puts the extra row/column on the bottom/right.
  static Padding same(int kernel) noexcept {
    const int lead = (kernel - 1) / 2;
    const int trail = kernel - 1 - lead;
    return {lead, lead, trail, trail};
  }

  friend bool operator==(const Padding&, const Padding&) = default;
};

/// Stride-1 2-D cross-correlation with per-side zero padding. Weights are
/// laid out (c_out, c_in, k, k).
template <typename T>
struct ConvLayer {
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  Padding pad;
  std::vector<T> weight;
  std::vector<T> bias;

  ConvLayer() = default;
  ConvLayer(int in_channels, int out_channels, int kernel_size)
      : ConvLayer(in_channels, out_channels, kernel_size, Padding::same(kernel_size)) {}
  ConvLayer(int in_channels, int out_channels, int kernel_size, Padding padding)
      : c_in(in_channels), c_out(out_channels), kernel(kernel_size), pad(padding) {
    if (c_in < 1 || c_out < 1 || kernel < 1) throw Error(Errc::InvalidShape, "conv extents must be positive");
    if (pad.top < 0 || pad.left < 0 || pad.bottom < 0 || pad.right < 0 || pad.top + pad.bottom != kernel - 1 ||
        pad.left + pad.right != kernel - 1) {
      throw Error(Errc::InvalidShape, "conv padding must total kernel-1 per axis to preserve size");
    }
    weight.assign(static_cast<std::size_t>(c_out) * c_in * kernel * kernel, T{0});
    bias.assign(static_cast<std::size_t>(c_out), T{0});
  }

  std::size_t weight_index(int co, int ci, int ky, int kx) const noexcept {
    return ((static_cast<std::size_t>(co) * c_in + ci) * kernel + ky) * kernel + kx;
  }

  template <typename U>
  ConvLayer<U> cast() const {
    ConvLayer<U> out(c_in, c_out, kernel, pad);
    std::copy(weight.begin(), weight.end(), out.weight.begin());
    std::copy(bias.begin(), bias.end(), out.bias.begin());
    return out;
  }
};

template <typename T>
struct ConvGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_w;
  std::vector<T> grad_b;
};

namespace detail {

// Output rows y for which y + k - pad lands inside [0, extent).
inline std::pair<int, int> valid_range(int k, int pad, int extent) noexcept {
  return {std::max(0, pad - k), std::min(extent, extent + pad - k)};
}

template <typename T>
void check_conv_input(const Tensor4<T>& x, const ConvLayer<T>& layer) {
  if (x.c() != layer.c_in) {
    throw Error(Errc::ShapeMismatch, "conv expects " + std::to_string(layer.c_in) + " input channels, got " +
                                         std::to_string(x.c()));
  }
  if (layer.weight.size() != static_cast<std::size_t>(layer.c_out) * layer.c_in * layer.kernel * layer.kernel ||
      layer.bias.size() != static_cast<std::size_t>(layer.c_out)) {
    throw Error(Errc::ShapeMismatch, "conv parameter arrays do not match layer shape");
  }
}

}  // namespace detail

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvLayer<T>& layer) {
  detail::check_conv_input(x, layer);
  require_finite(x, "conv input");
  require_finite(std::span<const T>(layer.weight), "conv weights");
  require_finite(std::span<const T>(layer.bias), "conv bias");

  const int h = x.h();
  const int w = x.w();
  const int k = layer.kernel;
  Tensor4<T> out(x.n(), layer.c_out, h, w);
  parallel_for(static_cast<std::size_t>(x.n()), [&](std::size_t ni) {
    const int n = static_cast<int>(ni);
    for (int co = 0; co < layer.c_out; ++co) {
      T* dst = out.plane_ptr(n, co);
      std::fill(dst, dst + out.plane(), layer.bias[co]);
      for (int ci = 0; ci < layer.c_in; ++ci) {
        const T* src = x.plane_ptr(n, ci);
        for (int ky = 0; ky < k; ++ky) {
          const auto [y0, y1] = detail::valid_range(ky, layer.pad.top, h);
          for (int kx = 0; kx < k; ++kx) {
            const auto [x0, x1] = detail::valid_range(kx, layer.pad.left, w);
            const T wgt = layer.weight[layer.weight_index(co, ci, ky, kx)];
            const int dy = ky - layer.pad.top;
            const int dx = kx - layer.pad.left;
            for (int y = y0; y < y1; ++y) {
              T* row = dst + static_cast<std::size_t>(y) * w;
              const T* in = src + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
              for (int xx = x0; xx < x1; ++xx) row[xx] += wgt * in[xx];
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const ConvLayer<T>& layer, const Tensor4<T>& grad_out) {
  detail::check_conv_input(x, layer);
  if (grad_out.n() != x.n() || grad_out.c() != layer.c_out || grad_out.h() != x.h() || grad_out.w() != x.w()) {
    throw Error(Errc::ShapeMismatch, "conv grad_out shape " + grad_out.shape_string() + " does not match forward");
  }
  require_finite(grad_out, "conv grad_out");

  const int h = x.h();
  const int w = x.w();
  const int k = layer.kernel;
  const std::size_t wsize = layer.weight.size();
  ConvGrads<T> g{Tensor4<T>(x.n(), x.c(), h, w), std::vector<T>(wsize, T{0}),
                 std::vector<T>(static_cast<std::size_t>(layer.c_out), T{0})};

  // Per-sample partial sums, reduced afterwards in sample order so results
  // do not depend on the thread count.
  std::vector<double> partial_w(static_cast<std::size_t>(x.n()) * wsize, 0.0);
  std::vector<double> partial_b(static_cast<std::size_t>(x.n()) * layer.c_out, 0.0);

  parallel_for(static_cast<std::size_t>(x.n()), [&](std::size_t ni) {
    const int n = static_cast<int>(ni);
    double* pw = partial_w.data() + ni * wsize;
    double* pb = partial_b.data() + ni * static_cast<std::size_t>(layer.c_out);
    for (int co = 0; co < layer.c_out; ++co) {
      const T* go = grad_out.plane_ptr(n, co);
      double sum = 0.0;
      for (std::size_t i = 0; i < grad_out.plane(); ++i) sum += go[i];
      pb[co] = sum;
    }
    for (int ci = 0; ci < layer.c_in; ++ci) {
      const T* src = x.plane_ptr(n, ci);
      T* gx = g.grad_x.plane_ptr(n, ci);
      for (int co = 0; co < layer.c_out; ++co) {
        const T* go = grad_out.plane_ptr(n, co);
        for (int ky = 0; ky < k; ++ky) {
          const auto [y0, y1] = detail::valid_range(ky, layer.pad.top, h);
          const int dy = ky - layer.pad.top;
          for (int kx = 0; kx < k; ++kx) {
            const auto [x0, x1] = detail::valid_range(kx, layer.pad.left, w);
            const int dx = kx - layer.pad.left;
            const std::size_t wi = layer.weight_index(co, ci, ky, kx);
            const T wgt = layer.weight[wi];
            double dot = 0.0;
            for (int y = y0; y < y1; ++y) {
              const T* grow = go + static_cast<std::size_t>(y) * w;
              const std::ptrdiff_t in_off = static_cast<std::ptrdiff_t>(y + dy) * w + dx;
              const T* in = src + in_off;
              T* gxr = gx + in_off;
              T row_dot = T{0};
              for (int xx = x0; xx < x1; ++xx) {
                gxr[xx] += wgt * grow[xx];
                row_dot += grow[xx] * in[xx];
              }
              dot += row_dot;
            }
            pw[wi] += dot;
          }
        }
      }
    }
  });

  for (int n = 0; n < x.n(); ++n) {
    const double* pw = partial_w.data() + static_cast<std::size_t>(n) * wsize;
    const double* pb = partial_b.data() + static_cast<std::size_t>(n) * layer.c_out;
    for (std::size_t i = 0; i < wsize; ++i) g.grad_w[i] += static_cast<T>(pw[i]);
    for (int co = 0; co < layer.c_out; ++co) g.grad_b[co] += static_cast<T>(pb[co]);
  }
  return g;
}

enum class Mode { Train, Eval };

/// Per-channel batch normalisation. Running variance is tracked with the
/// unbiased estimator; normalisation uses the biased batch variance.
template <typename T>
struct BatchNormLayer {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;
  /// Train-mode batches folded into the running statistics so far.
  std::int64_t tracked_batches = 0;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int channels)
      : gamma(static_cast<std::size_t>(channels), T{1}),
        beta(static_cast<std::size_t>(channels), T{0}),
        running_mean(static_cast<std::size_t>(channels), T{0}),
        running_var(static_cast<std::size_t>(channels), T{1}) {}

  int channels() const noexcept { return static_cast<int>(gamma.size()); }

  template <typename U>
  BatchNormLayer<U> cast() const {
    BatchNormLayer<U> out(channels());
    std::copy(gamma.begin(), gamma.end(), out.gamma.begin());
    std::copy(beta.begin(), beta.end(), out.beta.begin());
    std::copy(running_mean.begin(), running_mean.end(), out.running_mean.begin());
    std::copy(running_var.begin(), running_var.end(), out.running_var.begin());
    out.epsilon = epsilon;
    out.momentum = momentum;
    out.tracked_batches = tracked_batches;
    return out;
  }
};

/// Values saved by a train-mode forward for the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor4<T> x_hat;
  std::vector<double> inv_std;
};

/// Normalises x. In train mode, batch statistics are used and, when
/// update_stats is set, the running statistics move by `momentum`.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNormLayer<T>& layer, Mode mode,
                             BatchNormCache<T>* cache = nullptr, bool update_stats = true) {
  const int channels = layer.channels();
  if (x.c() != channels || layer.beta.size() != layer.gamma.size() || layer.running_mean.size() != layer.gamma.size() ||
      layer.running_var.size() != layer.gamma.size()) {
    throw Error(Errc::ShapeMismatch, "batchnorm expects " + std::to_string(channels) + " channels, got " +
                                         std::to_string(x.c()));
  }
  if (!(layer.epsilon > 0.0)) throw Error(Errc::InvalidArgument, "batchnorm epsilon must be positive");
  require_finite(x, "batchnorm input");

  const std::size_t count = static_cast<std::size_t>(x.n()) * x.plane();
  Tensor4<T> out(x.n(), x.c(), x.h(), x.w());
  if (cache != nullptr) {
    cache->x_hat = Tensor4<T>(x.n(), x.c(), x.h(), x.w());
    cache->inv_std.assign(static_cast<std::size_t>(channels), 0.0);
  }

  if (mode == Mode::Train && count < 2) {
    throw Error(Errc::DegenerateBatch, "train-mode batchnorm needs at least 2 values per channel");
  }

  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for (int n = 0; n < x.n(); ++n) {
        const T* p = x.plane_ptr(n, c);
        for (std::size_t i = 0; i < x.plane(); ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (int n = 0; n < x.n(); ++n) {
        const T* p = x.plane_ptr(n, c);
        for (std::size_t i = 0; i < x.plane(); ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      if (update_stats) {
        const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
        layer.running_mean[c] = static_cast<T>((1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mean);
        layer.running_var[c] =
            static_cast<T>((1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * unbiased);
      }
    } else {
      mean = layer.running_mean[c];
      var = layer.running_var[c];
      if (!(var >= 0.0)) throw Error(Errc::InvalidArgument, "batchnorm running variance must be non-negative");
    }
    const double inv_std = 1.0 / std::sqrt(var + layer.epsilon);
    const double scale = layer.gamma[c] * inv_std;
    const double shift = layer.beta[c] - mean * scale;
    for (int n = 0; n < x.n(); ++n) {
      const T* p = x.plane_ptr(n, c);
      T* o = out.plane_ptr(n, c);
      T* xh = cache != nullptr ? cache->x_hat.plane_ptr(n, c) : nullptr;
      for (std::size_t i = 0; i < x.plane(); ++i) {
        o[i] = static_cast<T>(p[i] * scale + shift);
        if (xh != nullptr) xh[i] = static_cast<T>((p[i] - mean) * inv_std);
      }
    }
    if (cache != nullptr) cache->inv_std[c] = inv_std;
  }
  if (mode == Mode::Train && update_stats) ++layer.tracked_batches;
  return out;
}

template <typename T>
struct BatchNormGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
};

/// Backward of a train-mode forward (batch statistics are functions of x).
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const BatchNormLayer<T>& layer,
                                     const Tensor4<T>& grad_out) {
  if (!grad_out.same_shape(cache.x_hat)) throw Error(Errc::ShapeMismatch, "batchnorm grad_out shape mismatch");
  require_finite(grad_out, "batchnorm grad_out");
  const int channels = layer.channels();
  const double count = static_cast<double>(grad_out.n()) * static_cast<double>(grad_out.plane());
  BatchNormGrads<T> g{Tensor4<T>(grad_out.n(), grad_out.c(), grad_out.h(), grad_out.w()),
                      std::vector<T>(static_cast<std::size_t>(channels)),
                      std::vector<T>(static_cast<std::size_t>(channels))};
  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < grad_out.n(); ++n) {
      const T* dy = grad_out.plane_ptr(n, c);
      const T* xh = cache.x_hat.plane_ptr(n, c);
      for (std::size_t i = 0; i < grad_out.plane(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    g.grad_gamma[c] = static_cast<T>(sum_dy_xhat);
    g.grad_beta[c] = static_cast<T>(sum_dy);
    const double factor = layer.gamma[c] * cache.inv_std[c] / count;
    for (int n = 0; n < grad_out.n(); ++n) {
      const T* dy = grad_out.plane_ptr(n, c);
      const T* xh = cache.x_hat.plane_ptr(n, c);
      T* dx = g.grad_x.plane_ptr(n, c);
      for (std::size_t i = 0; i < grad_out.plane(); ++i) {
        dx[i] = static_cast<T>(factor * (count * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  require_finite(x, "relu input");
  Tensor4<T> out = x;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

/// Gradient through ReLU given the forward output (output > 0 iff input > 0).
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& output, const Tensor4<T>& grad_out) {
  if (!output.same_shape(grad_out)) throw Error(Errc::ShapeMismatch, "relu grad_out shape mismatch");
  Tensor4<T> g = grad_out;
  const auto out = output.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    if (!(out[i] > T{0})) gv[i] = T{0};
  }
  return g;
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad;
};

/// Mean squared error over all elements and its gradient 2 (pred - target) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  if (!pred.same_shape(target)) {
    throw Error(Errc::ShapeMismatch, "mse shapes differ: " + pred.shape_string() + " vs " + target.shape_string());
  }
  require_finite(pred, "mse prediction");
  require_finite(target, "mse target");
  LossResult<T> r{0.0, Tensor4<T>(pred.n(), pred.c(), pred.h(), pred.w())};
  const auto p = pred.values();
  const auto t = target.values();
  auto g = r.grad.values();
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    r.loss += d * d;
    g[i] = static_cast<T>(2.0 * d / n);
  }
  if (!p.empty()) r.loss /= n;
  return r;
}

/// Adam hyper-parameters and moment accumulators. One moment vector per
/// parameter array, in the order the parameters are passed to adam_step.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

template <typename T>
struct ParamRef {
  std::span<T> value;
  std::span<const T> grad;
};

/// One bias-corrected Adam update over all parameter arrays. Moments are
/// allocated on the first call.
template <typename T>
void adam_step(std::span<const ParamRef<T>> params, AdamState& state) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "Adam state tracks " + std::to_string(state.m.size()) + " arrays, got " +
                                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value.size() != params[i].grad.size() || state.m[i].size() != params[i].value.size() ||
        state.v[i].size() != params[i].value.size()) {
      throw Error(Errc::ShapeMismatch, "Adam parameter/gradient/moment sizes differ for array " + std::to_string(i));
    }
    require_finite(params[i].grad, "Adam gradient");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& p = params[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p.value[j] = static_cast<T>(p.value[j] - state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

/// Weights of the given shape whose (shape[0] x rest) matrix has orthonormal
/// rows, or orthonormal columns when there are more rows than columns.
std::vector<double> orthogonal_init(std::span<const int> shape, std::uint64_t seed);

}  // namespace ddcnn
