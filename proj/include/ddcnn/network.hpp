#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ddcnn/layers.hpp"

namespace ddcnn {

/// Conv, then optional batch norm, then optional ReLU.
template <typename T>
struct Block {
  ConvLayer<T> conv;
  std::optional<BatchNormLayer<T>> bn;
  bool relu = false;
};

/// Activations kept by Network::forward for the backward pass.
template <typename T>
struct ForwardTrace {
  Mode mode = Mode::Eval;
  std::vector<Tensor4<T>> inputs;   // input of block i
  std::vector<Tensor4<T>> outputs;  // output of block i
  std::vector<BatchNormCache<T>> bn;
};

/// Gradients in parameters() order.
template <typename T>
using ParamGrads = std::vector<std::vector<T>>;

/// Plain feed-forward stack of blocks. Also serves as a "model fragment"
/// for gradient checks.
template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Block<T>> blocks) : blocks_(std::move(blocks)) {}

  std::vector<Block<T>>& blocks() noexcept { return blocks_; }
  const std::vector<Block<T>>& blocks() const noexcept { return blocks_; }

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, ForwardTrace<T>* trace = nullptr, bool update_stats = true) {
    if (trace != nullptr) {
      trace->mode = mode;
      trace->inputs.clear();
      trace->outputs.clear();
      trace->bn.assign(blocks_.size(), BatchNormCache<T>{});
    }
    Tensor4<T> h = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& b = blocks_[i];
      if (trace != nullptr) trace->inputs.push_back(h);
      h = conv2d_forward(h, b.conv);
      if (b.bn) h = batchnorm_forward(h, *b.bn, mode, trace != nullptr ? &trace->bn[i] : nullptr, update_stats);
      if (b.relu) h = relu(h);
      if (trace != nullptr) trace->outputs.push_back(h);
    }
    return h;
  }

  /// Eval-mode forward on a shared (const) network; never touches running stats.
  Tensor4<T> infer(const Tensor4<T>& x) const {
    Tensor4<T> h = x;
    for (const auto& b : blocks_) {
      h = conv2d_forward(h, b.conv);
      if (b.bn) {
        BatchNormLayer<T> bn = *b.bn;
        h = batchnorm_forward(h, bn, Mode::Eval);
      }
      if (b.relu) h = relu(h);
    }
    return h;
  }

  /// Backpropagates grad_out through a train-mode trace (or an eval trace of a
  /// network without batch norm). Optionally returns the input gradient.
  ParamGrads<T> backward(const ForwardTrace<T>& trace, const Tensor4<T>& grad_out,
                         Tensor4<T>* grad_input = nullptr) const {
    if (trace.inputs.size() != blocks_.size()) throw Error(Errc::ShapeMismatch, "trace does not match network");
    ParamGrads<T> grads(parameter_array_count());
    Tensor4<T> g = grad_out;
    std::size_t slot = grads.size();
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const auto& b = blocks_[i];
      if (b.relu) g = relu_backward(trace.outputs[i], g);
      if (b.bn) {
        if (trace.mode != Mode::Train) {
          throw Error(Errc::InvalidArgument, "backward through batch norm needs a train-mode trace");
        }
        auto bg = batchnorm_backward(trace.bn[i], *b.bn, g);
        grads[--slot] = std::move(bg.grad_beta);
        grads[--slot] = std::move(bg.grad_gamma);
        g = std::move(bg.grad_x);
      }
      auto cg = conv2d_backward(trace.inputs[i], b.conv, g);
      grads[--slot] = std::move(cg.grad_b);
      grads[--slot] = std::move(cg.grad_w);
      g = std::move(cg.grad_x);
    }
    if (grad_input != nullptr) *grad_input = std::move(g);
    return grads;
  }

  std::size_t parameter_array_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.bn ? 4 : 2;
    return n;
  }

  /// Trainable arrays: conv weight, conv bias, then gamma and beta when batch norm is present.
  std::vector<std::span<T>> parameters() {
    std::vector<std::span<T>> out;
    for (auto& b : blocks_) {
      out.emplace_back(b.conv.weight);
      out.emplace_back(b.conv.bias);
      if (b.bn) {
        out.emplace_back(b.bn->gamma);
        out.emplace_back(b.bn->beta);
      }
    }
    return out;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks_) {
      n += b.conv.weight.size() + b.conv.bias.size();
      if (b.bn) n += 2 * b.bn->gamma.size();
    }
    return n;
  }

  template <typename U>
  Network<U> cast() const {
    std::vector<Block<U>> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) {
      Block<U> nb;
      nb.conv = b.conv.template cast<U>();
      if (b.bn) nb.bn = b.bn->template cast<U>();
      nb.relu = b.relu;
      out.push_back(std::move(nb));
    }
    return Network<U>(std::move(out));
  }

 private:
  std::vector<Block<T>> blocks_;
};

/// Pairs parameter arrays with their gradients for adam_step.
template <typename T>
std::vector<ParamRef<T>> param_refs(Network<T>& net, const ParamGrads<T>& grads) {
  auto params = net.parameters();
  if (params.size() != grads.size()) throw Error(Errc::ShapeMismatch, "gradient list does not match parameters");
  std::vector<ParamRef<T>> refs;
  refs.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) refs.push_back({params[i], std::span<const T>(grads[i])});
  return refs;
}

}  // namespace ddcnn
