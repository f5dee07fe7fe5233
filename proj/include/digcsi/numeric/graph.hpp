#pragma once

// A fixed-topology computation graph: an ordered tape of layers that caches
// the activations each layer needs and replays them in reverse on backward.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "digcsi/numeric/ops.hpp"
#include "digcsi/numeric/parameters.hpp"

namespace digcsi::numeric {

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  /// Computes the output and caches what backward needs.
  virtual Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& x) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the last forward input.
  virtual Tensor<T> backward(ParameterSet<T>& params, const Tensor<T>& grad_y) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
};

template <class T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(std::size_t weight, std::size_t bias, std::size_t stride)
      : weight_(weight), bias_(bias), stride_(stride) {}

  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x) override {
    input_ = x;
    return conv2d(x, p[weight_].value, p[bias_].value, stride_);
  }
  Tensor<T> backward(ParameterSet<T>& p, const Tensor<T>& gy) override {
    return conv2d_backward(input_, p[weight_].value, stride_, gy, p[weight_].grad, p[bias_].grad);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<Conv2dLayer>(weight_, bias_, stride_);
  }
  std::string kind() const override { return "conv2d"; }

 private:
  std::size_t weight_, bias_, stride_;
  Tensor<T> input_;
};

template <class T>
class TConv2dLayer final : public Layer<T> {
 public:
  TConv2dLayer(std::size_t weight, std::size_t bias) : weight_(weight), bias_(bias) {}

  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x) override {
    input_ = x;
    return tconv2d(x, p[weight_].value, p[bias_].value);
  }
  Tensor<T> backward(ParameterSet<T>& p, const Tensor<T>& gy) override {
    return tconv2d_backward(input_, p[weight_].value, gy, p[weight_].grad, p[bias_].grad);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<TConv2dLayer>(weight_, bias_);
  }
  std::string kind() const override { return "tconv2d"; }

 private:
  std::size_t weight_, bias_;
  Tensor<T> input_;
};

template <class T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::size_t weight, std::size_t bias) : weight_(weight), bias_(bias) {}

  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x) override {
    input_ = x;
    return dense(x, p[weight_].value, p[bias_].value);
  }
  Tensor<T> backward(ParameterSet<T>& p, const Tensor<T>& gy) override {
    return dense_backward(input_, p[weight_].value, gy, p[weight_].grad, p[bias_].grad);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<DenseLayer>(weight_, bias_);
  }
  std::string kind() const override { return "dense"; }

 private:
  std::size_t weight_, bias_;
  Tensor<T> input_;
};

template <class T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation kind) : kind_(kind) {}

  Tensor<T> forward(const ParameterSet<T>&, const Tensor<T>& x) override {
    input_ = x;
    output_ = activate(x, kind_);
    return output_;
  }
  Tensor<T> backward(ParameterSet<T>&, const Tensor<T>& gy) override {
    return activate_backward(input_, output_, gy, kind_);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ActivationLayer>(kind_);
  }
  std::string kind() const override {
    return kind_ == Activation::tanh ? "tanh" : "leaky_relu";
  }

 private:
  Activation kind_;
  Tensor<T> input_, output_;
};

/// Reshapes everything but the leading batch axis.
template <class T>
class ReshapeLayer final : public Layer<T> {
 public:
  explicit ReshapeLayer(Shape per_sample) : per_sample_(std::move(per_sample)) {}

  Tensor<T> forward(const ParameterSet<T>&, const Tensor<T>& x) override {
    input_shape_ = x.shape();
    Shape s{x.dim(0)};
    s.insert(s.end(), per_sample_.begin(), per_sample_.end());
    return x.reshaped(std::move(s));
  }
  Tensor<T> backward(ParameterSet<T>&, const Tensor<T>& gy) override {
    return gy.reshaped(input_shape_);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ReshapeLayer>(per_sample_);
  }
  std::string kind() const override { return "reshape"; }

 private:
  Shape per_sample_;
  Shape input_shape_;
};

template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) *this = Sequential(other);
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class L, class... Args>
  void emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
  }
  void push(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& x) {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(params, h);
    return h;
  }

  Tensor<T> backward(ParameterSet<T>& params, const Tensor<T>& grad_y) {
    Tensor<T> g = grad_y;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(params, g);
    return g;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = x + body(x)
template <class T>
class ResidualLayer final : public Layer<T> {
 public:
  explicit ResidualLayer(Sequential<T> body) : body_(std::move(body)) {}

  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x) override {
    Tensor<T> y = body_.forward(p, x);
    if (y.shape() != x.shape()) throw ShapeError("residual: body changes the shape");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }
  Tensor<T> backward(ParameterSet<T>& p, const Tensor<T>& gy) override {
    Tensor<T> g = body_.backward(p, gy);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
    return g;
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ResidualLayer>(body_);
  }
  std::string kind() const override { return "residual"; }

 private:
  Sequential<T> body_;
};

/// A parameter set together with the graph that consumes it.
template <class T>
struct Network {
  ParameterSet<T> params;
  Sequential<T> graph;

  Tensor<T> forward(const Tensor<T>& x) { return graph.forward(params, x); }
  Tensor<T> backward(const Tensor<T>& grad_y) { return graph.backward(params, grad_y); }
};

// Builders used by both architectures. They register parameters under
// `name.weight` / `name.bias` and draw Kaiming-uniform weights with zero biases.

template <class T>
void add_conv(ParameterSet<T>& params, Sequential<T>& graph, const std::string& name, std::size_t cin, std::size_t cout,
              std::size_t stride, Rng& rng) {
  const std::size_t w = params.add(name + ".weight", {cout, cin, kKernel, kKernel});
  const std::size_t b = params.add(name + ".bias", {cout});
  kaiming_uniform(params[w].value, static_cast<double>(cin * kTaps), rng);
  graph.template emplace<Conv2dLayer<T>>(w, b, stride);
}

template <class T>
void add_tconv(ParameterSet<T>& params, Sequential<T>& graph, const std::string& name, std::size_t cin, std::size_t cout,
               Rng& rng) {
  const std::size_t w = params.add(name + ".weight", {cin, cout, kKernel, kKernel});
  const std::size_t b = params.add(name + ".bias", {cout});
  // each output pixel of a stride-2 transpose sees about a quarter of the taps
  kaiming_uniform(params[w].value, static_cast<double>(cin * kTaps) / 4.0, rng);
  graph.template emplace<TConv2dLayer<T>>(w, b);
}

template <class T>
void add_dense(ParameterSet<T>& params, Sequential<T>& graph, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng) {
  const std::size_t w = params.add(name + ".weight", {in, out});
  const std::size_t b = params.add(name + ".bias", {out});
  kaiming_uniform(params[w].value, static_cast<double>(in), rng);
  graph.template emplace<DenseLayer<T>>(w, b);
}

}  // namespace digcsi::numeric
