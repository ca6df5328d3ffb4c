#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctaug/rng.hpp"
#include "ctaug/tensor.hpp"

// Minimal training engine: layers with explicit forward/backward, NCHW
// layout, all dense math routed through the kernels layer. Instantiated for
// float (training) and double (finite-difference gradient checks).
namespace ctaug::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad.zero(); }
};

enum class Mode { train, eval };

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  // Uses state cached by the last train-mode forward; parameter gradients
  // accumulate until zero_grad.
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual void collect_params(const std::string& /*prefix*/,
                              std::vector<Param<T>*>& /*out*/) {}
  virtual nlohmann::json spec() const = 0;
  virtual void release_caches() {}
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  Layer<T>& layer(size_t i) { return *layers_[i]; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override;

  std::vector<Param<T>*> params();

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
         int64_t pad, bool bias = true);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int64_t in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  Param<T> weight_;  // [out, in, k, k]
  Param<T> bias_;    // [out]
  Tensor<T> x_;
  std::vector<T> col_;
};

template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                  int64_t pad, int64_t output_pad, bool bias = true);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

 private:
  int64_t in_ch_, out_ch_, kernel_, stride_, pad_, output_pad_;
  bool has_bias_;
  Param<T> weight_;  // [in, out, k, k]
  Param<T> bias_;    // [out]
  Tensor<T> x_;
  std::vector<T> col_;
};

template <typename T>
class ReflectPad2d : public Layer<T> {
 public:
  explicit ReflectPad2d(int64_t pad);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;

 private:
  int64_t pad_;
  std::vector<int64_t> in_shape_;
};

template <typename T>
class InstanceNorm2d : public Layer<T> {
 public:
  explicit InstanceNorm2d(int64_t channels, bool affine = false,
                          double eps = 1e-5);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override {
    xhat_ = Tensor<T>();
    invstd_.clear();
  }

 private:
  int64_t channels_;
  bool affine_;
  double eps_;
  Param<T> gamma_, beta_;
  Tensor<T> xhat_;
  std::vector<T> invstd_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

 private:
  Tensor<T> x_;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

 private:
  double slope_;
  Tensor<T> x_;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;
  void release_caches() override { y_ = Tensor<T>(); }

 private:
  Tensor<T> y_;
};

template <typename T>
class Gelu : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

 private:
  Tensor<T> x_;
};

template <typename T>
class Linear : public Layer<T> {
 public:
  Linear(int64_t in_features, int64_t out_features, bool bias = true);
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override { x_ = Tensor<T>(); }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  int64_t in_features() const { return in_; }

 private:
  int64_t in_, out_;
  bool has_bias_;
  Param<T> weight_;  // [out, in]
  Param<T> bias_;    // [out]
  Tensor<T> x_;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  nlohmann::json spec() const override;

 private:
  std::vector<int64_t> in_shape_;
};

// y = x + body(x)
template <typename T>
class Residual : public Layer<T> {
 public:
  explicit Residual(Sequential<T> body) : body_(std::move(body)) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& gy) override;
  void collect_params(const std::string& prefix,
                      std::vector<Param<T>*>& out) override;
  nlohmann::json spec() const override;
  void release_caches() override { body_.release_caches(); }

 private:
  Sequential<T> body_;
};

// Builds a layer/stack from its spec() JSON (fresh zeroed parameters).
template <typename T>
std::unique_ptr<Layer<T>> layer_from_spec(const nlohmann::json& spec);
template <typename T>
Sequential<T> sequential_from_spec(const nlohmann::json& array);

template <typename T>
std::vector<Param<T>*> named_params(Layer<T>& layer,
                                    const std::string& prefix = "");

template <typename T>
void init_normal(Layer<T>& layer, Rng& rng, double stddev);

// He-normal on conv/linear weights, zero biases, unit gamma.
template <typename T>
void init_kaiming(Layer<T>& layer, Rng& rng);

template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int64_t step_count() const { return t_; }

  // checkpoint support
  const std::vector<Param<T>*>& params() const { return params_; }
  std::vector<Tensor<T>>& moment1() { return m_; }
  std::vector<Tensor<T>>& moment2() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

template <typename T>
struct LossGrad {
  double value = 0.0;
  Tensor<T> grad;
};

// Mean cross-entropy over rows of logits [N, C]; grad w.r.t. logits.
template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits,
                                  const std::vector<int>& labels);

// Row-wise softmax probabilities (computed in double, stable).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// mean |a - b| and gradient w.r.t. a.
template <typename T>
double l1_value(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);

// mean (x - target)^2 and gradient w.r.t. x.
template <typename T>
double mse_to_value(const Tensor<T>& x, T target);
template <typename T>
LossGrad<T> mse_to(const Tensor<T>& x, T target);

}  // namespace ctaug::nn
