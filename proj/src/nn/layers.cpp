#include "ctaug/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctaug/kernels.hpp"

namespace ctaug::nn {

namespace {

int64_t conv_out_dim(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

int64_t mirror_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// col is [channels*kh*kw, out_h*out_w]; out-of-bounds taps read as zero.
template <typename T>
void im2col(const T* x, int64_t channels, int64_t h, int64_t w, int64_t kernel,
            int64_t stride, int64_t pad, int64_t out_h, int64_t out_w, T* col) {
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ki = 0; ki < kernel; ++ki) {
      for (int64_t kj = 0; kj < kernel; ++kj) {
        T* row = col + ((c * kernel + ki) * kernel + kj) * out_h * out_w;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * out_w, row + (oy + 1) * out_w, T(0));
            continue;
          }
          const T* src = x + (c * h + iy) * w;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t ix = ox * stride - pad + kj;
            row[oy * out_w + ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add column entries back into the image.
template <typename T>
void col2im(const T* col, int64_t channels, int64_t h, int64_t w, int64_t kernel,
            int64_t stride, int64_t pad, int64_t col_h, int64_t col_w, T* img) {
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ki = 0; ki < kernel; ++ki) {
      for (int64_t kj = 0; kj < kernel; ++kj) {
        const T* row = col + ((c * kernel + ki) * kernel + kj) * col_h * col_w;
        for (int64_t oy = 0; oy < col_h; ++oy) {
          const int64_t iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          T* dst = img + (c * h + iy) * w;
          for (int64_t ox = 0; ox < col_w; ++ox) {
            const int64_t ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * col_w + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_nchw(const Tensor<T>& x, int64_t channels, const char* who) {
  if (x.rank() != 4)
    throw std::invalid_argument(std::string(who) + ": expected NCHW input, got " +
                                shape_string(x.shape()));
  if (x.dim(1) != channels)
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::to_string(channels) + " channels, got " +
                                shape_string(x.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Sequential

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> cur = x;
  for (auto& l : layers_) cur = l->forward(cur, mode);
  return cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& gy) {
  Tensor<T> cur = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

template <typename T>
void Sequential<T>::collect_params(const std::string& prefix,
                                   std::vector<Param<T>*>& out) {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params(prefix + std::to_string(i) + ".", out);
}

template <typename T>
nlohmann::json Sequential<T>::spec() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers_) arr.push_back(l->spec());
  return arr;
}

template <typename T>
void Sequential<T>::release_caches() {
  for (auto& l : layers_) l->release_caches();
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::params() {
  std::vector<Param<T>*> out;
  collect_params("", out);
  return out;
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                  int64_t pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride),
      pad_(pad), has_bias_(bias) {
  weight_.value = Tensor<T>({out_ch, in_ch, kernel, kernel});
  weight_.grad = Tensor<T>({out_ch, in_ch, kernel, kernel});
  if (has_bias_) {
    bias_.value = Tensor<T>({out_ch});
    bias_.grad = Tensor<T>({out_ch});
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode mode) {
  check_nchw(x, in_ch_, "conv2d");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = conv_out_dim(h, kernel_, stride_, pad_);
  const int64_t ow = conv_out_dim(w, kernel_, stride_, pad_);
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d: input too small for kernel");
  const int64_t ckk = in_ch_ * kernel_ * kernel_;
  const int64_t ohw = oh * ow;
  Tensor<T> y({n, out_ch_, oh, ow});
  col_.resize(static_cast<size_t>(ckk * ohw));
  for (int64_t i = 0; i < n; ++i) {
    const T* xi = x.data() + i * in_ch_ * h * w;
    T* yi = y.data() + i * out_ch_ * ohw;
    im2col(xi, in_ch_, h, w, kernel_, stride_, pad_, oh, ow, col_.data());
    kernels::gemm<T>(false, false, out_ch_, ohw, ckk, T(1), weight_.value.data(),
                     ckk, col_.data(), ohw, T(0), yi, ohw);
    if (has_bias_)
      for (int64_t o = 0; o < out_ch_; ++o)
        for (int64_t j = 0; j < ohw; ++j) yi[o * ohw + j] += bias_.value[o];
  }
  if (mode == Mode::train)
    x_ = x;
  else
    x_ = Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gy) {
  if (x_.empty()) throw std::logic_error("conv2d backward without forward");
  const int64_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int64_t oh = gy.dim(2), ow = gy.dim(3);
  const int64_t ckk = in_ch_ * kernel_ * kernel_;
  const int64_t ohw = oh * ow;
  Tensor<T> gx({n, in_ch_, h, w});
  std::vector<T> gcol(static_cast<size_t>(ckk * ohw));
  col_.resize(static_cast<size_t>(ckk * ohw));
  for (int64_t i = 0; i < n; ++i) {
    const T* xi = x_.data() + i * in_ch_ * h * w;
    const T* gyi = gy.data() + i * out_ch_ * ohw;
    im2col(xi, in_ch_, h, w, kernel_, stride_, pad_, oh, ow, col_.data());
    // dW += gy_i @ col^T
    kernels::gemm<T>(false, true, out_ch_, ckk, ohw, T(1), gyi, ohw, col_.data(),
                     ohw, T(1), weight_.grad.data(), ckk);
    // dcol = W^T @ gy_i
    kernels::gemm<T>(true, false, ckk, ohw, out_ch_, T(1), weight_.value.data(),
                     ckk, gyi, ohw, T(0), gcol.data(), ohw);
    col2im(gcol.data(), in_ch_, h, w, kernel_, stride_, pad_, oh, ow,
           gx.data() + i * in_ch_ * h * w);
    if (has_bias_)
      for (int64_t o = 0; o < out_ch_; ++o)
        bias_.grad[o] += kernels::sum(gyi + o * ohw, ohw);
  }
  return gx;
}

template <typename T>
void Conv2d<T>::collect_params(const std::string& prefix,
                               std::vector<Param<T>*>& out) {
  weight_.name = prefix + "weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + "bias";
    out.push_back(&bias_);
  }
}

template <typename T>
nlohmann::json Conv2d<T>::spec() const {
  return {{"op", "conv2d"},     {"in", in_ch_},   {"out", out_ch_},
          {"kernel", kernel_},  {"stride", stride_}, {"pad", pad_},
          {"bias", has_bias_}};
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int64_t in_ch, int64_t out_ch,
                                    int64_t kernel, int64_t stride, int64_t pad,
                                    int64_t output_pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride),
      pad_(pad), output_pad_(output_pad), has_bias_(bias) {
  if (output_pad_ >= stride_)
    throw std::invalid_argument("conv_transpose2d: output_pad must be < stride");
  weight_.value = Tensor<T>({in_ch, out_ch, kernel, kernel});
  weight_.grad = Tensor<T>({in_ch, out_ch, kernel, kernel});
  if (has_bias_) {
    bias_.value = Tensor<T>({out_ch});
    bias_.grad = Tensor<T>({out_ch});
  }
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, Mode mode) {
  check_nchw(x, in_ch_, "conv_transpose2d");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = (h - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
  const int64_t ow = (w - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("conv_transpose2d: degenerate output shape");
  const int64_t ckk = out_ch_ * kernel_ * kernel_;
  const int64_t hw = h * w;
  Tensor<T> y({n, out_ch_, oh, ow});
  col_.resize(static_cast<size_t>(ckk * hw));
  for (int64_t i = 0; i < n; ++i) {
    const T* xi = x.data() + i * in_ch_ * hw;
    T* yi = y.data() + i * out_ch_ * oh * ow;
    // cols = W^T @ x_i, with W viewed as [in, out*k*k]
    kernels::gemm<T>(true, false, ckk, hw, in_ch_, T(1), weight_.value.data(),
                     ckk, xi, hw, T(0), col_.data(), hw);
    col2im(col_.data(), out_ch_, oh, ow, kernel_, stride_, pad_, h, w, yi);
    if (has_bias_)
      for (int64_t o = 0; o < out_ch_; ++o)
        for (int64_t j = 0; j < oh * ow; ++j) yi[o * oh * ow + j] += bias_.value[o];
  }
  if (mode == Mode::train)
    x_ = x;
  else
    x_ = Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& gy) {
  if (x_.empty())
    throw std::logic_error("conv_transpose2d backward without forward");
  const int64_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int64_t oh = gy.dim(2), ow = gy.dim(3);
  const int64_t ckk = out_ch_ * kernel_ * kernel_;
  const int64_t hw = h * w;
  Tensor<T> gx({n, in_ch_, h, w});
  col_.resize(static_cast<size_t>(ckk * hw));
  for (int64_t i = 0; i < n; ++i) {
    const T* xi = x_.data() + i * in_ch_ * hw;
    const T* gyi = gy.data() + i * out_ch_ * oh * ow;
    im2col(gyi, out_ch_, oh, ow, kernel_, stride_, pad_, h, w, col_.data());
    // dx = W @ gcols
    kernels::gemm<T>(false, false, in_ch_, hw, ckk, T(1), weight_.value.data(),
                     ckk, col_.data(), hw, T(0), gx.data() + i * in_ch_ * hw, hw);
    // dW += x_i @ gcols^T
    kernels::gemm<T>(false, true, in_ch_, ckk, hw, T(1), xi, hw, col_.data(), hw,
                     T(1), weight_.grad.data(), ckk);
    if (has_bias_)
      for (int64_t o = 0; o < out_ch_; ++o)
        bias_.grad[o] += kernels::sum(gyi + o * oh * ow, oh * ow);
  }
  return gx;
}

template <typename T>
void ConvTranspose2d<T>::collect_params(const std::string& prefix,
                                        std::vector<Param<T>*>& out) {
  weight_.name = prefix + "weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + "bias";
    out.push_back(&bias_);
  }
}

template <typename T>
nlohmann::json ConvTranspose2d<T>::spec() const {
  return {{"op", "conv_transpose2d"}, {"in", in_ch_},
          {"out", out_ch_},           {"kernel", kernel_},
          {"stride", stride_},        {"pad", pad_},
          {"output_pad", output_pad_}, {"bias", has_bias_}};
}

// ---------------------------------------------------------------------------
// ReflectPad2d

template <typename T>
ReflectPad2d<T>::ReflectPad2d(int64_t pad) : pad_(pad) {
  if (pad < 1) throw std::invalid_argument("reflect_pad2d: pad must be >= 1");
}

template <typename T>
Tensor<T> ReflectPad2d<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4)
    throw std::invalid_argument("reflect_pad2d: expected NCHW input");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h <= pad_ || w <= pad_)
    throw std::invalid_argument("reflect_pad2d: pad too large for input");
  Tensor<T> y({n, c, h + 2 * pad_, w + 2 * pad_});
  const int64_t oh = h + 2 * pad_, ow = w + 2 * pad_;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* src = x.data() + (i * c + ch) * h * w;
      T* dst = y.data() + (i * c + ch) * oh * ow;
      for (int64_t yy = 0; yy < oh; ++yy) {
        const int64_t sy = mirror_index(yy - pad_, h);
        for (int64_t xx = 0; xx < ow; ++xx)
          dst[yy * ow + xx] = src[sy * w + mirror_index(xx - pad_, w)];
      }
    }
  in_shape_ = mode == Mode::train ? x.shape() : std::vector<int64_t>{};
  return y;
}

template <typename T>
Tensor<T> ReflectPad2d<T>::backward(const Tensor<T>& gy) {
  if (in_shape_.empty())
    throw std::logic_error("reflect_pad2d backward without forward");
  const int64_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2],
                w = in_shape_[3];
  const int64_t oh = h + 2 * pad_, ow = w + 2 * pad_;
  Tensor<T> gx(in_shape_);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* src = gy.data() + (i * c + ch) * oh * ow;
      T* dst = gx.data() + (i * c + ch) * h * w;
      for (int64_t yy = 0; yy < oh; ++yy) {
        const int64_t sy = mirror_index(yy - pad_, h);
        for (int64_t xx = 0; xx < ow; ++xx)
          dst[sy * w + mirror_index(xx - pad_, w)] += src[yy * ow + xx];
      }
    }
  return gx;
}

template <typename T>
nlohmann::json ReflectPad2d<T>::spec() const {
  return {{"op", "reflect_pad2d"}, {"pad", pad_}};
}

// ---------------------------------------------------------------------------
// InstanceNorm2d

template <typename T>
InstanceNorm2d<T>::InstanceNorm2d(int64_t channels, bool affine, double eps)
    : channels_(channels), affine_(affine), eps_(eps) {
  if (affine_) {
    gamma_.value = Tensor<T>::full({channels}, T(1));
    gamma_.grad = Tensor<T>({channels});
    beta_.value = Tensor<T>({channels});
    beta_.grad = Tensor<T>({channels});
  }
}

template <typename T>
Tensor<T> InstanceNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  check_nchw(x, channels_, "instance_norm2d");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t m = h * w;
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> invstd(static_cast<size_t>(n * channels_));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < channels_; ++c) {
      const T* src = x.data() + (i * channels_ + c) * m;
      T* xh = xhat.data() + (i * channels_ + c) * m;
      T* dst = y.data() + (i * channels_ + c) * m;
      const T mean = kernels::sum(src, m) / static_cast<T>(m);
      // var = E[x^2] - mean^2, clamped against cancellation
      T var = kernels::sum_squares(src, m) / static_cast<T>(m) - mean * mean;
      if (var < T(0)) var = T(0);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps_));
      invstd[static_cast<size_t>(i * channels_ + c)] = is;
      kernels::scale_shift(m, src, is, -mean * is, xh);
      if (affine_)
        kernels::scale_shift(m, xh, gamma_.value[c], beta_.value[c], dst);
      else
        std::copy(xh, xh + m, dst);
    }
  if (mode == Mode::train) {
    xhat_ = std::move(xhat);
    invstd_ = std::move(invstd);
  } else {
    xhat_ = Tensor<T>();
    invstd_.clear();
  }
  return y;
}

template <typename T>
Tensor<T> InstanceNorm2d<T>::backward(const Tensor<T>& gy) {
  if (xhat_.empty())
    throw std::logic_error("instance_norm2d backward without forward");
  const int64_t n = xhat_.dim(0), h = xhat_.dim(2), w = xhat_.dim(3);
  const int64_t m = h * w;
  Tensor<T> gx(xhat_.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < channels_; ++c) {
      const T* g = gy.data() + (i * channels_ + c) * m;
      const T* xh = xhat_.data() + (i * channels_ + c) * m;
      T* dst = gx.data() + (i * channels_ + c) * m;
      const T gamma = affine_ ? gamma_.value[c] : T(1);
      const T is = invstd_[static_cast<size_t>(i * channels_ + c)];
      T sum_g = 0, sum_gx = 0;
      for (int64_t j = 0; j < m; ++j) {
        sum_g += g[j];
        sum_gx += g[j] * xh[j];
      }
      if (affine_) {
        gamma_.grad[c] += sum_gx;
        beta_.grad[c] += sum_g;
      }
      const T k1 = sum_g / static_cast<T>(m);
      const T k2 = sum_gx / static_cast<T>(m);
      for (int64_t j = 0; j < m; ++j)
        dst[j] = gamma * is * (g[j] - k1 - xh[j] * k2);
    }
  return gx;
}

template <typename T>
void InstanceNorm2d<T>::collect_params(const std::string& prefix,
                                       std::vector<Param<T>*>& out) {
  if (!affine_) return;
  gamma_.name = prefix + "gamma";
  beta_.name = prefix + "beta";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
nlohmann::json InstanceNorm2d<T>::spec() const {
  return {{"op", "instance_norm2d"},
          {"channels", channels_},
          {"affine", affine_},
          {"eps", eps_}};
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y(x.shape());
  kernels::relu_forward(x.numel(), x.data(), y.data());
  x_ = mode == Mode::train ? x : Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& gy) {
  if (x_.empty()) throw std::logic_error("relu backward without forward");
  Tensor<T> gx(x_.shape());
  kernels::relu_backward(x_.numel(), x_.data(), gy.data(), gx.data());
  return gx;
}

template <typename T>
nlohmann::json ReLU<T>::spec() const {
  return {{"op", "relu"}};
}

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y(x.shape());
  kernels::leaky_relu_forward(x.numel(), static_cast<T>(slope_), x.data(),
                              y.data());
  x_ = mode == Mode::train ? x : Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& gy) {
  if (x_.empty()) throw std::logic_error("leaky_relu backward without forward");
  Tensor<T> gx(x_.shape());
  kernels::leaky_relu_backward(x_.numel(), static_cast<T>(slope_), x_.data(),
                               gy.data(), gx.data());
  return gx;
}

template <typename T>
nlohmann::json LeakyReLU<T>::spec() const {
  return {{"op", "leaky_relu"}, {"slope", slope_}};
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y(x.shape());
  kernels::tanh_forward(x.numel(), x.data(), y.data());
  y_ = mode == Mode::train ? y : Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& gy) {
  if (y_.empty()) throw std::logic_error("tanh backward without forward");
  Tensor<T> gx(y_.shape());
  kernels::tanh_backward(y_.numel(), y_.data(), gy.data(), gx.data());
  return gx;
}

template <typename T>
nlohmann::json Tanh<T>::spec() const {
  return {{"op", "tanh"}};
}

template <typename T>
Tensor<T> Gelu<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y(x.shape());
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = static_cast<double>(x[i]);
    y[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
  }
  x_ = mode == Mode::train ? x : Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> Gelu<T>::backward(const Tensor<T>& gy) {
  if (x_.empty()) throw std::logic_error("gelu backward without forward");
  Tensor<T> gx(x_.shape());
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  for (int64_t i = 0; i < x_.numel(); ++i) {
    const double v = static_cast<double>(x_[i]);
    const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
    gx[i] = static_cast<T>(static_cast<double>(gy[i]) * (cdf + v * pdf));
  }
  return gx;
}

template <typename T>
nlohmann::json Gelu<T>::spec() const {
  return {{"op", "gelu"}};
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(int64_t in_features, int64_t out_features, bool bias)
    : in_(in_features), out_(out_features), has_bias_(bias) {
  weight_.value = Tensor<T>({out_, in_});
  weight_.grad = Tensor<T>({out_, in_});
  if (has_bias_) {
    bias_.value = Tensor<T>({out_});
    bias_.grad = Tensor<T>({out_});
  }
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw std::invalid_argument("linear: expected [N, " + std::to_string(in_) +
                                "], got " + shape_string(x.shape()));
  const int64_t n = x.dim(0);
  Tensor<T> y({n, out_});
  kernels::gemm<T>(false, true, n, out_, in_, T(1), x.data(), in_,
                   weight_.value.data(), in_, T(0), y.data(), out_);
  if (has_bias_)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < out_; ++o) y.at(i, o) += bias_.value[o];
  x_ = mode == Mode::train ? x : Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& gy) {
  if (x_.empty()) throw std::logic_error("linear backward without forward");
  const int64_t n = x_.dim(0);
  Tensor<T> gx({n, in_});
  kernels::gemm<T>(false, false, n, in_, out_, T(1), gy.data(), out_,
                   weight_.value.data(), in_, T(0), gx.data(), in_);
  kernels::gemm<T>(true, false, out_, in_, n, T(1), gy.data(), out_, x_.data(),
                   in_, T(1), weight_.grad.data(), in_);
  if (has_bias_)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < out_; ++o) bias_.grad[o] += gy.at(i, o);
  return gx;
}

template <typename T>
void Linear<T>::collect_params(const std::string& prefix,
                               std::vector<Param<T>*>& out) {
  weight_.name = prefix + "weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + "bias";
    out.push_back(&bias_);
  }
}

template <typename T>
nlohmann::json Linear<T>::spec() const {
  return {{"op", "linear"}, {"in", in_}, {"out", out_}, {"bias", has_bias_}};
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4)
    throw std::invalid_argument("global_avg_pool: expected NCHW input");
  const int64_t n = x.dim(0), c = x.dim(1), m = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      y.at(i, ch) =
          kernels::sum(x.data() + (i * c + ch) * m, m) / static_cast<T>(m);
  in_shape_ = mode == Mode::train ? x.shape() : std::vector<int64_t>{};
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& gy) {
  if (in_shape_.empty())
    throw std::logic_error("global_avg_pool backward without forward");
  const int64_t n = in_shape_[0], c = in_shape_[1],
                m = in_shape_[2] * in_shape_[3];
  Tensor<T> gx(in_shape_);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T v = gy.at(i, ch) / static_cast<T>(m);
      T* dst = gx.data() + (i * c + ch) * m;
      std::fill(dst, dst + m, v);
    }
  return gx;
}

template <typename T>
nlohmann::json GlobalAvgPool<T>::spec() const {
  return {{"op", "global_avg_pool"}};
}

// ---------------------------------------------------------------------------
// Residual

template <typename T>
Tensor<T> Residual<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = body_.forward(x, mode);
  if (!y.same_shape(x))
    throw std::invalid_argument("residual: body changed the shape");
  kernels::axpby(x.numel(), T(1), x.data(), T(1), y.data());
  return y;
}

template <typename T>
Tensor<T> Residual<T>::backward(const Tensor<T>& gy) {
  Tensor<T> gx = body_.backward(gy);
  kernels::axpby(gy.numel(), T(1), gy.data(), T(1), gx.data());
  return gx;
}

template <typename T>
void Residual<T>::collect_params(const std::string& prefix,
                                 std::vector<Param<T>*>& out) {
  body_.collect_params(prefix + "body.", out);
}

template <typename T>
nlohmann::json Residual<T>::spec() const {
  return {{"op", "residual"}, {"body", body_.spec()}};
}

// ---------------------------------------------------------------------------
// Factory

template <typename T>
std::unique_ptr<Layer<T>> layer_from_spec(const nlohmann::json& spec) {
  const std::string op = spec.at("op").get<std::string>();
  if (op == "conv2d")
    return std::make_unique<Conv2d<T>>(
        spec.at("in").get<int64_t>(), spec.at("out").get<int64_t>(),
        spec.at("kernel").get<int64_t>(), spec.at("stride").get<int64_t>(),
        spec.at("pad").get<int64_t>(), spec.at("bias").get<bool>());
  if (op == "conv_transpose2d")
    return std::make_unique<ConvTranspose2d<T>>(
        spec.at("in").get<int64_t>(), spec.at("out").get<int64_t>(),
        spec.at("kernel").get<int64_t>(), spec.at("stride").get<int64_t>(),
        spec.at("pad").get<int64_t>(), spec.at("output_pad").get<int64_t>(),
        spec.at("bias").get<bool>());
  if (op == "reflect_pad2d")
    return std::make_unique<ReflectPad2d<T>>(spec.at("pad").get<int64_t>());
  if (op == "instance_norm2d")
    return std::make_unique<InstanceNorm2d<T>>(
        spec.at("channels").get<int64_t>(), spec.at("affine").get<bool>(),
        spec.at("eps").get<double>());
  if (op == "relu") return std::make_unique<ReLU<T>>();
  if (op == "leaky_relu")
    return std::make_unique<LeakyReLU<T>>(spec.at("slope").get<double>());
  if (op == "tanh") return std::make_unique<Tanh<T>>();
  if (op == "gelu") return std::make_unique<Gelu<T>>();
  if (op == "linear")
    return std::make_unique<Linear<T>>(spec.at("in").get<int64_t>(),
                                       spec.at("out").get<int64_t>(),
                                       spec.at("bias").get<bool>());
  if (op == "global_avg_pool") return std::make_unique<GlobalAvgPool<T>>();
  if (op == "residual")
    return std::make_unique<Residual<T>>(
        sequential_from_spec<T>(spec.at("body")));
  throw std::invalid_argument("unknown layer op \"" + op + "\"");
}

template <typename T>
Sequential<T> sequential_from_spec(const nlohmann::json& array) {
  if (!array.is_array())
    throw std::invalid_argument("graph spec must be an array of layers");
  Sequential<T> seq;
  for (const auto& item : array) seq.add(layer_from_spec<T>(item));
  return seq;
}

template <typename T>
std::vector<Param<T>*> named_params(Layer<T>& layer, const std::string& prefix) {
  std::vector<Param<T>*> out;
  layer.collect_params(prefix, out);
  return out;
}

template <typename T>
void init_normal(Layer<T>& layer, Rng& rng, double stddev) {
  for (Param<T>* p : named_params(layer)) {
    const bool is_weight =
        p->name.size() >= 6 && p->name.rfind("weight") == p->name.size() - 6;
    const bool is_gamma =
        p->name.size() >= 5 && p->name.rfind("gamma") == p->name.size() - 5;
    if (is_weight) {
      for (int64_t i = 0; i < p->value.numel(); ++i)
        p->value[i] = static_cast<T>(rng.normal(0.0, stddev));
    } else if (is_gamma) {
      p->value.fill(T(1));
    } else {
      p->value.zero();
    }
  }
}

template <typename T>
void init_kaiming(Layer<T>& layer, Rng& rng) {
  for (Param<T>* p : named_params(layer)) {
    const bool is_weight =
        p->name.size() >= 6 && p->name.rfind("weight") == p->name.size() - 6;
    const bool is_gamma =
        p->name.size() >= 5 && p->name.rfind("gamma") == p->name.size() - 5;
    if (is_weight && p->value.rank() >= 2) {
      int64_t fan_in = 1;
      for (size_t d = 1; d < p->value.rank(); ++d) fan_in *= p->value.dim(d);
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (int64_t i = 0; i < p->value.numel(); ++i)
        p->value[i] = static_cast<T>(rng.normal(0.0, stddev));
    } else if (is_gamma) {
      p->value.fill(T(1));
    } else {
      p->value.zero();
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
Adam<T>::Adam(std::vector<Param<T>*> params, double lr, double beta1,
              double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param<T>* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const T bias1 = T(1) - static_cast<T>(std::pow(beta1_, static_cast<double>(t_)));
  const T bias2 = T(1) - static_cast<T>(std::pow(beta2_, static_cast<double>(t_)));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param<T>* p = params_[i];
    kernels::adam_step(p->value.numel(), p->value.data(), p->grad.data(),
                       m_[i].data(), v_[i].data(), static_cast<T>(lr_),
                       static_cast<T>(beta1_), static_cast<T>(beta2_),
                       static_cast<T>(eps_), bias1, bias2);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (Param<T>* p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits,
                                  const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<int64_t>(labels.size()))
    throw std::invalid_argument("softmax_cross_entropy: shape mismatch");
  const int64_t n = logits.dim(0), c = logits.dim(1);
  LossGrad<T> out;
  out.grad = Tensor<T>(logits.shape());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * c;
    double mx = static_cast<double>(row[0]);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= c)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    total += -(static_cast<double>(row[label]) - mx - std::log(denom));
    for (int64_t j = 0; j < c; ++j) {
      const double p = std::exp(static_cast<double>(row[j]) - mx) / denom;
      out.grad[i * c + j] =
          static_cast<T>((p - (j == label ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  out.value = total / static_cast<double>(n);
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2)
    throw std::invalid_argument("softmax: expected [N, C]");
  const int64_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> probs(logits.shape());
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * c;
    double mx = static_cast<double>(row[0]);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    for (int64_t j = 0; j < c; ++j)
      probs[i * c + j] =
          static_cast<T>(std::exp(static_cast<double>(row[j]) - mx) / denom);
  }
  return probs;
}

template <typename T>
double l1_value(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("l1: shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  if (a.numel() == 0) throw std::invalid_argument("l1: empty tensors");
  double total = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    total += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return total / static_cast<double>(a.numel());
}

template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  LossGrad<T> out;
  out.value = l1_value(a, b);
  out.grad = Tensor<T>(a.shape());
  const T scale = T(1) / static_cast<T>(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) {
    const T d = a[i] - b[i];
    out.grad[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  return out;
}

template <typename T>
double mse_to_value(const Tensor<T>& x, T target) {
  if (x.numel() == 0) throw std::invalid_argument("mse: empty tensor");
  double total = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(target);
    total += d * d;
  }
  return total / static_cast<double>(x.numel());
}

template <typename T>
LossGrad<T> mse_to(const Tensor<T>& x, T target) {
  LossGrad<T> out;
  out.value = mse_to_value(x, target);
  out.grad = Tensor<T>(x.shape());
  const T scale = T(2) / static_cast<T>(x.numel());
  for (int64_t i = 0; i < x.numel(); ++i) out.grad[i] = scale * (x[i] - target);
  return out;
}

// ---------------------------------------------------------------------------

#define CTAUG_NN_INSTANTIATE(T)                                               \
  template class Sequential<T>;                                               \
  template class Conv2d<T>;                                                   \
  template class ConvTranspose2d<T>;                                          \
  template class ReflectPad2d<T>;                                             \
  template class InstanceNorm2d<T>;                                           \
  template class ReLU<T>;                                                     \
  template class LeakyReLU<T>;                                                \
  template class Tanh<T>;                                                     \
  template class Gelu<T>;                                                     \
  template class Linear<T>;                                                   \
  template class GlobalAvgPool<T>;                                            \
  template class Residual<T>;                                                 \
  template class Adam<T>;                                                     \
  template std::unique_ptr<Layer<T>> layer_from_spec<T>(const nlohmann::json&); \
  template Sequential<T> sequential_from_spec<T>(const nlohmann::json&);      \
  template std::vector<Param<T>*> named_params<T>(Layer<T>&,                  \
                                                  const std::string&);        \
  template void init_normal<T>(Layer<T>&, Rng&, double);                      \
  template void init_kaiming<T>(Layer<T>&, Rng&);                             \
  template LossGrad<T> softmax_cross_entropy<T>(const Tensor<T>&,             \
                                                const std::vector<int>&);     \
  template Tensor<T> softmax<T>(const Tensor<T>&);                            \
  template double l1_value<T>(const Tensor<T>&, const Tensor<T>&);            \
  template LossGrad<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);        \
  template double mse_to_value<T>(const Tensor<T>&, T);                       \
  template LossGrad<T> mse_to<T>(const Tensor<T>&, T);

CTAUG_NN_INSTANTIATE(float)
CTAUG_NN_INSTANTIATE(double)
#undef CTAUG_NN_INSTANTIATE

}  // namespace ctaug::nn
