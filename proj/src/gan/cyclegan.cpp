#include "ctaug/cyclegan.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ctaug/errors.hpp"
#include "ctaug/kernels.hpp"
#include "ctaug/preprocess.hpp"
#include "ctaug/serialize.hpp"

namespace ctaug::gan {

int64_t default_res_blocks(int64_t input_dim) { return input_dim <= 128 ? 6 : 9; }

int64_t patch_grid_dim(int64_t input_dim, int64_t n_layers) {
  int64_t n = input_dim;
  for (int64_t i = 0; i < n_layers - 1; ++i) n = (n - 2) / 2 + 1;  // k4 s2 p1
  n -= 1;  // k4 s1 p1 feature conv
  n -= 1;  // k4 s1 p1 output conv
  return n;
}

template <typename T>
nn::Sequential<T> build_generator(const GeneratorSpec& spec) {
  using namespace nn;
  if (spec.input_dim < 8 || spec.base_width < 1 || spec.channels < 1 ||
      spec.n_res_blocks < 0)
    throw ConfigError("invalid generator spec");
  const int64_t w = spec.base_width;
  Sequential<T> g;
  g.add(std::make_unique<ReflectPad2d<T>>(3));
  g.add(std::make_unique<Conv2d<T>>(spec.channels, w, 7, 1, 0));
  g.add(std::make_unique<InstanceNorm2d<T>>(w));
  g.add(std::make_unique<ReLU<T>>());
  g.add(std::make_unique<Conv2d<T>>(w, 2 * w, 3, 2, 1));
  g.add(std::make_unique<InstanceNorm2d<T>>(2 * w));
  g.add(std::make_unique<ReLU<T>>());
  g.add(std::make_unique<Conv2d<T>>(2 * w, 4 * w, 3, 2, 1));
  g.add(std::make_unique<InstanceNorm2d<T>>(4 * w));
  g.add(std::make_unique<ReLU<T>>());
  for (int64_t i = 0; i < spec.n_res_blocks; ++i) {
    Sequential<T> body;
    body.add(std::make_unique<ReflectPad2d<T>>(1));
    body.add(std::make_unique<Conv2d<T>>(4 * w, 4 * w, 3, 1, 0));
    body.add(std::make_unique<InstanceNorm2d<T>>(4 * w));
    body.add(std::make_unique<ReLU<T>>());
    body.add(std::make_unique<ReflectPad2d<T>>(1));
    body.add(std::make_unique<Conv2d<T>>(4 * w, 4 * w, 3, 1, 0));
    body.add(std::make_unique<InstanceNorm2d<T>>(4 * w));
    g.add(std::make_unique<Residual<T>>(std::move(body)));
  }
  g.add(std::make_unique<ConvTranspose2d<T>>(4 * w, 2 * w, 3, 2, 1, 1));
  g.add(std::make_unique<InstanceNorm2d<T>>(2 * w));
  g.add(std::make_unique<ReLU<T>>());
  g.add(std::make_unique<ConvTranspose2d<T>>(2 * w, w, 3, 2, 1, 1));
  g.add(std::make_unique<InstanceNorm2d<T>>(w));
  g.add(std::make_unique<ReLU<T>>());
  g.add(std::make_unique<ReflectPad2d<T>>(3));
  g.add(std::make_unique<Conv2d<T>>(w, spec.channels, 7, 1, 0));
  g.add(std::make_unique<Tanh<T>>());
  return g;
}

template <typename T>
nn::Sequential<T> build_discriminator(const DiscriminatorSpec& spec) {
  using namespace nn;
  if (spec.input_dim < 8 || spec.base_width < 1 || spec.channels < 1 ||
      spec.n_layers < 2)
    throw ConfigError("invalid discriminator spec");
  if (patch_grid_dim(spec.input_dim, spec.n_layers) < 1)
    throw ConfigError("discriminator too deep for input_dim " +
                      std::to_string(spec.input_dim));
  Sequential<T> d;
  int64_t prev = spec.channels;
  for (int64_t layer = 0; layer < spec.n_layers; ++layer) {
    const int64_t width =
        spec.base_width * std::min<int64_t>(int64_t(1) << layer, 8);
    const int64_t stride = layer < spec.n_layers - 1 ? 2 : 1;
    d.add(std::make_unique<Conv2d<T>>(prev, width, 4, stride, 1));
    if (layer > 0) d.add(std::make_unique<InstanceNorm2d<T>>(width));
    d.add(std::make_unique<LeakyReLU<T>>(0.2));
    prev = width;
  }
  d.add(std::make_unique<Conv2d<T>>(prev, 1, 4, 1, 1));
  return d;
}

template <typename T>
double adversarial_loss(const Tensor<T>& d_out, bool target_real) {
  if (d_out.numel() == 0)
    throw std::invalid_argument("adversarial_loss: empty logits");
  return nn::mse_to_value(d_out, target_real ? T(1) : T(0));
}

template <typename T>
double cycle_loss(const Tensor<T>& x, const Tensor<T>& x_reconstructed) {
  return nn::l1_value(x_reconstructed, x);
}

template <typename T>
double identity_loss(const Tensor<T>& x, const Tensor<T>& same_domain_out) {
  return nn::l1_value(same_domain_out, x);
}

template <typename T>
Tensor<T> ReplayBuffer<T>::push_and_sample(const Tensor<T>& fake, Rng& rng) {
  if (capacity_ == 0) return fake;
  if (pool_.size() < capacity_) {
    pool_.push_back(fake);
    return fake;
  }
  if (rng.bernoulli(0.5)) {
    const auto idx = static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(pool_.size())));
    Tensor<T> out = pool_[idx];
    pool_[idx] = fake;
    return out;
  }
  return fake;
}

// ---------------------------------------------------------------------------

template <typename T>
CycleGanModel<T>::CycleGanModel(const GeneratorSpec& gen_spec,
                                const DiscriminatorSpec& dis_spec,
                                const CycleGanLossWeights& weights,
                                const TrainPlan& plan, uint64_t seed,
                                size_t buffer_capacity)
    : gen_spec_(gen_spec), dis_spec_(dis_spec), weights_(weights), plan_(plan),
      g_ab_(build_generator<T>(gen_spec)), g_ba_(build_generator<T>(gen_spec)),
      d_a_(build_discriminator<T>(dis_spec)),
      d_b_(build_discriminator<T>(dis_spec)), buffer_a_(buffer_capacity),
      buffer_b_(buffer_capacity), rng_(seed) {
  if (weights_.lambda_cycle < 0 || weights_.lambda_identity < 0)
    throw ConfigError("cyclegan loss weights must be non-negative");
  Rng init_rng = rng_.fork();
  nn::init_normal(g_ab_, init_rng, 0.02);
  nn::init_normal(g_ba_, init_rng, 0.02);
  nn::init_normal(d_a_, init_rng, 0.02);
  nn::init_normal(d_b_, init_rng, 0.02);
  opt_g_ = std::make_unique<nn::Adam<T>>(generator_params(), plan_.base_lr, 0.5,
                                         0.999);
  opt_d_a_ = std::make_unique<nn::Adam<T>>(d_a_.params(), plan_.base_lr, 0.5,
                                           0.999);
  opt_d_b_ = std::make_unique<nn::Adam<T>>(d_b_.params(), plan_.base_lr, 0.5,
                                           0.999);
}

template <typename T>
std::vector<nn::Param<T>*> CycleGanModel<T>::generator_params() {
  std::vector<nn::Param<T>*> out;
  g_ab_.collect_params("g_ab.", out);
  g_ba_.collect_params("g_ba.", out);
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> CycleGanModel<T>::all_params() {
  std::vector<nn::Param<T>*> out;
  g_ab_.collect_params("g_ab.", out);
  g_ba_.collect_params("g_ba.", out);
  d_a_.collect_params("d_a.", out);
  d_b_.collect_params("d_b.", out);
  return out;
}

template <typename T>
double CycleGanModel<T>::current_lr() const {
  if (plan_.total_steps <= 0) return plan_.base_lr;
  const int64_t half = plan_.total_steps / 2;
  if (step_ < half) return plan_.base_lr;
  const int64_t denom = plan_.total_steps - half;
  if (denom <= 0) return plan_.base_lr;
  return plan_.base_lr * static_cast<double>(plan_.total_steps - step_) /
         static_cast<double>(denom);
}

template <typename T>
void CycleGanModel<T>::check_batch(const Tensor<T>& batch, const char* who) const {
  if (batch.rank() != 4 || batch.dim(1) != gen_spec_.channels ||
      batch.dim(2) != gen_spec_.input_dim || batch.dim(3) != gen_spec_.input_dim)
    throw std::invalid_argument(
        std::string(who) + ": expected (N, " +
        std::to_string(gen_spec_.channels) + ", " +
        std::to_string(gen_spec_.input_dim) + ", " +
        std::to_string(gen_spec_.input_dim) + "), got " +
        shape_string(batch.shape()));
}

namespace {

void ensure_finite(double v, const char* term, int64_t step) {
  if (!std::isfinite(v))
    throw TrainingError("non-finite " + std::string(term) + " loss at step " +
                        std::to_string(step));
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  kernels::axpby(dst.numel(), T(1), src.data(), T(1), dst.data());
}

template <typename T>
void scale(Tensor<T>& t, T s) {
  kernels::scale_shift(t.numel(), t.data(), s, T(0), t.data());
}

}  // namespace

template <typename T>
StepLosses CycleGanModel<T>::train_step(const Tensor<T>& batch_a,
                                        const Tensor<T>& batch_b) {
  check_batch(batch_a, "train_step(batch_a)");
  check_batch(batch_b, "train_step(batch_b)");
  using nn::Mode;
  const double lr = current_lr();
  opt_g_->set_lr(lr);
  opt_d_a_->set_lr(lr);
  opt_d_b_->set_lr(lr);
  const T lam_cyc = static_cast<T>(weights_.lambda_cycle);
  const T lam_idt = static_cast<T>(weights_.lambda_identity);

  StepLosses losses;
  opt_g_->zero_grad();

  // a -> b: adversarial on D_b plus cycle back through G_ba
  Tensor<T> fake_b = g_ab_.forward(batch_a, Mode::train);
  {
    Tensor<T> d_out = d_b_.forward(fake_b, Mode::train);
    auto adv = nn::mse_to(d_out, T(1));
    losses.g_adv_ab = adv.value;
    ensure_finite(adv.value, "adversarial(a->b)", step_);
    Tensor<T> g_fake_b = d_b_.backward(adv.grad);

    Tensor<T> rec_a = g_ba_.forward(fake_b, Mode::train);
    auto cyc = nn::l1_loss(rec_a, batch_a);
    losses.cycle_a = cyc.value;
    ensure_finite(cyc.value, "cycle(a)", step_);
    scale(cyc.grad, lam_cyc);
    add_into(g_fake_b, g_ba_.backward(cyc.grad));
    g_ab_.backward(g_fake_b);
  }

  // b -> a: adversarial on D_a plus cycle back through G_ab
  Tensor<T> fake_a = g_ba_.forward(batch_b, Mode::train);
  {
    Tensor<T> d_out = d_a_.forward(fake_a, Mode::train);
    auto adv = nn::mse_to(d_out, T(1));
    losses.g_adv_ba = adv.value;
    ensure_finite(adv.value, "adversarial(b->a)", step_);
    Tensor<T> g_fake_a = d_a_.backward(adv.grad);

    Tensor<T> rec_b = g_ab_.forward(fake_a, Mode::train);
    auto cyc = nn::l1_loss(rec_b, batch_b);
    losses.cycle_b = cyc.value;
    ensure_finite(cyc.value, "cycle(b)", step_);
    scale(cyc.grad, lam_cyc);
    add_into(g_fake_a, g_ab_.backward(cyc.grad));
    g_ba_.backward(g_fake_a);
  }

  // identity stabilizer
  if (weights_.lambda_identity > 0) {
    Tensor<T> idt_b = g_ab_.forward(batch_b, Mode::train);
    auto idt = nn::l1_loss(idt_b, batch_b);
    losses.identity_b = idt.value;
    ensure_finite(idt.value, "identity(b)", step_);
    scale(idt.grad, lam_idt);
    g_ab_.backward(idt.grad);

    Tensor<T> idt_a = g_ba_.forward(batch_a, Mode::train);
    auto idt2 = nn::l1_loss(idt_a, batch_a);
    losses.identity_a = idt2.value;
    ensure_finite(idt2.value, "identity(a)", step_);
    scale(idt2.grad, lam_idt);
    g_ba_.backward(idt2.grad);
  }

  losses.g_total = losses.g_adv_ab + losses.g_adv_ba +
                   weights_.lambda_cycle * (losses.cycle_a + losses.cycle_b) +
                   weights_.lambda_identity *
                       (losses.identity_a + losses.identity_b);
  opt_g_->step();

  // discriminators: real vs replay-buffer fake, halved as in the cited design
  auto train_discriminator = [&](nn::Sequential<T>& d, nn::Adam<T>& opt,
                                 const Tensor<T>& real, ReplayBuffer<T>& buffer,
                                 const Tensor<T>& fresh_fake, const char* term) {
    opt.zero_grad();
    Tensor<T> d_real = d.forward(real, Mode::train);
    auto loss_real = nn::mse_to(d_real, T(1));
    scale(loss_real.grad, T(0.5));
    d.backward(loss_real.grad);
    Tensor<T> fake = buffer.push_and_sample(fresh_fake, rng_);
    Tensor<T> d_fake = d.forward(fake, Mode::train);
    auto loss_fake = nn::mse_to(d_fake, T(0));
    scale(loss_fake.grad, T(0.5));
    d.backward(loss_fake.grad);
    const double value = 0.5 * (loss_real.value + loss_fake.value);
    ensure_finite(value, term, step_);
    opt.step();
    return value;
  };
  losses.d_b = train_discriminator(d_b_, *opt_d_b_, batch_b, buffer_b_, fake_b,
                                   "discriminator(b)");
  losses.d_a = train_discriminator(d_a_, *opt_d_a_, batch_a, buffer_a_, fake_a,
                                   "discriminator(a)");

  ++step_;
  return losses;
}

template <typename T>
Tensor<T> CycleGanModel<T>::translate(const Tensor<T>& imgs, Direction direction) {
  check_batch(imgs, "translate");
  nn::Sequential<T>& g = direction == Direction::a_to_b ? g_ab_ : g_ba_;
  const int64_t n = imgs.dim(0);
  const int64_t plane = imgs.dim(1) * imgs.dim(2) * imgs.dim(3);
  Tensor<T> out(imgs.shape());
  Tensor<T> one({1, imgs.dim(1), imgs.dim(2), imgs.dim(3)});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(imgs.data() + i * plane, imgs.data() + (i + 1) * plane, one.data());
    Tensor<T> y = g.forward(one, nn::Mode::eval);
    std::copy(y.data(), y.data() + plane, out.data() + i * plane);
  }
  return out;
}

template <typename T>
double CycleGanModel<T>::generator_total_loss(const Tensor<T>& batch_a,
                                              const Tensor<T>& batch_b) {
  check_batch(batch_a, "generator_total_loss");
  check_batch(batch_b, "generator_total_loss");
  using nn::Mode;
  Tensor<T> fake_b = g_ab_.forward(batch_a, Mode::eval);
  Tensor<T> fake_a = g_ba_.forward(batch_b, Mode::eval);
  double total = adversarial_loss(d_b_.forward(fake_b, Mode::eval), true) +
                 adversarial_loss(d_a_.forward(fake_a, Mode::eval), true);
  total += weights_.lambda_cycle *
           (cycle_loss(batch_a, g_ba_.forward(fake_b, Mode::eval)) +
            cycle_loss(batch_b, g_ab_.forward(fake_a, Mode::eval)));
  if (weights_.lambda_identity > 0)
    total += weights_.lambda_identity *
             (identity_loss(batch_b, g_ab_.forward(batch_b, Mode::eval)) +
              identity_loss(batch_a, g_ba_.forward(batch_a, Mode::eval)));
  return total;
}

template <typename T>
void CycleGanModel<T>::generator_backward(const Tensor<T>& batch_a,
                                          const Tensor<T>& batch_b) {
  using nn::Mode;
  const T lam_cyc = static_cast<T>(weights_.lambda_cycle);
  const T lam_idt = static_cast<T>(weights_.lambda_identity);
  opt_g_->zero_grad();

  Tensor<T> fake_b = g_ab_.forward(batch_a, Mode::train);
  {
    Tensor<T> d_out = d_b_.forward(fake_b, Mode::train);
    auto adv = nn::mse_to(d_out, T(1));
    Tensor<T> g_fake_b = d_b_.backward(adv.grad);
    Tensor<T> rec_a = g_ba_.forward(fake_b, Mode::train);
    auto cyc = nn::l1_loss(rec_a, batch_a);
    scale(cyc.grad, lam_cyc);
    add_into(g_fake_b, g_ba_.backward(cyc.grad));
    g_ab_.backward(g_fake_b);
  }
  Tensor<T> fake_a = g_ba_.forward(batch_b, Mode::train);
  {
    Tensor<T> d_out = d_a_.forward(fake_a, Mode::train);
    auto adv = nn::mse_to(d_out, T(1));
    Tensor<T> g_fake_a = d_a_.backward(adv.grad);
    Tensor<T> rec_b = g_ab_.forward(fake_a, Mode::train);
    auto cyc = nn::l1_loss(rec_b, batch_b);
    scale(cyc.grad, lam_cyc);
    add_into(g_fake_a, g_ab_.backward(cyc.grad));
    g_ba_.backward(g_fake_a);
  }
  if (weights_.lambda_identity > 0) {
    Tensor<T> idt_b = g_ab_.forward(batch_b, Mode::train);
    auto idt = nn::l1_loss(idt_b, batch_b);
    scale(idt.grad, lam_idt);
    g_ab_.backward(idt.grad);
    Tensor<T> idt_a = g_ba_.forward(batch_a, Mode::train);
    auto idt2 = nn::l1_loss(idt_a, batch_a);
    scale(idt2.grad, lam_idt);
    g_ba_.backward(idt2.grad);
  }
}

template <typename T>
void CycleGanModel<T>::save_checkpoint(const std::filesystem::path& path,
                                       const std::string& config_hash) const {
  if constexpr (!std::is_same_v<T, float>) {
    throw std::logic_error("checkpoints are float32 only");
  } else {
    nn::ArchiveWriter w(kCheckpointMagic);
    auto& meta = w.meta();
    meta["generator_spec"] = {{"input_dim", gen_spec_.input_dim},
                              {"channels", gen_spec_.channels},
                              {"base_width", gen_spec_.base_width},
                              {"n_res_blocks", gen_spec_.n_res_blocks}};
    meta["discriminator_spec"] = {{"input_dim", dis_spec_.input_dim},
                                  {"channels", dis_spec_.channels},
                                  {"base_width", dis_spec_.base_width},
                                  {"n_layers", dis_spec_.n_layers}};
    meta["weights"] = {{"lambda_cycle", weights_.lambda_cycle},
                       {"lambda_identity", weights_.lambda_identity}};
    meta["plan"] = {{"base_lr", plan_.base_lr},
                    {"total_steps", plan_.total_steps}};
    meta["step"] = step_;
    meta["buffer_capacity"] = buffer_a_.capacity();
    meta["config_hash"] = config_hash;
    meta["adam_steps"] = {opt_g_->step_count(), opt_d_a_->step_count(),
                          opt_d_b_->step_count()};

    auto& self = const_cast<CycleGanModel<T>&>(*this);
    nn::save_layer_params(w, self.g_ab_, "g_ab.");
    nn::save_layer_params(w, self.g_ba_, "g_ba.");
    nn::save_layer_params(w, self.d_a_, "d_a.");
    nn::save_layer_params(w, self.d_b_, "d_b.");
    auto save_moments = [&w](const char* tag, nn::Adam<float>& opt) {
      for (size_t i = 0; i < opt.moment1().size(); ++i) {
        w.add_tensor(std::string(tag) + ".m." + std::to_string(i),
                     opt.moment1()[i]);
        w.add_tensor(std::string(tag) + ".v." + std::to_string(i),
                     opt.moment2()[i]);
      }
    };
    save_moments("adam_g", *self.opt_g_);
    save_moments("adam_d_a", *self.opt_d_a_);
    save_moments("adam_d_b", *self.opt_d_b_);
    w.write(path);
  }
}

template <typename T>
std::unique_ptr<CycleGanModel<float>> CycleGanModel<T>::load_checkpoint(
    const std::filesystem::path& path) {
  nn::ArchiveReader r(path, kCheckpointMagic);
  const auto& meta = r.meta();
  GeneratorSpec gs;
  gs.input_dim = meta.at("generator_spec").at("input_dim").get<int64_t>();
  gs.channels = meta.at("generator_spec").at("channels").get<int64_t>();
  gs.base_width = meta.at("generator_spec").at("base_width").get<int64_t>();
  gs.n_res_blocks = meta.at("generator_spec").at("n_res_blocks").get<int64_t>();
  DiscriminatorSpec ds;
  ds.input_dim = meta.at("discriminator_spec").at("input_dim").get<int64_t>();
  ds.channels = meta.at("discriminator_spec").at("channels").get<int64_t>();
  ds.base_width = meta.at("discriminator_spec").at("base_width").get<int64_t>();
  ds.n_layers = meta.at("discriminator_spec").at("n_layers").get<int64_t>();
  CycleGanLossWeights lw;
  lw.lambda_cycle = meta.at("weights").at("lambda_cycle").get<double>();
  lw.lambda_identity = meta.at("weights").at("lambda_identity").get<double>();
  TrainPlan plan;
  plan.base_lr = meta.at("plan").at("base_lr").get<double>();
  plan.total_steps = meta.at("plan").at("total_steps").get<int64_t>();

  auto model = std::make_unique<CycleGanModel<float>>(
      gs, ds, lw, plan, 0, meta.at("buffer_capacity").get<size_t>());
  nn::load_layer_params(r, model->g_ab_, "g_ab.");
  nn::load_layer_params(r, model->g_ba_, "g_ba.");
  nn::load_layer_params(r, model->d_a_, "d_a.");
  nn::load_layer_params(r, model->d_b_, "d_b.");
  auto load_moments = [&r](const char* tag, nn::Adam<float>& opt) {
    for (size_t i = 0; i < opt.moment1().size(); ++i) {
      opt.moment1()[i] = r.tensor(std::string(tag) + ".m." + std::to_string(i));
      opt.moment2()[i] = r.tensor(std::string(tag) + ".v." + std::to_string(i));
    }
  };
  load_moments("adam_g", *model->opt_g_);
  load_moments("adam_d_a", *model->opt_d_a_);
  load_moments("adam_d_b", *model->opt_d_b_);
  const auto adam_steps = meta.at("adam_steps");
  model->opt_g_->set_step_count(adam_steps.at(0).get<int64_t>());
  model->opt_d_a_->set_step_count(adam_steps.at(1).get<int64_t>());
  model->opt_d_b_->set_step_count(adam_steps.at(2).get<int64_t>());
  model->step_ = meta.at("step").get<int64_t>();
  return model;
}

// ---------------------------------------------------------------------------

Tensor<float> image_to_gan_tensor(const Image& img, int64_t dim) {
  AugmentPolicy p;
  p.presize_dim = static_cast<int>(dim);
  p.final_dim = static_cast<int>(dim);
  const Image sized = presize_and_crop(img, p, CropMode::center);
  Tensor<float> t({1, 1, dim, dim});
  kernels::scale_shift(t.numel(), sized.pixels.data(), 2.0f, -1.0f, t.data());
  return t;
}

Image gan_tensor_to_image(const Tensor<float>& t, int64_t sample_index) {
  const int64_t h = t.dim(2), w = t.dim(3);
  Image img(1, h, w);
  const float* src = t.data() + sample_index * t.dim(1) * h * w;
  for (int64_t i = 0; i < h * w; ++i)
    img.pixels[static_cast<size_t>(i)] =
        std::clamp((src[i] + 1.0f) * 0.5f, 0.0f, 1.0f);
  return img;
}

std::vector<SliceRecord> generate_augmented_set(
    CycleGanModel<float>& model, const std::vector<SliceRecord>& train_records,
    double ratio, const std::filesystem::path& cache_dir,
    const std::function<Image(const SliceRecord&)>& load_slice, Rng& rng) {
  if (ratio < 0.0 || ratio > 1.0)
    throw ConfigError("augmentation ratio must be in [0,1]");
  std::vector<size_t> covid_idx, normal_idx;
  for (size_t i = 0; i < train_records.size(); ++i) {
    if (train_records[i].source != Source::original)
      throw DataError("generate_augmented_set: input already contains "
                      "generated records");
    (train_records[i].label == Label::covid ? covid_idx : normal_idx).push_back(i);
  }

  const auto pick = [&rng](std::vector<size_t>& idx, double r) {
    rng.shuffle(idx);
    const auto k = static_cast<size_t>(
        std::ceil(r * static_cast<double>(idx.size())));
    idx.resize(std::min(k, idx.size()));
  };
  pick(covid_idx, ratio);
  pick(normal_idx, ratio);

  std::error_code ec;
  std::filesystem::create_directories(cache_dir / "generated" / "a_to_b", ec);
  std::filesystem::create_directories(cache_dir / "generated" / "b_to_a", ec);

  std::set<std::string> emitted;
  std::vector<SliceRecord> out;
  auto translate_one = [&](size_t record_index, Direction dir) {
    const SliceRecord& src = train_records[record_index];
    const Image img = load_slice(src);
    const Tensor<float> in =
        image_to_gan_tensor(img, model.generator_spec().input_dim);
    const Tensor<float> translated = model.translate(in, dir);
    const Image result = gan_tensor_to_image(translated);
    const char* dir_name = dir == Direction::a_to_b ? "a_to_b" : "b_to_a";
    const std::string stem = std::filesystem::path(src.slice_path).stem().string();
    const std::filesystem::path dest =
        cache_dir / "generated" / dir_name / (stem + ".png");
    if (!emitted.insert(dest.string()).second)
      throw DataError("generated image name collision: " + dest.string());
    save_png_gray16(dest, result);
    SliceRecord rec;
    rec.patient_id = src.patient_id;
    rec.slice_path = dest.string();
    rec.label = src.label == Label::covid ? Label::normal : Label::covid;
    rec.source = Source::generated;
    out.push_back(std::move(rec));
  };
  // normal (domain a) -> covid-looking (domain b); covid -> normal-looking
  for (size_t i : normal_idx) translate_one(i, Direction::a_to_b);
  for (size_t i : covid_idx) translate_one(i, Direction::b_to_a);
  return out;
}

// ---------------------------------------------------------------------------

#define CTAUG_GAN_INSTANTIATE(T)                                              \
  template nn::Sequential<T> build_generator<T>(const GeneratorSpec&);        \
  template nn::Sequential<T> build_discriminator<T>(const DiscriminatorSpec&); \
  template double adversarial_loss<T>(const Tensor<T>&, bool);                \
  template double cycle_loss<T>(const Tensor<T>&, const Tensor<T>&);          \
  template double identity_loss<T>(const Tensor<T>&, const Tensor<T>&);       \
  template class ReplayBuffer<T>;                                             \
  template class CycleGanModel<T>;

CTAUG_GAN_INSTANTIATE(float)
CTAUG_GAN_INSTANTIATE(double)
#undef CTAUG_GAN_INSTANTIATE

}  // namespace ctaug::gan
