#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ctaug/data_catalog.hpp"
#include "ctaug/image.hpp"
#include "ctaug/nn.hpp"
#include "ctaug/rng.hpp"

// Unpaired two-domain translator: domain a = normal, domain b = covid.
// Generator: c7s1 stem, two stride-2 downsampling convs, residual trunk, two
// fractional-stride upsampling convs, c7s1 tanh output. Discriminator: 70x70
// patch design with a least-squares objective.
namespace ctaug::gan {

inline constexpr char kCheckpointMagic[] = "CYGAN-CKPT-v1";

struct GeneratorSpec {
  int64_t input_dim = 256;
  int64_t channels = 1;
  int64_t base_width = 64;
  int64_t n_res_blocks = 9;  // see default_res_blocks
};

// 9 residual blocks at 256 and above, 6 at <= 128.
int64_t default_res_blocks(int64_t input_dim);

struct DiscriminatorSpec {
  int64_t input_dim = 256;
  int64_t channels = 1;
  int64_t base_width = 64;
  int64_t n_layers = 4;  // feature convs; first n_layers-1 are stride 2
};

// Closed-form patch-logit grid side for a square input.
int64_t patch_grid_dim(int64_t input_dim, int64_t n_layers);

template <typename T>
nn::Sequential<T> build_generator(const GeneratorSpec& spec);
template <typename T>
nn::Sequential<T> build_discriminator(const DiscriminatorSpec& spec);

struct CycleGanLossWeights {
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;  // 0.5 * lambda_cycle
};

// Least-squares GAN loss: mean over patches of (d - t)^2, t = 1 for real.
template <typename T>
double adversarial_loss(const Tensor<T>& d_out, bool target_real);

// Mean absolute difference; throws on shape mismatch.
template <typename T>
double cycle_loss(const Tensor<T>& x, const Tensor<T>& x_reconstructed);
template <typename T>
double identity_loss(const Tensor<T>& x, const Tensor<T>& same_domain_out);

// Pool of past fakes for discriminator updates. Below capacity the fresh
// fake is stored and returned; at capacity it replaces a random stored fake
// with probability 1/2 (returning the evicted one), else passes through.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

  Tensor<T> push_and_sample(const Tensor<T>& fake, Rng& rng);
  size_t size() const { return pool_.size(); }
  size_t capacity() const { return capacity_; }

 private:
  size_t capacity_;
  std::vector<Tensor<T>> pool_;
};

enum class Direction { a_to_b, b_to_a };

struct StepLosses {
  double g_adv_ab = 0, g_adv_ba = 0;
  double cycle_a = 0, cycle_b = 0;
  double identity_a = 0, identity_b = 0;
  double g_total = 0;
  double d_a = 0, d_b = 0;
};

struct TrainPlan {
  double base_lr = 2e-4;
  int64_t total_steps = 0;  // 0 disables the linear decay of the second half
};

template <typename T>
class CycleGanModel {
 public:
  CycleGanModel(const GeneratorSpec& gen_spec, const DiscriminatorSpec& dis_spec,
                const CycleGanLossWeights& weights, const TrainPlan& plan,
                uint64_t seed, size_t buffer_capacity = 50);

  // One generator step (adversarial + cycle both directions + identity) and
  // one step per discriminator (real batch vs replay-buffer fake).
  StepLosses train_step(const Tensor<T>& batch_a, const Tensor<T>& batch_b);

  // Deterministic inference; samples are processed one at a time internally.
  Tensor<T> translate(const Tensor<T>& imgs, Direction direction);

  // Gradient-check hooks: scalar generator objective and its analytic
  // gradients (no optimizer step).
  double generator_total_loss(const Tensor<T>& batch_a, const Tensor<T>& batch_b);
  void generator_backward(const Tensor<T>& batch_a, const Tensor<T>& batch_b);
  std::vector<nn::Param<T>*> generator_params();
  std::vector<nn::Param<T>*> all_params();

  int64_t step() const { return step_; }
  double current_lr() const;
  const GeneratorSpec& generator_spec() const { return gen_spec_; }
  const DiscriminatorSpec& discriminator_spec() const { return dis_spec_; }
  const CycleGanLossWeights& loss_weights() const { return weights_; }
  const ReplayBuffer<T>& buffer_a() const { return buffer_a_; }
  const ReplayBuffer<T>& buffer_b() const { return buffer_b_; }

  void save_checkpoint(const std::filesystem::path& path,
                       const std::string& config_hash) const;
  static std::unique_ptr<CycleGanModel<float>> load_checkpoint(
      const std::filesystem::path& path);

 private:
  template <typename U>
  friend class CycleGanModel;

  void check_batch(const Tensor<T>& batch, const char* who) const;

  GeneratorSpec gen_spec_;
  DiscriminatorSpec dis_spec_;
  CycleGanLossWeights weights_;
  TrainPlan plan_;
  nn::Sequential<T> g_ab_, g_ba_, d_a_, d_b_;
  ReplayBuffer<T> buffer_a_, buffer_b_;
  Rng rng_;
  int64_t step_ = 0;
  std::unique_ptr<nn::Adam<T>> opt_g_, opt_d_a_, opt_d_b_;
};

// For ceil(ratio * N_c) randomly chosen train records of each class, emit the
// translated image under the opposite label (source=generated, same patient).
// load_slice yields the preprocessed single-channel image for a record; the
// translated PNG lands in <cache>/generated/<direction>/<source-stem>.png.
std::vector<SliceRecord> generate_augmented_set(
    CycleGanModel<float>& model, const std::vector<SliceRecord>& train_records,
    double ratio, const std::filesystem::path& cache_dir,
    const std::function<Image(const SliceRecord&)>& load_slice, Rng& rng);

// [0,1] image -> [-1,1] model tensor resized to dim, and back.
Tensor<float> image_to_gan_tensor(const Image& img, int64_t dim);
Image gan_tensor_to_image(const Tensor<float>& t, int64_t sample_index = 0);

}  // namespace ctaug::gan
