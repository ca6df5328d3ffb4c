#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctaug/nn.hpp"
#include "ctaug/rng.hpp"

namespace ctaug::tune {

inline constexpr char kClassifierMagic[] = "CLF-CKPT-v1";
inline constexpr char kBackboneMagic[] = "CTMOD-v1";

// Logit/probability column convention: index 0 = covid, index 1 = normal.
inline constexpr int kCovidIndex = 0;
inline constexpr int kNormalIndex = 1;

enum class BackboneId { densenet121, efficientnet_b3, resnet50, resnest50, vit };
const char* to_string(BackboneId id);
BackboneId backbone_id_from_string(const std::string& s);
std::vector<BackboneId> all_backbone_ids();

struct BackboneSpec {
  BackboneId id = BackboneId::resnet50;
  bool pretrained = true;  // load provider weights; false re-initializes
  int64_t input_dim = 224;
  int64_t feature_dim = 0;  // filled from the provider archive
};

struct BackboneArchive {
  std::string id;
  nlohmann::json graph;
  int64_t feature_dim = 0;
  int64_t input_divisor = 1;  // patch models require divisible input
  int64_t min_input = 8;
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.25, 0.25, 0.25};
  std::map<std::string, Tensor<float>> weights;
};

// Resolves backbone ids to weight archives in a directory. Real deployments
// export pretrained weights into the archive format (see README); the micro
// profile writes small deterministic stand-in backbones for CPU-scale runs.
class ModelProvider {
 public:
  explicit ModelProvider(std::filesystem::path dir);

  std::filesystem::path archive_path(BackboneId id) const;
  bool available(BackboneId id) const;
  BackboneArchive load(BackboneId id) const;

  static void write_micro_archive(const std::filesystem::path& path,
                                  BackboneId id);
  static void ensure_micro_archives(const std::filesystem::path& dir);

 private:
  std::filesystem::path dir_;
};

// Pretrained body (conv stack ending in pooled features) plus a fresh linear
// head. Body and head parameters form the two fine-tuning groups.
class Classifier {
 public:
  Classifier(nn::Sequential<float> body, int64_t feature_dim, int64_t n_classes,
             uint64_t head_seed);

  // Body cache-keeping is independent of the head so stage 1 can skip the
  // body backward entirely.
  Tensor<float> forward(const Tensor<float>& x, nn::Mode body_mode,
                        nn::Mode head_mode);
  Tensor<float> forward_eval(const Tensor<float>& x);
  // through_body=false updates only head gradients.
  void backward(const Tensor<float>& glogits, bool through_body);

  std::vector<nn::Param<float>*> body_params() { return body_.params(); }
  std::vector<nn::Param<float>*> head_params();
  nn::Sequential<float>& body() { return body_; }
  int64_t n_classes() const { return n_classes_; }
  int64_t feature_dim() const { return feature_dim_; }
  void release_caches();

 private:
  nn::Sequential<float> body_;
  nn::Linear<float> head_;
  int64_t feature_dim_, n_classes_;
};

// Errors: unknown backbone id / missing provider weights (ConfigError);
// input_dim not divisible by the archive's patch size or below its minimum.
Classifier build_classifier(const ModelProvider& provider, BackboneSpec& spec,
                            int64_t n_classes, uint64_t head_seed = 0);

struct TrainConfig {
  int64_t batch_size = 16;
  double learning_rate = 1e-3;
  int64_t stage1_epochs = 1;
  int64_t stage2_max_epochs = 50;
  int64_t early_stop_patience = 5;
  enum class Metric { val_loss, val_accuracy };
  Metric early_stop_metric = Metric::val_loss;
  uint64_t seed = 0;
  bool use_cyclegan_aug = false;
  double aug_ratio = 1.0;

  void validate() const;
};

struct EpochPoint {
  int64_t epoch = 0;
  double train_loss = 0, val_loss = 0, val_accuracy = 0;
};
using LearningCurve = std::vector<EpochPoint>;

void save_curve_csv(const std::filesystem::path& path, const LearningCurve& c);

enum class StopSignal { continue_training, stop };

// Stop once the best metric value lies more than `patience` epochs back;
// best_epoch is the first epoch achieving the best value.
std::pair<StopSignal, int64_t> early_stop_check(const LearningCurve& curve,
                                                int64_t patience,
                                                TrainConfig::Metric metric);

// Batch data feed; fetch returns a standardized [C,H,W] tensor. Labels are
// class indices (kCovidIndex / kNormalIndex).
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual size_t size() const = 0;
  virtual int label(size_t i) const = 0;
  virtual Tensor<float> fetch(size_t i, bool train_mode, Rng& rng) = 0;
};

struct TrainRun {
  TrainConfig config;
  LearningCurve curve;
  int64_t best_epoch = 0;
};

// Stage 1: body frozen, head trained for stage1_epochs at learning_rate.
// Stage 2: everything unfrozen (body at learning_rate/10) until early
// stopping or stage2_max_epochs; best-metric weights restored at the end.
TrainRun two_stage_finetune(Classifier& clf, ExampleSource& train,
                            ExampleSource& val, const TrainConfig& cfg);

// Softmax over the two logits, each row summing to 1.
Tensor<float> predict_probs(Classifier& clf, const Tensor<float>& imgs);

void save_classifier(const std::filesystem::path& path, Classifier& clf,
                     const BackboneSpec& spec, int64_t best_epoch,
                     const std::string& config_hash);
Classifier load_classifier(const std::filesystem::path& path,
                           BackboneSpec& spec_out);

}  // namespace ctaug::tune
