#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctaug/data_catalog.hpp"
#include "ctaug/finetune.hpp"
#include "ctaug/preprocess.hpp"

namespace ctaug {

// One JSON file drives the whole experiment; --set key.path=value overrides
// individual fields, CTAUG_CACHE overrides cache_dir.
struct ExperimentConfig {
  std::string manifest_path;
  std::string cache_dir;
  std::string report_dir;
  std::string model_dir;          // default: <cache_dir>/models
  std::string model_profile = "micro";  // "micro" | "archive"

  struct Split {
    SplitRatios ratios;
    uint64_t seed = 1;
  } split;

  struct Preprocess {
    GaussianSpec gaussian;
    AugmentPolicy augment;  // carries presize_dim / final_dim
  } preprocess;

  struct CycleGan {
    bool enabled = true;
    double lambda_cycle = 10.0;
    double lambda_identity = 5.0;
    int64_t epochs = 100;
    double ratio = 1.0;
    std::string checkpoint;  // default: <cache_dir>/cyclegan.ckpt
    int64_t image_size = 256;
    int64_t base_width = 64;
    int64_t n_res_blocks = 0;  // 0 = pick from image_size
    int64_t d_layers = 4;
    double learning_rate = 2e-4;
    int64_t buffer_capacity = 50;
    uint64_t seed = 7;
  } cyclegan;

  struct Backbone {
    tune::BackboneId id = tune::BackboneId::resnet50;
    int64_t batch_size = 16;
    double learning_rate = 1e-3;
  };
  std::vector<Backbone> backbones;

  struct Training {
    int64_t stage1_epochs = 1;
    int64_t stage2_max_epochs = 50;
    int64_t patience = 5;
    tune::TrainConfig::Metric early_stop_metric =
        tune::TrainConfig::Metric::val_loss;
    int64_t n_runs = 10;
    uint64_t seed = 42;
  } training;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path,
                                    const std::vector<std::string>& overrides);
  nlohmann::json to_json() const;
  std::string hash() const;  // sha256 of the canonical JSON dump
  void validate() const;

  std::filesystem::path cyclegan_checkpoint_path() const;
  std::filesystem::path split_path() const;
  std::filesystem::path prepare_meta_path() const;
  std::filesystem::path augmented_manifest_path() const;
  std::filesystem::path models_path() const;
};

// Table defaults: batch 16 throughout; lr 1e-3 except resnest50 (1e-4) and
// vit (1e-5).
double default_learning_rate(tune::BackboneId id);

// Applies "a.b.c=value" to a JSON document; the value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace ctaug
