#pragma once

#include <filesystem>
#include <vector>

#include "ctaug/config.hpp"
#include "ctaug/data_catalog.hpp"
#include "ctaug/finetune.hpp"
#include "ctaug/image.hpp"

namespace ctaug::cli {

// Subcommand bodies; errors surface as ConfigError/DataError/TrainingError
// and map to exit codes 1/2/3 in main.
void cmd_prepare(const ExperimentConfig& cfg);
void cmd_train_cyclegan(const ExperimentConfig& cfg);
void cmd_generate(const ExperimentConfig& cfg);
void cmd_train_eval(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

// Refuses records outside the train partition (split-safety guard for the
// CycleGAN training set and augmentation inputs).
void assert_train_only(const std::vector<SliceRecord>& records,
                       const SplitAssignment& split);

// Preprocessed image for a record: generated slices load directly, originals
// resolve through the filter cache.
Image load_processed_slice(const SliceRecord& record,
                           const ExperimentConfig& cfg);

// Train/val/test feed over slice records; train mode applies random crop +
// augmentation, eval mode presize + center crop. Output is the standardized
// 3-channel tensor the backbones expect.
class SliceSource final : public tune::ExampleSource {
 public:
  SliceSource(std::vector<SliceRecord> records, const ExperimentConfig& cfg,
              std::array<double, 3> mean, std::array<double, 3> stddev);

  size_t size() const override { return records_.size(); }
  int label(size_t i) const override;
  Tensor<float> fetch(size_t i, bool train_mode, Rng& rng) override;

  const std::vector<SliceRecord>& records() const { return records_; }

 private:
  std::vector<SliceRecord> records_;
  const ExperimentConfig& cfg_;
  std::array<double, 3> mean_, stddev_;
};

// Markdown tables mirroring the two result tables, rebuilt from the
// eval_*.json files in report_dir.
void render_comparison(const std::filesystem::path& report_dir);

}  // namespace ctaug::cli
