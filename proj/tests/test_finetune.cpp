#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ctaug/errors.hpp"
#include "ctaug/finetune.hpp"
#include "ctaug/preprocess.hpp"
#include "testutil.hpp"

using namespace ctaug;
using namespace ctaug::tune;

namespace {

// In-memory two-class source: class 0 bright images, class 1 dark images.
class SyntheticSource final : public ExampleSource {
 public:
  SyntheticSource(size_t n, int64_t dim, uint64_t seed) {
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
      const int lab = i % 2 == 0 ? 0 : 1;
      labels_.push_back(lab);
      const Image img = testutil::intensity_image(dim, lab, rng);
      const Image std3 = to_model_tensor(img, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
      Tensor<float> t({3, dim, dim});
      std::copy(std3.pixels.begin(), std3.pixels.end(), t.data());
      images_.push_back(std::move(t));
    }
  }
  size_t size() const override { return images_.size(); }
  int label(size_t i) const override { return labels_[i]; }
  Tensor<float> fetch(size_t i, bool, Rng&) override { return images_[i]; }

 private:
  std::vector<Tensor<float>> images_;
  std::vector<int> labels_;
};

struct ProviderFixture {
  testutil::TempDir tmp{"provider"};
  ProviderFixture() { ModelProvider::ensure_micro_archives(tmp.path()); }
  ModelProvider provider() const { return ModelProvider(tmp.path()); }
};

}  // namespace

TEST_CASE("provider: archives exist for all five ids and reload identically") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  for (const BackboneId id : all_backbone_ids()) {
    CHECK(provider.available(id));
    const BackboneArchive a = provider.load(id);
    CHECK(a.feature_dim > 0);
    CHECK(!a.weights.empty());
  }
  // regeneration is deterministic: same bytes, so idempotent reruns are safe
  const auto before = std::filesystem::file_size(
      provider.archive_path(BackboneId::resnet50));
  ModelProvider::write_micro_archive(provider.archive_path(BackboneId::resnet50),
                                     BackboneId::resnet50);
  CHECK(std::filesystem::file_size(provider.archive_path(BackboneId::resnet50)) ==
        before);
}

TEST_CASE("provider: missing weights fail construction") {
  testutil::TempDir tmp("empty_provider");
  const ModelProvider provider(tmp.path());
  BackboneSpec spec;
  spec.id = BackboneId::resnet50;
  CHECK_THROWS_AS(build_classifier(provider, spec, 2), ConfigError);
  CHECK_THROWS_AS(backbone_id_from_string("alexnet"), ConfigError);
}

TEST_CASE("build_classifier: two logits for a (B,3,224,224) input") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::resnet50;
  spec.input_dim = 224;
  Classifier clf = build_classifier(provider, spec, 2, 7);
  CHECK(spec.feature_dim == 32);

  Rng rng(1);
  Tensor<float> x({2, 3, 224, 224});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal(0, 1));
  Tensor<float> logits = clf.forward_eval(x);
  CHECK(logits.shape() == std::vector<int64_t>{2, 2});
}

TEST_CASE("build_classifier: body equals the provider's pretrained values") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  const BackboneArchive archive = provider.load(BackboneId::densenet121);
  BackboneSpec spec;
  spec.id = BackboneId::densenet121;
  spec.input_dim = 64;
  Classifier clf = build_classifier(provider, spec, 2, 8);
  for (nn::Param<float>* p : clf.body_params()) {
    const auto it = archive.weights.find(p->name);
    REQUIRE(it != archive.weights.end());
    for (int64_t i = 0; i < p->value.numel(); ++i)
      CHECK(p->value[i] == it->second[i]);
  }
}

TEST_CASE("build_classifier: vit rejects non-divisible input sizes") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::vit;
  spec.input_dim = 225;  // 225 mod 16 != 0
  CHECK_THROWS_AS(build_classifier(provider, spec, 2), ConfigError);
  spec.input_dim = 224;
  CHECK_NOTHROW(build_classifier(provider, spec, 2));
}

TEST_CASE("early_stop_check: hand traces") {
  const auto curve_of = [](const std::vector<double>& losses) {
    LearningCurve c;
    for (size_t i = 0; i < losses.size(); ++i)
      c.push_back({int64_t(i), 0.0, losses[i], 0.0});
    return c;
  };

  // val_losses [1.0, 0.9, 0.95, 0.96, 0.97], patience 2 -> stop after epoch 4
  {
    const auto c = curve_of({1.0, 0.9, 0.95, 0.96, 0.97});
    const auto [sig, best] =
        early_stop_check(c, 2, TrainConfig::Metric::val_loss);
    CHECK(sig == StopSignal::stop);
    CHECK(best == 1);
    // one epoch earlier it keeps going
    const auto c4 = curve_of({1.0, 0.9, 0.95, 0.96});
    CHECK(early_stop_check(c4, 2, TrainConfig::Metric::val_loss).first ==
          StopSignal::continue_training);
  }
  // strictly improving: continue, best = latest
  {
    const auto c = curve_of({1.0, 0.8, 0.6, 0.4});
    const auto [sig, best] =
        early_stop_check(c, 1, TrainConfig::Metric::val_loss);
    CHECK(sig == StopSignal::continue_training);
    CHECK(best == 3);
  }
  // patience longer than the curve: continue
  {
    const auto c = curve_of({1.0, 1.1, 1.2});
    CHECK(early_stop_check(c, 10, TrainConfig::Metric::val_loss).first ==
          StopSignal::continue_training);
  }
  // accuracy metric maximizes
  {
    LearningCurve c;
    for (size_t i = 0; i < 4; ++i) c.push_back({int64_t(i), 0, 0, 0.5 + 0.1 * i});
    const auto [sig, best] =
        early_stop_check(c, 2, TrainConfig::Metric::val_accuracy);
    CHECK(sig == StopSignal::continue_training);
    CHECK(best == 3);
  }
}

TEST_CASE("first-batch cross entropy of a fresh head sits near ln 2") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::efficientnet_b3;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 9);
  SyntheticSource data(16, 32, 100);
  Rng rng(2);
  Tensor<float> batch({16, 3, 32, 32});
  std::vector<int> labels;
  for (size_t i = 0; i < 16; ++i) {
    const auto one = data.fetch(i, false, rng);
    std::copy(one.data(), one.data() + one.numel(),
              batch.data() + int64_t(i) * one.numel());
    labels.push_back(data.label(i));
  }
  const auto ce =
      nn::softmax_cross_entropy(clf.forward_eval(batch), labels);
  CHECK(std::abs(ce.value - std::log(2.0)) < 0.2);
}

TEST_CASE("two-stage: stage 1 leaves body parameters bit-identical") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::efficientnet_b3;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 10);

  std::vector<Tensor<float>> before;
  for (auto* p : clf.body_params()) before.push_back(p->value);

  SyntheticSource train(24, 32, 200), val(8, 32, 201);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.stage1_epochs = 2;
  cfg.stage2_max_epochs = 0;  // stage 1 only
  cfg.seed = 3;
  const TrainRun run = two_stage_finetune(clf, train, val, cfg);
  CHECK(run.curve.size() == 2);

  size_t i = 0;
  for (auto* p : clf.body_params()) {
    const auto& old = before[i++];
    for (int64_t j = 0; j < p->value.numel(); ++j) CHECK(p->value[j] == old[j]);
  }
}

TEST_CASE("two-stage: learns a separable set and obeys the stopping bound") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::efficientnet_b3;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 11);

  SyntheticSource train(40, 32, 300), val(16, 32, 301);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.stage1_epochs = 1;
  cfg.stage2_max_epochs = 8;
  cfg.early_stop_patience = 3;
  cfg.seed = 4;
  const TrainRun run = two_stage_finetune(clf, train, val, cfg);

  CHECK(run.curve.back().val_accuracy >= 0.95);
  // epochs strictly increasing from 0
  for (size_t i = 0; i < run.curve.size(); ++i)
    CHECK(run.curve[i].epoch == int64_t(i));
  // early stopping bound on stage-2 length
  const int64_t stage2_epochs = int64_t(run.curve.size()) - cfg.stage1_epochs;
  const int64_t best_sub = run.best_epoch - cfg.stage1_epochs;
  CHECK(stage2_epochs <= best_sub + cfg.early_stop_patience + 1);
  CHECK(run.best_epoch >= cfg.stage1_epochs);
}

TEST_CASE("two-stage: seeded determinism of the learning curve") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  const auto run_once = [&] {
    BackboneSpec spec;
    spec.id = BackboneId::densenet121;
    spec.input_dim = 32;
    Classifier clf = build_classifier(provider, spec, 2, 12);
    SyntheticSource train(24, 32, 400), val(8, 32, 401);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.stage1_epochs = 1;
    cfg.stage2_max_epochs = 2;
    cfg.seed = 5;
    return two_stage_finetune(clf, train, val, cfg);
  };
  const TrainRun r1 = run_once();
  const TrainRun r2 = run_once();
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(std::abs(r1.curve[i].train_loss - r2.curve[i].train_loss) <= 1e-6);
    CHECK(std::abs(r1.curve[i].val_loss - r2.curve[i].val_loss) <= 1e-6);
    CHECK(std::abs(r1.curve[i].val_accuracy - r2.curve[i].val_accuracy) <= 1e-6);
  }
  CHECK(r1.best_epoch == r2.best_epoch);
}

TEST_CASE("two-stage: empty streams are rejected") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::densenet121;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 13);
  SyntheticSource empty(0, 32, 500), val(4, 32, 501);
  TrainConfig cfg;
  CHECK_THROWS_AS(two_stage_finetune(clf, empty, val, cfg), TrainingError);
}

TEST_CASE("predict_probs: rows sum to one, deterministic") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::resnest50;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 14);
  Rng rng(6);
  Tensor<float> x({5, 3, 32, 32});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal(0, 1));
  const Tensor<float> p1 = predict_probs(clf, x);
  const Tensor<float> p2 = predict_probs(clf, x);
  for (int64_t i = 0; i < 5; ++i) {
    CHECK(std::abs(p1.at(i, 0) + p1.at(i, 1) - 1.0f) <= 1e-6f);
    CHECK(p1.at(i, 0) == p2.at(i, 0));
  }
}

TEST_CASE("classifier checkpoint round-trip") {
  ProviderFixture fx;
  testutil::TempDir tmp("clf");
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::vit;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 15);

  const auto path = tmp.path() / "clf.ckpt";
  save_classifier(path, clf, spec, 3, "deadbeef");
  BackboneSpec restored_spec;
  Classifier restored = load_classifier(path, restored_spec);
  CHECK(restored_spec.id == BackboneId::vit);

  Rng rng(7);
  Tensor<float> x({2, 3, 32, 32});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal(0, 1));
  const Tensor<float> y1 = clf.forward_eval(x);
  const Tensor<float> y2 = restored.forward_eval(x);
  for (int64_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("head gradient check over a frozen backbone's features") {
  ProviderFixture fx;
  const auto provider = fx.provider();
  BackboneSpec spec;
  spec.id = BackboneId::resnet50;
  spec.input_dim = 32;
  Classifier clf = build_classifier(provider, spec, 2, 16);

  // frozen body produces the features; the head path is replicated in
  // double precision for the finite-difference comparison
  SyntheticSource data(12, 32, 600);
  Rng rng(8);
  Tensor<float> batch({12, 3, 32, 32});
  std::vector<int> labels;
  for (size_t i = 0; i < 12; ++i) {
    const auto one = data.fetch(i, false, rng);
    std::copy(one.data(), one.data() + one.numel(),
              batch.data() + int64_t(i) * one.numel());
    labels.push_back(data.label(i));
  }
  const Tensor<float> features = clf.body().forward(batch, nn::Mode::eval);

  nn::Linear<double> head(clf.feature_dim(), 2);
  Rng hrng(17);
  nn::init_normal<double>(head, hrng, 0.05);
  Tensor<double> x({features.dim(0), features.dim(1)});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = double(features[i]);

  auto loss_of = [&] {
    return nn::softmax_cross_entropy(head.forward(x, nn::Mode::eval), labels)
        .value;
  };
  for (auto* p : nn::named_params<double>(head)) p->zero_grad();
  const auto ce = nn::softmax_cross_entropy(head.forward(x, nn::Mode::train),
                                            labels);
  head.backward(ce.grad);

  const double h = 1e-6;
  for (auto* p : nn::named_params<double>(head)) {
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double fp = loss_of();
      p->value[i] = saved - h;
      const double fm = loss_of();
      p->value[i] = saved;
      const double fd = (fp - fm) / (2 * h);
      const double an = p->grad[i];
      if (std::abs(fd - an) < 1e-9) continue;
      CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) <=
            1e-3);
    }
  }
}
