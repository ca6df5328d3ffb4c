#include "ctaug/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ctaug/errors.hpp"
#include "ctaug/serialize.hpp"

namespace ctaug::tune {

Classifier::Classifier(nn::Sequential<float> body, int64_t feature_dim,
                       int64_t n_classes, uint64_t head_seed)
    : body_(std::move(body)), head_(feature_dim, n_classes),
      feature_dim_(feature_dim), n_classes_(n_classes) {
  // near-zero logits at start: first-batch cross-entropy sits at ~ln(n_classes)
  Rng rng(head_seed);
  auto params = head_params();
  for (nn::Param<float>* p : params) {
    if (p->value.rank() == 2) {
      for (int64_t i = 0; i < p->value.numel(); ++i)
        p->value[i] = static_cast<float>(rng.normal(0.0, 0.01));
    } else {
      p->value.zero();
    }
  }
}

Tensor<float> Classifier::forward(const Tensor<float>& x, nn::Mode body_mode,
                                  nn::Mode head_mode) {
  Tensor<float> features = body_.forward(x, body_mode);
  if (features.rank() != 2 || features.dim(1) != feature_dim_)
    throw TrainingError("backbone produced features of shape " +
                        shape_string(features.shape()) + ", expected [N, " +
                        std::to_string(feature_dim_) + "]");
  return head_.forward(features, head_mode);
}

Tensor<float> Classifier::forward_eval(const Tensor<float>& x) {
  return forward(x, nn::Mode::eval, nn::Mode::eval);
}

void Classifier::backward(const Tensor<float>& glogits, bool through_body) {
  Tensor<float> gfeatures = head_.backward(glogits);
  if (through_body) body_.backward(gfeatures);
}

std::vector<nn::Param<float>*> Classifier::head_params() {
  std::vector<nn::Param<float>*> out;
  head_.collect_params("head.", out);
  return out;
}

void Classifier::release_caches() {
  body_.release_caches();
  head_.release_caches();
}

Classifier build_classifier(const ModelProvider& provider, BackboneSpec& spec,
                            int64_t n_classes, uint64_t head_seed) {
  BackboneArchive archive = provider.load(spec.id);
  if (spec.input_dim < archive.min_input)
    throw ConfigError("backbone " + std::string(to_string(spec.id)) +
                      " needs input_dim >= " + std::to_string(archive.min_input));
  if (spec.input_dim % archive.input_divisor != 0)
    throw ConfigError("backbone " + std::string(to_string(spec.id)) +
                      ": input_dim " + std::to_string(spec.input_dim) +
                      " is not divisible by patch size " +
                      std::to_string(archive.input_divisor));
  nn::Sequential<float> body = nn::sequential_from_spec<float>(archive.graph);
  if (spec.pretrained) {
    for (nn::Param<float>* p : body.params()) {
      const auto it = archive.weights.find(p->name);
      if (it == archive.weights.end())
        throw DataError("backbone archive is missing tensor \"" + p->name + "\"");
      if (!it->second.same_shape(p->value))
        throw DataError("backbone archive tensor \"" + p->name +
                        "\" has the wrong shape");
      p->value = it->second;
    }
  } else {
    Rng rng(head_seed + 1);
    nn::init_kaiming(body, rng);
  }
  spec.feature_dim = archive.feature_dim;
  return Classifier(std::move(body), archive.feature_dim, n_classes, head_seed);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (early_stop_patience < 1) throw ConfigError("patience must be >= 1");
  if (stage1_epochs < 0 || stage2_max_epochs < 0)
    throw ConfigError("epoch counts must be non-negative");
  if (stage1_epochs + stage2_max_epochs < 1)
    throw ConfigError("at least one training epoch is required");
  if (aug_ratio < 0 || aug_ratio > 1)
    throw ConfigError("aug_ratio must be in [0,1]");
}

void save_curve_csv(const std::filesystem::path& path, const LearningCurve& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write curve CSV: " + path.string());
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& p : c)
    out << p.epoch << ',' << p.train_loss << ',' << p.val_loss << ','
        << p.val_accuracy << "\n";
}

std::pair<StopSignal, int64_t> early_stop_check(const LearningCurve& curve,
                                                int64_t patience,
                                                TrainConfig::Metric metric) {
  if (curve.empty()) throw std::invalid_argument("early_stop_check: empty curve");
  size_t best = 0;
  for (size_t i = 1; i < curve.size(); ++i) {
    if (metric == TrainConfig::Metric::val_loss) {
      if (curve[i].val_loss < curve[best].val_loss) best = i;
    } else {
      if (curve[i].val_accuracy > curve[best].val_accuracy) best = i;
    }
  }
  const auto last = static_cast<int64_t>(curve.size()) - 1;
  const auto best_i = static_cast<int64_t>(best);
  return {last - best_i > patience ? StopSignal::stop
                                   : StopSignal::continue_training,
          curve[best].epoch};
}

namespace {

struct EpochStats {
  double loss = 0;
  double accuracy = 0;
};

Tensor<float> assemble_batch(ExampleSource& src, const std::vector<size_t>& idx,
                             size_t begin, size_t end, bool train_mode, Rng& rng,
                             std::vector<int>& labels_out) {
  labels_out.clear();
  Tensor<float> batch;
  for (size_t i = begin; i < end; ++i) {
    const Tensor<float> one = src.fetch(idx[i], train_mode, rng);
    if (one.rank() != 3)
      throw TrainingError("example source must yield [C,H,W] tensors");
    if (batch.empty()) {
      batch = Tensor<float>({static_cast<int64_t>(end - begin), one.dim(0),
                             one.dim(1), one.dim(2)});
    }
    std::copy(one.data(), one.data() + one.numel(),
              batch.data() + static_cast<int64_t>(i - begin) * one.numel());
    labels_out.push_back(src.label(idx[i]));
  }
  return batch;
}

EpochStats evaluate_epoch(Classifier& clf, ExampleSource& val, int64_t batch_size,
                          Rng& rng) {
  EpochStats stats;
  const size_t n = val.size();
  if (n == 0) throw TrainingError("empty validation stream");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::vector<int> labels;
  size_t correct = 0;
  double total_loss = 0;
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(n, start + static_cast<size_t>(batch_size));
    Tensor<float> batch = assemble_batch(val, idx, start, stop, false, rng, labels);
    Tensor<float> logits = clf.forward_eval(batch);
    const auto ce = nn::softmax_cross_entropy(logits, labels);
    total_loss += ce.value * static_cast<double>(stop - start);
    for (size_t i = 0; i < labels.size(); ++i) {
      const int64_t row = static_cast<int64_t>(i);
      const int pred =
          logits.at(row, 0) >= logits.at(row, 1) ? 0 : 1;
      if (pred == labels[i]) ++correct;
    }
  }
  stats.loss = total_loss / static_cast<double>(n);
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return stats;
}

struct Snapshot {
  std::vector<Tensor<float>> values;
};

Snapshot take_snapshot(Classifier& clf) {
  Snapshot s;
  for (auto* p : clf.body_params()) s.values.push_back(p->value);
  for (auto* p : clf.head_params()) s.values.push_back(p->value);
  return s;
}

void restore_snapshot(Classifier& clf, const Snapshot& s) {
  size_t i = 0;
  for (auto* p : clf.body_params()) p->value = s.values[i++];
  for (auto* p : clf.head_params()) p->value = s.values[i++];
}

}  // namespace

TrainRun two_stage_finetune(Classifier& clf, ExampleSource& train,
                            ExampleSource& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw TrainingError("empty training stream");
  if (val.size() == 0) throw TrainingError("empty validation stream");

  Rng train_rng(cfg.seed);
  Rng eval_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  nn::Adam<float> opt_head(clf.head_params(), cfg.learning_rate);
  std::vector<int> labels;

  auto train_epoch = [&](bool through_body, nn::Adam<float>* opt_body,
                         int64_t epoch) {
    std::vector<size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    train_rng.shuffle(idx);
    double total_loss = 0;
    for (size_t start = 0; start < idx.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop =
          std::min(idx.size(), start + static_cast<size_t>(cfg.batch_size));
      Tensor<float> batch =
          assemble_batch(train, idx, start, stop, true, train_rng, labels);
      Tensor<float> logits =
          clf.forward(batch, through_body ? nn::Mode::train : nn::Mode::eval,
                      nn::Mode::train);
      const auto ce = nn::softmax_cross_entropy(logits, labels);
      if (!std::isfinite(ce.value))
        throw TrainingError("non-finite training loss at epoch " +
                            std::to_string(epoch));
      total_loss += ce.value * static_cast<double>(stop - start);
      clf.backward(ce.grad, through_body);
      opt_head.step();
      opt_head.zero_grad();
      if (opt_body) {
        opt_body->step();
        opt_body->zero_grad();
      }
    }
    return total_loss / static_cast<double>(train.size());
  };

  TrainRun run;
  run.config = cfg;
  int64_t epoch = 0;

  // best_epoch spans the whole curve and its weights are what the caller
  // gets back; the early-stopping window below covers stage 2 only.
  std::optional<Snapshot> best_weights;
  const auto improved = [&](const EpochPoint& pt) {
    const auto [_, best] = early_stop_check(run.curve, cfg.early_stop_patience,
                                            cfg.early_stop_metric);
    return best == pt.epoch;
  };
  const auto record_epoch = [&](EpochPoint pt) {
    run.curve.push_back(pt);
    if (improved(pt)) {
      run.best_epoch = pt.epoch;
      best_weights = take_snapshot(clf);
    }
  };

  // Stage 1: head only; body parameters must remain bit-identical.
  for (int64_t e = 0; e < cfg.stage1_epochs; ++e, ++epoch) {
    EpochPoint pt;
    pt.epoch = epoch;
    pt.train_loss = train_epoch(false, nullptr, epoch);
    const EpochStats vs = evaluate_epoch(clf, val, cfg.batch_size, eval_rng);
    pt.val_loss = vs.loss;
    pt.val_accuracy = vs.accuracy;
    record_epoch(pt);
  }

  // Stage 2: unfreeze with a discriminative body rate.
  if (cfg.stage2_max_epochs > 0) {
    nn::Adam<float> opt_body(clf.body_params(), cfg.learning_rate / 10.0);
    LearningCurve stage2;
    for (int64_t e = 0; e < cfg.stage2_max_epochs; ++e, ++epoch) {
      EpochPoint pt;
      pt.epoch = epoch;
      pt.train_loss = train_epoch(true, &opt_body, epoch);
      const EpochStats vs = evaluate_epoch(clf, val, cfg.batch_size, eval_rng);
      pt.val_loss = vs.loss;
      pt.val_accuracy = vs.accuracy;
      record_epoch(pt);
      stage2.push_back(pt);
      if (early_stop_check(stage2, cfg.early_stop_patience,
                           cfg.early_stop_metric)
              .first == StopSignal::stop)
        break;
    }
  }
  if (best_weights) restore_snapshot(clf, *best_weights);
  clf.release_caches();
  return run;
}

Tensor<float> predict_probs(Classifier& clf, const Tensor<float>& imgs) {
  Tensor<float> logits = clf.forward_eval(imgs);
  return nn::softmax(logits);
}

void save_classifier(const std::filesystem::path& path, Classifier& clf,
                     const BackboneSpec& spec, int64_t best_epoch,
                     const std::string& config_hash) {
  nn::ArchiveWriter w(kClassifierMagic);
  auto& meta = w.meta();
  meta["backbone"] = to_string(spec.id);
  meta["pretrained"] = spec.pretrained;
  meta["input_dim"] = spec.input_dim;
  meta["feature_dim"] = clf.feature_dim();
  meta["n_classes"] = clf.n_classes();
  meta["best_epoch"] = best_epoch;
  meta["config_hash"] = config_hash;
  meta["graph"] = clf.body().spec();
  nn::save_layer_params(w, clf.body(), "body.");
  for (nn::Param<float>* p : clf.head_params()) w.add_tensor(p->name, p->value);
  w.write(path);
}

Classifier load_classifier(const std::filesystem::path& path,
                           BackboneSpec& spec_out) {
  nn::ArchiveReader r(path, kClassifierMagic);
  const auto& meta = r.meta();
  spec_out.id = backbone_id_from_string(meta.at("backbone").get<std::string>());
  spec_out.pretrained = meta.at("pretrained").get<bool>();
  spec_out.input_dim = meta.at("input_dim").get<int64_t>();
  spec_out.feature_dim = meta.at("feature_dim").get<int64_t>();
  nn::Sequential<float> body = nn::sequential_from_spec<float>(meta.at("graph"));
  nn::load_layer_params(r, body, "body.");
  Classifier clf(std::move(body), spec_out.feature_dim,
                 meta.at("n_classes").get<int64_t>(), 0);
  for (nn::Param<float>* p : clf.head_params()) {
    Tensor<float> t = r.tensor(p->name);
    p->value = std::move(t);
  }
  return clf;
}

}  // namespace ctaug::tune
