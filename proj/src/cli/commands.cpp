#include "ctaug/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "ctaug/cyclegan.hpp"
#include "ctaug/errors.hpp"
#include "ctaug/evalkit.hpp"
#include "ctaug/plot.hpp"
#include "ctaug/preprocess.hpp"
#include "ctaug/serialize.hpp"

namespace ctaug::cli {

namespace {

std::filesystem::path cache_path_for(const SliceRecord& record,
                                     const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.cache_dir) /
         cache_file_name(record.slice_path, cfg.preprocess.gaussian);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json require_prepare_meta(const ExperimentConfig& cfg) {
  const auto path = cfg.prepare_meta_path();
  if (!std::filesystem::exists(path))
    throw DataError("no prepared cache found (" + path.string() +
                    "); run `ctaug prepare` first");
  nlohmann::json meta = nlohmann::json::parse(read_text(path));
  const std::string have = meta.at("config_hash").get<std::string>();
  if (have != cfg.hash())
    throw DataError("cache was prepared with a different config (hash " + have +
                    " vs " + cfg.hash() + "); re-run `ctaug prepare`");
  return meta;
}

SplitAssignment load_split(const ExperimentConfig& cfg) {
  return SplitAssignment::from_json(read_text(cfg.split_path()));
}

std::vector<SliceRecord> original_only(std::vector<SliceRecord> records) {
  std::erase_if(records,
                [](const SliceRecord& r) { return r.source != Source::original; });
  return records;
}

gan::GeneratorSpec generator_spec_from(const ExperimentConfig& cfg) {
  gan::GeneratorSpec gs;
  gs.input_dim = cfg.cyclegan.image_size;
  gs.channels = 1;
  gs.base_width = cfg.cyclegan.base_width;
  gs.n_res_blocks = cfg.cyclegan.n_res_blocks > 0
                        ? cfg.cyclegan.n_res_blocks
                        : gan::default_res_blocks(cfg.cyclegan.image_size);
  return gs;
}

struct PartitionCounts {
  int64_t patients = 0, slices = 0, covid = 0, normal = 0;
};

PartitionCounts count_partition(const std::vector<SliceRecord>& records) {
  PartitionCounts c;
  std::set<std::string> patients;
  for (const auto& r : records) {
    patients.insert(r.patient_id);
    ++c.slices;
    (r.label == Label::covid ? c.covid : c.normal) += 1;
  }
  c.patients = static_cast<int64_t>(patients.size());
  return c;
}

}  // namespace

void assert_train_only(const std::vector<SliceRecord>& records,
                       const SplitAssignment& split) {
  for (const auto& r : records) {
    const auto it = split.partition_of.find(r.patient_id);
    if (it == split.partition_of.end())
      throw DataError("record for unknown patient \"" + r.patient_id + "\"");
    if (it->second != Partition::train)
      throw DataError("refusing to consume non-train slice " + r.slice_path +
                      " (patient " + r.patient_id + " is in " +
                      to_string(it->second) + ")");
  }
}

Image load_processed_slice(const SliceRecord& record,
                           const ExperimentConfig& cfg) {
  if (record.source == Source::generated)
    return load_image_gray(record.slice_path);
  return load_image_gray(cache_path_for(record, cfg));
}

SliceSource::SliceSource(std::vector<SliceRecord> records,
                         const ExperimentConfig& cfg, std::array<double, 3> mean,
                         std::array<double, 3> stddev)
    : records_(std::move(records)), cfg_(cfg), mean_(mean), stddev_(stddev) {}

int SliceSource::label(size_t i) const {
  return records_[i].label == Label::covid ? tune::kCovidIndex
                                           : tune::kNormalIndex;
}

Tensor<float> SliceSource::fetch(size_t i, bool train_mode, Rng& rng) {
  const Image base = load_processed_slice(records_[i], cfg_);
  const AugmentPolicy& policy = cfg_.preprocess.augment;
  Image sized = train_mode
                    ? presize_and_crop(base, policy, CropMode::random, &rng)
                    : presize_and_crop(base, policy, CropMode::center);
  if (train_mode) sized = augment(sized, policy, rng);
  const Image standardized = to_model_tensor(sized, mean_, stddev_);
  Tensor<float> t({standardized.channels, standardized.height,
                   standardized.width});
  std::copy(standardized.pixels.begin(), standardized.pixels.end(), t.data());
  return t;
}

// ---------------------------------------------------------------------------

void cmd_prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  const DatasetManifest manifest = load_manifest_checked(cfg.manifest_path);
  if (manifest.size() == 0) throw DataError("manifest has no records");
  std::filesystem::create_directories(cfg.cache_dir);
  std::filesystem::create_directories(cfg.report_dir);

  const SplitAssignment split =
      split_by_patient(manifest, cfg.split.ratios, cfg.split.seed);
  write_text(cfg.split_path(), split.to_json());

  size_t written = 0;
  for (const auto& record : manifest.records()) {
    const auto dest = cache_path_for(record, cfg);
    if (std::filesystem::exists(dest)) continue;
    const Image img = load_image_gray(record.slice_path);
    save_png_gray16(dest, gaussian_filter(img, cfg.preprocess.gaussian));
    ++written;
  }

  nlohmann::json meta;
  meta["config_hash"] = cfg.hash();
  const auto [covid_total, normal_total] = class_counts(manifest.records());
  meta["total"] = {{"covid", covid_total}, {"normal", normal_total},
                   {"patients", manifest.patient_count()}};
  for (const Partition part : {Partition::train, Partition::val, Partition::test}) {
    const auto records = slices_for(split, manifest, part);
    const PartitionCounts c = count_partition(records);
    meta["partitions"][to_string(part)] = {{"patients", c.patients},
                                           {"slices", c.slices},
                                           {"covid", c.covid},
                                           {"normal", c.normal}};
  }
  write_text(cfg.prepare_meta_path(), meta.dump(2) + "\n");

  std::cout << "prepared " << manifest.size() << " slices from "
            << manifest.patient_count() << " patients (covid " << covid_total
            << ", normal " << normal_total << "); " << written
            << " newly cached\n";
  for (const Partition part : {Partition::train, Partition::val, Partition::test}) {
    const auto& p = meta["partitions"][to_string(part)];
    std::cout << "  " << to_string(part) << ": " << p["patients"]
              << " patients, " << p["slices"] << " slices (covid " << p["covid"]
              << ", normal " << p["normal"] << ")\n";
  }
}

// ---------------------------------------------------------------------------

void cmd_train_cyclegan(const ExperimentConfig& cfg) {
  cfg.validate();
  require_prepare_meta(cfg);
  const DatasetManifest manifest = load_manifest(cfg.manifest_path);
  const SplitAssignment split = load_split(cfg);
  const auto train_records =
      original_only(slices_for(split, manifest, Partition::train));
  assert_train_only(train_records, split);

  std::vector<SliceRecord> domain_a, domain_b;  // a = normal, b = covid
  for (const auto& r : train_records)
    (r.label == Label::normal ? domain_a : domain_b).push_back(r);
  if (domain_a.empty() || domain_b.empty())
    throw TrainingError("cyclegan training needs both classes in the train split");

  const gan::GeneratorSpec gs = generator_spec_from(cfg);
  gan::DiscriminatorSpec ds;
  ds.input_dim = cfg.cyclegan.image_size;
  ds.channels = 1;
  ds.base_width = cfg.cyclegan.base_width;
  ds.n_layers = cfg.cyclegan.d_layers;
  const gan::CycleGanLossWeights weights{cfg.cyclegan.lambda_cycle,
                                         cfg.cyclegan.lambda_identity};
  const int64_t steps_per_epoch = static_cast<int64_t>(
      std::max(domain_a.size(), domain_b.size()));
  const gan::TrainPlan plan{cfg.cyclegan.learning_rate,
                            cfg.cyclegan.epochs * steps_per_epoch};
  gan::CycleGanModel<float> model(gs, ds, weights, plan, cfg.cyclegan.seed,
                                  static_cast<size_t>(cfg.cyclegan.buffer_capacity));

  const auto loss_csv = std::filesystem::path(cfg.cache_dir) / "cyclegan_losses.csv";
  std::ofstream losses(loss_csv, std::ios::binary);
  if (!losses) throw DataError("cannot write " + loss_csv.string());
  losses << "step,lr,g_total,g_adv_ab,g_adv_ba,cycle_a,cycle_b,identity_a,"
            "identity_b,d_a,d_b\n";

  Rng order_rng(cfg.cyclegan.seed ^ 0xabcd1234u);
  std::cout << "training cyclegan: " << domain_a.size() << " normal / "
            << domain_b.size() << " covid slices, " << cfg.cyclegan.epochs
            << " epoch(s) x " << steps_per_epoch << " steps\n";
  for (int64_t epoch = 0; epoch < cfg.cyclegan.epochs; ++epoch) {
    std::vector<size_t> order_a(domain_a.size()), order_b(domain_b.size());
    for (size_t i = 0; i < order_a.size(); ++i) order_a[i] = i;
    for (size_t i = 0; i < order_b.size(); ++i) order_b[i] = i;
    order_rng.shuffle(order_a);
    order_rng.shuffle(order_b);
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      const auto& rec_a = domain_a[order_a[static_cast<size_t>(s) % order_a.size()]];
      const auto& rec_b = domain_b[order_b[static_cast<size_t>(s) % order_b.size()]];
      const Tensor<float> a = gan::image_to_gan_tensor(
          load_processed_slice(rec_a, cfg), cfg.cyclegan.image_size);
      const Tensor<float> b = gan::image_to_gan_tensor(
          load_processed_slice(rec_b, cfg), cfg.cyclegan.image_size);
      const double lr = model.current_lr();
      const gan::StepLosses l = model.train_step(a, b);
      losses << model.step() - 1 << ',' << lr << ',' << l.g_total << ','
             << l.g_adv_ab << ',' << l.g_adv_ba << ',' << l.cycle_a << ','
             << l.cycle_b << ',' << l.identity_a << ',' << l.identity_b << ','
             << l.d_a << ',' << l.d_b << "\n";
    }
  }
  model.save_checkpoint(cfg.cyclegan_checkpoint_path(), cfg.hash());
  std::cout << "wrote " << cfg.cyclegan_checkpoint_path().string() << " after "
            << model.step() << " steps\n";
}

// ---------------------------------------------------------------------------

void cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  require_prepare_meta(cfg);
  const auto ckpt = cfg.cyclegan_checkpoint_path();
  if (!std::filesystem::exists(ckpt))
    throw DataError("no cyclegan checkpoint at " + ckpt.string() +
                    "; run `ctaug train-cyclegan` first");
  {
    const nn::ArchiveReader probe(ckpt, gan::kCheckpointMagic);
    const std::string have = probe.meta().at("config_hash").get<std::string>();
    if (have != cfg.hash())
      throw DataError("checkpoint " + ckpt.string() +
                      " was trained under a different config (hash " + have +
                      "); re-run `ctaug train-cyclegan`");
  }
  auto model = gan::CycleGanModel<float>::load_checkpoint(ckpt);

  const DatasetManifest manifest = load_manifest(cfg.manifest_path);
  const SplitAssignment split = load_split(cfg);
  const auto train_records =
      original_only(slices_for(split, manifest, Partition::train));
  assert_train_only(train_records, split);

  Rng rng(cfg.cyclegan.seed + 0x5eed);
  const auto loader = [&cfg](const SliceRecord& r) {
    return load_processed_slice(r, cfg);
  };
  const auto generated = gan::generate_augmented_set(
      *model, train_records, cfg.cyclegan.ratio, cfg.cache_dir, loader, rng);

  std::vector<SliceRecord> combined = train_records;
  combined.insert(combined.end(), generated.begin(), generated.end());
  save_manifest(cfg.augmented_manifest_path(), DatasetManifest(combined),
                /*with_source_column=*/true);
  nlohmann::json gen_meta;
  gen_meta["config_hash"] = cfg.hash();
  write_text(std::filesystem::path(cfg.cache_dir) / "generate_meta.json",
             gen_meta.dump(2) + "\n");

  const auto [gen_covid, gen_normal] = class_counts(generated);
  std::cout << "generated " << generated.size() << " slices (covid " << gen_covid
            << ", normal " << gen_normal << "); augmented manifest at "
            << cfg.augmented_manifest_path().string() << "\n";
}

// ---------------------------------------------------------------------------

namespace {

std::string condition_tag(bool with_cyclegan) {
  return with_cyclegan ? "with_cyclegan" : "without_cyclegan";
}

nlohmann::json metric_set_json(const evalkit::MetricSet& m) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"accuracy", opt(m.accuracy)},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"auc", opt(m.auc)}};
}

std::vector<double> defined_values(
    const std::vector<evalkit::MetricSet>& runs,
    std::optional<double> evalkit::MetricSet::* field) {
  std::vector<double> out;
  for (const auto& r : runs)
    if (r.*field) out.push_back(*(r.*field));
  return out;
}

struct RunArtifacts {
  evalkit::EvalOutcome outcome;
  std::vector<double> scores;
  std::vector<Label> truths;
};

RunArtifacts score_test_set(tune::Classifier& clf, SliceSource& test,
                            int64_t batch_size, Rng& rng) {
  RunArtifacts art;
  const size_t n = test.size();
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(n, start + static_cast<size_t>(batch_size));
    Tensor<float> batch;
    for (size_t i = start; i < stop; ++i) {
      const Tensor<float> one = test.fetch(i, false, rng);
      if (batch.empty())
        batch = Tensor<float>({static_cast<int64_t>(stop - start), one.dim(0),
                               one.dim(1), one.dim(2)});
      std::copy(one.data(), one.data() + one.numel(),
                batch.data() + static_cast<int64_t>(i - start) * one.numel());
    }
    const Tensor<float> probs = tune::predict_probs(clf, batch);
    for (size_t i = start; i < stop; ++i) {
      art.scores.push_back(static_cast<double>(
          probs.at(static_cast<int64_t>(i - start), tune::kCovidIndex)));
      art.truths.push_back(test.records()[i].label);
    }
  }
  art.outcome = evalkit::evaluate_scores(art.scores, art.truths, Label::covid);
  return art;
}

void write_preds_csv(const std::filesystem::path& path,
                     const RunArtifacts& art) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "score,truth\n";
  out.precision(17);
  for (size_t i = 0; i < art.scores.size(); ++i)
    out << art.scores[i] << ',' << to_string(art.truths[i]) << "\n";
}

void write_roc_csv(const std::filesystem::path& path,
                   const evalkit::RocCurve& roc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "fpr,tpr,threshold\n";
  out.precision(17);
  for (const auto& p : roc.points)
    out << p.fpr << ',' << p.tpr << ',' << p.threshold << "\n";
}

void plot_curve(const std::filesystem::path& path, const tune::LearningCurve& c,
                const std::string& title) {
  plot::Series train_loss{"train loss", {}, {}, plot::palette_color(0)};
  plot::Series val_loss{"val loss", {}, {}, plot::palette_color(1)};
  plot::Series val_acc{"val accuracy", {}, {}, plot::palette_color(2)};
  for (const auto& p : c) {
    const auto e = static_cast<double>(p.epoch);
    train_loss.x.push_back(e);
    train_loss.y.push_back(p.train_loss);
    val_loss.x.push_back(e);
    val_loss.y.push_back(p.val_loss);
    val_acc.x.push_back(e);
    val_acc.y.push_back(p.val_accuracy);
  }
  plot::render_line_plot(path, title, {train_loss, val_loss, val_acc});
}

void plot_roc(const std::filesystem::path& path, const evalkit::RocCurve& roc,
              const std::string& title) {
  plot::Series curve{"roc", {}, {}, plot::palette_color(0)};
  for (const auto& p : roc.points) {
    curve.x.push_back(p.fpr);
    curve.y.push_back(p.tpr);
  }
  plot::Series diag{"chance", {0.0, 1.0}, {0.0, 1.0}, {180, 180, 180}};
  plot::render_line_plot(path, title, {curve, diag});
}

}  // namespace

void cmd_train_eval(const ExperimentConfig& cfg) {
  cfg.validate();
  require_prepare_meta(cfg);
  const DatasetManifest manifest = load_manifest(cfg.manifest_path);
  const SplitAssignment split = load_split(cfg);

  const auto train_orig =
      original_only(slices_for(split, manifest, Partition::train));
  const auto val_records =
      original_only(slices_for(split, manifest, Partition::val));
  auto test_records = slices_for(split, manifest, Partition::test);
  for (const auto& r : test_records)
    if (r.source != Source::original)
      throw DataError("test set contains a generated record: " + r.slice_path);
  if (val_records.empty()) throw DataError("validation split is empty");
  if (test_records.empty()) throw DataError("test split is empty");

  std::vector<bool> conditions = {false};
  std::vector<SliceRecord> aug_train;
  if (cfg.cyclegan.enabled) {
    if (!std::filesystem::exists(cfg.augmented_manifest_path()))
      throw DataError("cyclegan is enabled but " +
                      cfg.augmented_manifest_path().string() +
                      " is missing; run `ctaug generate` first");
    const auto gen_meta_path =
        std::filesystem::path(cfg.cache_dir) / "generate_meta.json";
    if (!std::filesystem::exists(gen_meta_path))
      throw DataError("augmented manifest lacks provenance (" +
                      gen_meta_path.string() + "); re-run `ctaug generate`");
    const auto gen_meta = nlohmann::json::parse(read_text(gen_meta_path));
    if (gen_meta.at("config_hash").get<std::string>() != cfg.hash())
      throw DataError("augmented set was generated under a different config; "
                      "re-run `ctaug generate`");
    const DatasetManifest aug = load_manifest(cfg.augmented_manifest_path());
    aug_train = aug.records();
    assert_train_only(aug_train, split);  // generated slices stay in train
    conditions.push_back(true);
  }

  const tune::ModelProvider provider(cfg.models_path());
  if (cfg.model_profile == "micro")
    tune::ModelProvider::ensure_micro_archives(cfg.models_path());

  std::filesystem::create_directories(cfg.report_dir);
  const std::filesystem::path report_dir(cfg.report_dir);

  for (const auto& backbone : cfg.backbones) {
    const tune::BackboneArchive archive = provider.load(backbone.id);
    for (const bool with_cyclegan : conditions) {
      const std::string tag =
          std::string(tune::to_string(backbone.id)) + "_" +
          condition_tag(with_cyclegan);
      const auto& train_records = with_cyclegan ? aug_train : train_orig;

      std::vector<evalkit::MetricSet> run_metrics;
      evalkit::EvalOutcome last_outcome;
      tune::LearningCurve last_curve;
      for (int64_t run = 0; run < cfg.training.n_runs; ++run) {
        const uint64_t run_seed = cfg.training.seed + static_cast<uint64_t>(run);
        tune::BackboneSpec spec;
        spec.id = backbone.id;
        spec.pretrained = true;
        spec.input_dim = cfg.preprocess.augment.final_dim;
        tune::Classifier clf =
            tune::build_classifier(provider, spec, 2, run_seed);

        tune::TrainConfig tc;
        tc.batch_size = backbone.batch_size;
        tc.learning_rate = backbone.learning_rate;
        tc.stage1_epochs = cfg.training.stage1_epochs;
        tc.stage2_max_epochs = cfg.training.stage2_max_epochs;
        tc.early_stop_patience = cfg.training.patience;
        tc.early_stop_metric = cfg.training.early_stop_metric;
        tc.seed = run_seed;
        tc.use_cyclegan_aug = with_cyclegan;
        tc.aug_ratio = cfg.cyclegan.ratio;

        SliceSource train_src(train_records, cfg, archive.mean, archive.stddev);
        SliceSource val_src(val_records, cfg, archive.mean, archive.stddev);
        SliceSource test_src(test_records, cfg, archive.mean, archive.stddev);

        tune::TrainRun result;
        try {
          result = tune::two_stage_finetune(clf, train_src, val_src, tc);
        } catch (const TrainingError& e) {
          throw TrainingError(tag + " run " + std::to_string(run) + ": " +
                              e.what());
        }
        const std::string run_tag = tag + "_run" + std::to_string(run);
        tune::save_curve_csv(report_dir / ("curve_" + run_tag + ".csv"),
                             result.curve);
        plot_curve(report_dir / ("curve_" + run_tag + ".png"), result.curve,
                   run_tag);

        Rng eval_rng(run_seed ^ 0x7e57);
        RunArtifacts art =
            score_test_set(clf, test_src, backbone.batch_size, eval_rng);
        write_preds_csv(report_dir / ("preds_" + run_tag + ".csv"), art);
        run_metrics.push_back(art.outcome.metrics);
        if (run + 1 == cfg.training.n_runs) {
          last_outcome = std::move(art.outcome);
          last_curve = result.curve;
          tune::save_classifier(report_dir / (tag + ".ckpt"), clf, spec,
                                result.best_epoch, cfg.hash());
        }
        std::cout << tag << " run " << run << ": best epoch "
                  << result.best_epoch << ", accuracy "
                  << (run_metrics.back().accuracy ? *run_metrics.back().accuracy
                                                  : 0.0)
                  << "\n";
      }

      nlohmann::json report;
      report["backbone"] = tune::to_string(backbone.id);
      report["cyclegan"] = with_cyclegan;
      report["config_hash"] = cfg.hash();
      report["runs"] = nlohmann::json::array();
      for (const auto& m : run_metrics) report["runs"].push_back(metric_set_json(m));
      nlohmann::json aggregate;
      const std::pair<const char*, std::optional<double> evalkit::MetricSet::*>
          fields[] = {{"accuracy", &evalkit::MetricSet::accuracy},
                      {"precision", &evalkit::MetricSet::precision},
                      {"recall", &evalkit::MetricSet::recall},
                      {"f1", &evalkit::MetricSet::f1},
                      {"auc", &evalkit::MetricSet::auc}};
      for (const auto& [name, field] : fields) {
        const auto values = defined_values(run_metrics, field);
        if (values.empty()) {
          aggregate[name] = {{"mean", nullptr}, {"half_width", nullptr}};
        } else {
          const auto agg = evalkit::aggregate_runs(values, 0.95);
          aggregate[name] = {{"mean", agg.mean}, {"half_width", agg.half_width}};
        }
      }
      report["aggregate"] = aggregate;
      report["confusion"] = {{"tp", last_outcome.cm.tp},
                             {"tn", last_outcome.cm.tn},
                             {"fp", last_outcome.cm.fp},
                             {"fn", last_outcome.cm.fn}};
      nlohmann::json roc = nlohmann::json::array();
      for (const auto& p : last_outcome.roc.points)
        roc.push_back({p.fpr, p.tpr});
      report["roc"] = roc;
      write_text(report_dir / ("eval_" + tag + ".json"), report.dump(2) + "\n");
      write_roc_csv(report_dir / ("roc_" + tag + ".csv"), last_outcome.roc);
      plot_roc(report_dir / ("roc_" + tag + ".png"), last_outcome.roc, tag);
    }
  }
  render_comparison(report_dir);
  std::cout << "reports written to " << report_dir.string() << "\n";
}

// ---------------------------------------------------------------------------

void render_comparison(const std::filesystem::path& report_dir) {
  struct Row {
    std::string backbone;
    nlohmann::json aggregate;
  };
  std::map<bool, std::vector<Row>> tables;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(report_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("eval_", 0) == 0 && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const nlohmann::json j = nlohmann::json::parse(read_text(path));
    tables[j.at("cyclegan").get<bool>()].push_back(
        {j.at("backbone").get<std::string>(), j.at("aggregate")});
  }
  if (tables.empty())
    throw DataError("no eval_*.json reports in " + report_dir.string());

  std::string md;
  for (const bool with : {false, true}) {
    if (!tables.count(with)) continue;
    md += with ? "## Results with CycleGAN\n\n" : "## Results without CycleGAN\n\n";
    md += "| Network | Accuracy (%) | Precision (%) | Recall (%) | F1-score (%) "
          "| AUC (%) |\n";
    md += "|---|---|---|---|---|---|\n";
    for (const auto& row : tables[with]) {
      md += "| " + row.backbone + " |";
      for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
        const auto& cell = row.aggregate.at(key);
        std::optional<double> mean, hw;
        if (!cell.at("mean").is_null()) mean = cell.at("mean").get<double>();
        if (!cell.at("half_width").is_null())
          hw = cell.at("half_width").get<double>();
        md += " " + evalkit::format_metric(mean, hw) + " |";
      }
      md += "\n";
    }
    md += "\n";
  }
  write_text(report_dir / "comparison.md", md);
}

void cmd_report(const ExperimentConfig& cfg) {
  cfg.validate();
  render_comparison(cfg.report_dir);
  std::cout << "comparison table written to "
            << (std::filesystem::path(cfg.report_dir) / "comparison.md").string()
            << "\n";
}

}  // namespace ctaug::cli
