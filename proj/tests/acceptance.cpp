// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Each check pins its tolerance and runtime budget in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <vector>

#include "ctaug/commands.hpp"
#include "ctaug/config.hpp"
#include "ctaug/cyclegan.hpp"
#include "ctaug/data_catalog.hpp"
#include "ctaug/evalkit.hpp"
#include "ctaug/finetune.hpp"
#include "ctaug/preprocess.hpp"
#include "testutil.hpp"

using namespace ctaug;

namespace {

int g_failures = 0;

void run_criterion(int number, const std::string& name, double budget_seconds,
                   const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (budget_seconds > 0 && elapsed > budget_seconds) {
    ok = false;
    detail += (detail.empty() ? "" : "; ") + std::string("over runtime budget");
  }
  if (!ok) ++g_failures;
  std::printf("[%s] criterion %2d: %s (%.1fs%s)%s%s\n", ok ? "PASS" : "FAIL",
              number, name.c_str(), elapsed,
              budget_seconds > 0
                  ? (" / " + std::to_string(int(budget_seconds)) + "s budget").c_str()
                  : "",
              detail.empty() ? "" : " - ", detail.c_str());
  std::fflush(stdout);
}

// --- shared oracles (independent reimplementations, test-side only) --------

struct OracleMetrics {
  double accuracy = 0;
  bool has_precision = false, has_recall = false, has_f1 = false;
  double precision = 0, recall = 0, f1 = 0;
};

OracleMetrics metrics_oracle(int64_t tp, int64_t tn, int64_t fp, int64_t fn) {
  OracleMetrics m;
  m.accuracy = double(tp + tn) / double(fp + fn + tp + tn);
  if (fp + tp > 0) {
    m.has_precision = true;
    m.precision = double(tp) / double(fp + tp);
  }
  if (fn + tp > 0) {
    m.has_recall = true;
    m.recall = double(tp) / double(fn + tp);
  }
  if (m.has_precision && m.has_recall && m.precision + m.recall > 0) {
    m.has_f1 = true;
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

double pairwise_auc_oracle(const std::vector<double>& scores,
                           const std::vector<Label>& truths) {
  double wins = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (truths[i] != Label::covid) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (truths[j] != Label::normal) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

std::string ctaug_bin() {
  const char* bin = std::getenv("CTAUG_BIN");
  if (!bin) throw std::runtime_error("CTAUG_BIN not set");
  return bin;
}

int run_ctaug(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd =
      ctaug_bin() + " " + args + " >" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- criteria ---------------------------------------------------------------

bool criterion1_metric_oracle(std::string& detail) {
  Rng rng(0xC1);
  for (int trial = 0; trial < 10000; ++trial) {
    const int64_t tp = rng.uniform_int(500), tn = rng.uniform_int(500);
    const int64_t fp = rng.uniform_int(500), fn = rng.uniform_int(500);
    if (tp + tn + fp + fn == 0) continue;
    const auto m = evalkit::metrics_from_confusion({tp, tn, fp, fn});
    const auto o = metrics_oracle(tp, tn, fp, fn);
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    if (!close(*m.accuracy, o.accuracy) ||
        m.precision.has_value() != o.has_precision ||
        (o.has_precision && !close(*m.precision, o.precision)) ||
        m.recall.has_value() != o.has_recall ||
        (o.has_recall && !close(*m.recall, o.recall)) ||
        m.f1.has_value() != o.has_f1 || (o.has_f1 && !close(*m.f1, o.f1))) {
      detail = "mismatch at trial " + std::to_string(trial);
      return false;
    }
  }
  detail = "10000 matrices exact to 1e-12";
  return true;
}

bool criterion2_auc_identity(std::string& detail) {
  Rng rng(0xC2);
  int sets = 0;
  while (sets < 500) {
    const int64_t n = 2 + rng.uniform_int(199);
    std::vector<double> scores;
    std::vector<Label> truths;
    int64_t n_pos = 0;
    for (int64_t i = 0; i < n; ++i) {
      const int quant = 1 + int(rng.uniform_int(32));
      scores.push_back(std::round(rng.uniform() * quant) / quant);
      const bool pos = rng.bernoulli(0.5);
      n_pos += pos;
      truths.push_back(pos ? Label::covid : Label::normal);
    }
    if (n_pos == 0 || n_pos == n) continue;
    ++sets;
    const double trap = evalkit::auc(evalkit::roc_curve(scores, truths, Label::covid));
    const double pw = pairwise_auc_oracle(scores, truths);
    if (std::abs(trap - pw) > 1e-9) {
      detail = "set " + std::to_string(sets) + ": |trapezoid - pairwise| = " +
               std::to_string(std::abs(trap - pw));
      return false;
    }
  }
  detail = "500 score sets within 1e-9";
  return true;
}

bool criterion3_patient_split(std::string& detail) {
  Rng rng(0xC3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n_patients = 1 + rng.uniform_int(500);
    std::vector<SliceRecord> records;
    int64_t path = 0;
    for (int64_t p = 0; p < n_patients; ++p) {
      const int64_t n_slices = 1 + rng.uniform_int(40);
      for (int64_t s = 0; s < n_slices; ++s)
        records.push_back({"p" + std::to_string(p),
                           "/s" + std::to_string(path++) + ".png",
                           rng.bernoulli(0.5) ? Label::covid : Label::normal,
                           Source::original});
    }
    const DatasetManifest manifest(std::move(records));
    const auto split = split_by_patient(manifest, {0.7, 0.15, 0.15}, rng.next_u64());

    if (split.partition_of.size() != manifest.patient_count()) {
      detail = "trial " + std::to_string(trial) + ": uncovered patients";
      return false;
    }
    std::map<std::string, Partition> seen_patient_partition;
    size_t total = 0;
    int64_t val_patients = 0, test_patients = 0;
    for (const auto& [pid, part] : split.partition_of) {
      if (part == Partition::val) ++val_patients;
      if (part == Partition::test) ++test_patients;
    }
    for (const auto part : {Partition::train, Partition::val, Partition::test}) {
      for (const auto& r : slices_for(split, manifest, part)) {
        ++total;
        const auto it = seen_patient_partition.find(r.patient_id);
        if (it == seen_patient_partition.end())
          seen_patient_partition[r.patient_id] = part;
        else if (it->second != part) {
          detail = "trial " + std::to_string(trial) + ": patient " +
                   r.patient_id + " in two partitions";
          return false;
        }
      }
    }
    if (total != manifest.size()) {
      detail = "trial " + std::to_string(trial) + ": coverage broken";
      return false;
    }
    const double p = double(n_patients);
    if (std::abs(val_patients - 0.15 * p) > 1.0 ||
        std::abs(test_patients - 0.15 * p) > 1.0) {
      detail = "trial " + std::to_string(trial) + ": ratio deviation > 1";
      return false;
    }
  }
  detail = "1000 manifests, zero violations";
  return true;
}

bool criterion4_gaussian(std::string& detail) {
  Rng rng(0xC4);
  // dense 2-D oracle (reflect-101, double)
  const auto mirror = [](int64_t i, int64_t n) {
    if (n == 1) return int64_t{0};
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
  };
  for (int trial = 0; trial < 100; ++trial) {
    Image img(1, 32, 32);
    for (auto& v : img.pixels) v = float(rng.uniform());
    const GaussianSpec spec{0.3 + rng.uniform() * 3.0, 1 + int(rng.uniform_int(3))};
    const Image fast = gaussian_filter(img, spec);

    const int r = spec.radius;
    std::vector<double> k(size_t(2 * r + 1));
    double sum = 0;
    for (int i = -r; i <= r; ++i) {
      k[size_t(i + r)] = std::exp(-(double(i) * i) / (2 * spec.sigma * spec.sigma));
      sum += k[size_t(i + r)];
    }
    for (auto& v : k) v /= sum;
    for (int64_t y = 0; y < 32; ++y)
      for (int64_t x = 0; x < 32; ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += k[size_t(dy + r)] * k[size_t(dx + r)] *
                   double(img.at(0, mirror(y + dy, 32), mirror(x + dx, 32)));
        if (std::abs(double(fast.at(0, y, x)) - acc) > 1e-6) {
          detail = "separable vs dense diff > 1e-6";
          return false;
        }
      }
  }
  // constant-image identity, exact
  for (float c : {0.0f, 0.3f, 1.0f}) {
    Image img(1, 17, 23);
    for (auto& v : img.pixels) v = c;
    const Image out = gaussian_filter(img, {1.0, 2});
    for (const float v : out.pixels)
      if (v != c) {
        detail = "constant image not reproduced exactly";
        return false;
      }
  }
  detail = "100 images within 1e-6; constant identity exact";
  return true;
}

bool criterion5_cyclegan_smoke(std::string& detail) {
  Rng data_rng(0xC5);
  const int64_t dim = 64;
  std::vector<Tensor<float>> domain_a, domain_b;  // squares vs circles
  for (int i = 0; i < 200; ++i) {
    domain_a.push_back(
        gan::image_to_gan_tensor(testutil::square_image(dim, data_rng), dim));
    domain_b.push_back(
        gan::image_to_gan_tensor(testutil::circle_image(dim, data_rng), dim));
  }

  gan::GeneratorSpec gs{dim, 1, 16, 3};
  gan::DiscriminatorSpec ds{dim, 1, 16, 3};
  gan::CycleGanModel<float> model(gs, ds, {10.0, 5.0}, {2e-4, 200}, 0xC5C5, 50);

  Rng order(0x5C);
  double step1_cycle = 0;
  std::vector<double> last_cycles;
  for (int step = 0; step < 200; ++step) {
    const auto& a = domain_a[size_t(order.uniform_int(200))];
    const auto& b = domain_b[size_t(order.uniform_int(200))];
    const gan::StepLosses l = model.train_step(a, b);
    if (!std::isfinite(l.g_total)) {
      detail = "non-finite generator loss at step " + std::to_string(step);
      return false;
    }
    if (model.buffer_a().size() > 50 || model.buffer_b().size() > 50) {
      detail = "replay buffer exceeded capacity";
      return false;
    }
    const double cycle = l.cycle_a + l.cycle_b;
    if (step == 0) step1_cycle = cycle;
    if (step >= 190) last_cycles.push_back(cycle);
  }
  double final_cycle = 0;
  for (const double c : last_cycles) final_cycle += c;
  final_cycle /= double(last_cycles.size());

  // outputs stay in [-1, 1]
  const Tensor<float> out = model.translate(domain_a[0], gan::Direction::a_to_b);
  for (int64_t i = 0; i < out.numel(); ++i)
    if (out[i] < -1.0f || out[i] > 1.0f) {
      detail = "translated output left [-1,1]";
      return false;
    }

  std::ostringstream msg;
  msg << "cycle loss step1 " << step1_cycle << " -> last-10 avg " << final_cycle;
  detail = msg.str();
  return final_cycle <= 0.5 * step1_cycle;
}

bool criterion6_gradient_check(std::string& detail) {
  gan::GeneratorSpec gs{8, 1, 4, 1};
  gan::DiscriminatorSpec ds{8, 1, 4, 2};
  gan::CycleGanModel<double> model(gs, ds, {10.0, 5.0}, {2e-4, 0}, 0xC6);
  Rng rng(0x6C);
  Tensor<double> a({1, 1, 8, 8}), b({1, 1, 8, 8});
  for (int64_t i = 0; i < a.numel(); ++i) {
    a[i] = 2.0 * rng.uniform() - 1.0;
    b[i] = 2.0 * rng.uniform() - 1.0;
  }
  model.generator_backward(a, b);
  auto params = model.generator_params();
  double worst = 0;
  const double h = 1e-6;
  for (int s = 0; s < 20; ++s) {
    const size_t pi = size_t(rng.uniform_int(int64_t(params.size())));
    const int64_t wi = rng.uniform_int(params[pi]->value.numel());
    const double analytic = params[pi]->grad[wi];
    const double saved = params[pi]->value[wi];
    params[pi]->value[wi] = saved + h;
    const double fp = model.generator_total_loss(a, b);
    params[pi]->value[wi] = saved - h;
    const double fm = model.generator_total_loss(a, b);
    params[pi]->value[wi] = saved;
    const double fd = (fp - fm) / (2 * h);
    if (std::abs(fd - analytic) < 1e-7) continue;  // true-zero gradients
    worst = std::max(worst,
                     std::abs(fd - analytic) /
                         std::max({std::abs(fd), std::abs(analytic), 1e-8}));
  }
  detail = "worst relative error " + std::to_string(worst);
  return worst <= 1e-3;
}

bool criterion7_finetune_smoke(std::string& detail) {
  testutil::TempDir tmp("acc7");
  tune::ModelProvider::ensure_micro_archives(tmp.path());
  const tune::ModelProvider provider(tmp.path());

  // smallest backbone by parameter count
  tune::BackboneId smallest = tune::BackboneId::resnet50;
  int64_t smallest_count = INT64_MAX;
  for (const auto id : tune::all_backbone_ids()) {
    const auto archive = provider.load(id);
    int64_t count = 0;
    for (const auto& [name, t] : archive.weights) count += t.numel();
    if (count < smallest_count) {
      smallest_count = count;
      smallest = id;
    }
  }

  class MemSource final : public tune::ExampleSource {
   public:
    MemSource(size_t n, int64_t dim, uint64_t seed) {
      Rng rng(seed);
      for (size_t i = 0; i < n; ++i) {
        const int lab = i % 2 == 0 ? 0 : 1;
        labels_.push_back(lab);
        const Image img = testutil::intensity_image(dim, lab, rng);
        const Image std3 =
            to_model_tensor(img, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
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

  const int64_t dim = 32;
  MemSource train(100, dim, 0x71), val(40, dim, 0x72);

  // stage-1 freeze: body params bitwise equal to the provider values
  {
    tune::BackboneSpec spec;
    spec.id = smallest;
    spec.input_dim = dim;
    tune::Classifier clf = tune::build_classifier(provider, spec, 2, 0x73);
    const auto archive = provider.load(smallest);
    tune::TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.stage1_epochs = 1;
    cfg.stage2_max_epochs = 0;
    cfg.seed = 0x74;
    tune::two_stage_finetune(clf, train, val, cfg);
    for (auto* p : clf.body_params()) {
      const auto& orig = archive.weights.at(p->name);
      for (int64_t i = 0; i < p->value.numel(); ++i)
        if (p->value[i] != orig[i]) {
          detail = "stage-1 modified body parameter " + p->name;
          return false;
        }
    }
  }

  // full two-stage run: >= 95% validation accuracy within 5 total epochs
  tune::BackboneSpec spec;
  spec.id = smallest;
  spec.input_dim = dim;
  tune::Classifier clf = tune::build_classifier(provider, spec, 2, 0x75);
  tune::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.stage1_epochs = 1;
  cfg.stage2_max_epochs = 4;
  cfg.early_stop_patience = 4;
  cfg.seed = 0x76;
  const tune::TrainRun run = tune::two_stage_finetune(clf, train, val, cfg);
  double best_acc = 0;
  for (const auto& pt : run.curve) best_acc = std::max(best_acc, pt.val_accuracy);
  std::ostringstream msg;
  msg << tune::to_string(smallest) << ": best val accuracy " << best_acc
      << " within " << run.curve.size() << " epochs";
  detail = msg.str();
  return best_acc >= 0.95 && run.curve.size() <= 5;
}

bool criterion8_aggregation(std::string& detail) {
  const auto a = evalkit::aggregate_runs({0.9, 1.0}, 0.95);
  if (std::abs(a.mean - 0.95) > 1e-12) {
    detail = "mean off";
    return false;
  }
  if (std::abs(a.half_width - 0.6353) > 1e-4) {
    detail = "half-width " + std::to_string(a.half_width);
    return false;
  }
  const auto b = evalkit::aggregate_runs(std::vector<double>(10, 0.7), 0.95);
  if (b.half_width != 0.0) {
    detail = "equal values should give exactly zero half-width";
    return false;
  }
  detail = "t-interval 0.6353 within 1e-4; equal values exact zero";
  return true;
}

struct PipelineRun {
  testutil::TempDir tmp{"acc_pipeline"};
  std::filesystem::path cfg_path;
  std::filesystem::path report_dir;
  std::filesystem::path cache_dir;
  nlohmann::json cfg_json;

  explicit PipelineRun(bool cyclegan_enabled, int64_t n_runs, int64_t stage2) {
    testutil::SynthDatasetSpec spec;
    spec.patients_per_class = 25;
    spec.slices_per_patient = 4;  // 200 slices total
    spec.dim = 32;
    const auto manifest = testutil::write_synth_dataset(tmp.path(), spec);
    cache_dir = tmp.path() / "cache";
    report_dir = tmp.path() / "report";
    nlohmann::json j;
    j["manifest_path"] = manifest.string();
    j["cache_dir"] = cache_dir.string();
    j["report_dir"] = report_dir.string();
    j["split"] = {{"ratios", {0.6, 0.2, 0.2}}, {"seed", 13}};
    j["preprocess"] = {{"gaussian_sigma", 1.0},
                       {"gaussian_radius", 1},
                       {"presize_dim", 24},
                       {"final_dim", 16}};
    j["cyclegan"] = {{"enabled", cyclegan_enabled}, {"image_size", 32},
                     {"base_width", 8}, {"n_res_blocks", 1}, {"d_layers", 2},
                     {"epochs", 2}, {"ratio", 1.0}, {"seed", 21}};
    j["backbones"] = {{{"id", "efficientnet_b3"}, {"batch_size", 8}}};
    j["training"] = {{"stage1_epochs", 1}, {"stage2_max_epochs", stage2},
                     {"patience", 2}, {"n_runs", n_runs}, {"seed", 31}};
    cfg_json = j;
    cfg_path = tmp.path() / "config.json";
    testutil::write_file(cfg_path, j.dump(2));
  }

  int run(const std::string& subcommand) {
    return run_ctaug(subcommand + " --config " + cfg_path.string(),
                     tmp.path() / (subcommand + ".log"));
  }
  std::string log(const std::string& subcommand) {
    return read_all(tmp.path() / (subcommand + ".log"));
  }
};

bool criterion9_end_to_end(std::string& detail) {
  PipelineRun pipe(/*cyclegan=*/true, /*n_runs=*/3, /*stage2=*/2);
  for (const char* sub :
       {"prepare", "train-cyclegan", "generate", "train-eval", "report"}) {
    if (pipe.run(sub) != 0) {
      detail = std::string(sub) + " failed: " + pipe.log(sub).substr(0, 200);
      return false;
    }
  }

  // comparison table covers both conditions and all five metrics
  const std::string table = read_all(pipe.report_dir / "comparison.md");
  for (const char* needle :
       {"Results without CycleGAN", "Results with CycleGAN", "Accuracy",
        "Precision", "Recall", "F1-score", "AUC", "efficientnet_b3"})
    if (table.find(needle) == std::string::npos) {
      detail = std::string("comparison table is missing \"") + needle + "\"";
      return false;
    }

  // recompute every emitted metric from the saved raw predictions
  for (const std::string cond : {"without_cyclegan", "with_cyclegan"}) {
    const auto report = nlohmann::json::parse(read_all(
        pipe.report_dir / ("eval_efficientnet_b3_" + cond + ".json")));
    if (report.at("runs").size() != 3) {
      detail = cond + ": expected 3 runs";
      return false;
    }
    // aggregate cells must match the t-aggregation of the per-run values
    for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
      std::vector<double> values;
      for (const auto& r : report.at("runs"))
        if (!r.at(key).is_null()) values.push_back(r.at(key).get<double>());
      const auto& cell = report.at("aggregate").at(key);
      if (values.empty()) {
        if (!cell.at("mean").is_null()) {
          detail = cond + ": aggregate " + key + " should be null";
          return false;
        }
        continue;
      }
      const auto agg = evalkit::aggregate_runs(values, 0.95);
      if (std::abs(cell.at("mean").get<double>() - agg.mean) > 1e-12 ||
          std::abs(cell.at("half_width").get<double>() - agg.half_width) > 1e-12) {
        detail = cond + ": aggregate " + key + " disagrees with aggregate_runs";
        return false;
      }
    }
    for (int run = 0; run < 3; ++run) {
      const auto preds_path =
          pipe.report_dir /
          ("preds_efficientnet_b3_" + cond + "_run" + std::to_string(run) + ".csv");
      std::ifstream in(preds_path);
      if (!in) {
        detail = "missing " + preds_path.string();
        return false;
      }
      std::string line;
      std::getline(in, line);  // header
      std::vector<double> scores;
      std::vector<Label> truths;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        scores.push_back(std::stod(line.substr(0, comma)));
        truths.push_back(label_from_string(line.substr(comma + 1)));
      }
      // oracle recomputation at threshold 0.5
      int64_t tp = 0, tn = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        const bool truth = truths[i] == Label::covid;
        tp += pred && truth;
        tn += !pred && !truth;
        fp += pred && !truth;
        fn += !pred && truth;
      }
      const auto oracle = metrics_oracle(tp, tn, fp, fn);
      const auto& emitted = report.at("runs").at(run);
      const auto check_field = [&](const char* key, bool has, double want) {
        if (!has) return emitted.at(key).is_null();
        return !emitted.at(key).is_null() &&
               std::abs(emitted.at(key).get<double>() - want) <= 1e-12;
      };
      if (!check_field("accuracy", true, oracle.accuracy) ||
          !check_field("precision", oracle.has_precision, oracle.precision) ||
          !check_field("recall", oracle.has_recall, oracle.recall) ||
          !check_field("f1", oracle.has_f1, oracle.f1)) {
        detail = cond + " run " + std::to_string(run) +
                 ": label metrics disagree with the counting oracle";
        return false;
      }
      const double pw = pairwise_auc_oracle(scores, truths);
      if (std::abs(emitted.at("auc").get<double>() - pw) > 1e-9) {
        detail = cond + " run " + std::to_string(run) + ": AUC off pairwise oracle";
        return false;
      }
    }
  }
  detail = "five subcommands, 2 conditions x 3 runs, metrics re-derived from raw predictions";
  return true;
}

bool criterion10_determinism(std::string& detail) {
  // identical config and seeds; cache and reports wiped between runs
  PipelineRun pipe(/*cyclegan=*/false, /*n_runs=*/1, /*stage2=*/0);
  const auto eval_json =
      pipe.report_dir / "eval_efficientnet_b3_without_cyclegan.json";

  const auto run_all = [&]() -> bool {
    return pipe.run("prepare") == 0 && pipe.run("train-eval") == 0;
  };
  if (!run_all()) {
    detail = "first pipeline run failed";
    return false;
  }
  const std::string split1 = read_all(pipe.cache_dir / "split.json");
  const auto metrics1 = nlohmann::json::parse(read_all(eval_json)).at("runs").at(0);

  std::filesystem::remove_all(pipe.cache_dir);
  std::filesystem::remove_all(pipe.report_dir);
  if (!run_all()) {
    detail = "second pipeline run failed";
    return false;
  }
  const std::string split2 = read_all(pipe.cache_dir / "split.json");
  if (split1 != split2) {
    detail = "split JSON differs between reruns";
    return false;
  }
  const auto metrics2 = nlohmann::json::parse(read_all(eval_json)).at("runs").at(0);
  for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
    const auto &a = metrics1.at(key), &b = metrics2.at(key);
    if (a.is_null() != b.is_null()) {
      detail = std::string(key) + " defined-ness differs";
      return false;
    }
    if (!a.is_null() &&
        std::abs(a.get<double>() - b.get<double>()) > 1e-6) {
      detail = std::string(key) + " differs beyond 1e-6";
      return false;
    }
  }
  detail = "split bytes identical; metrics within 1e-6";
  return true;
}

}  // namespace

int main() {
  std::printf("ctaug acceptance suite\n");
  run_criterion(1, "metric oracle equivalence (10k confusion matrices)", 10,
                criterion1_metric_oracle);
  run_criterion(2, "AUC trapezoid = pairwise statistic (500 sets)", 30,
                criterion2_auc_identity);
  run_criterion(3, "patient-split property suite (1000 manifests)", 30,
                criterion3_patient_split);
  run_criterion(4, "gaussian separable vs dense oracle", 0, criterion4_gaussian);
  run_criterion(5, "cyclegan desk-scale smoke (200 steps, 64x64)", 900,
                criterion5_cyclegan_smoke);
  run_criterion(6, "miniature generator gradient check", 120,
                criterion6_gradient_check);
  run_criterion(7, "two-stage fine-tune smoke (100 images, <=5 epochs)", 600,
                criterion7_finetune_smoke);
  run_criterion(8, "t-interval aggregation hand values", 0, criterion8_aggregation);
  run_criterion(9, "end-to-end pipeline on a 200-slice synthetic set", 0,
                criterion9_end_to_end);
  run_criterion(10, "determinism of prepare + 1-epoch train-eval", 0,
                criterion10_determinism);

  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
