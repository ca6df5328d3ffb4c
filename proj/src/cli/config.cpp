#include "ctaug/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "ctaug/errors.hpp"
#include "ctaug/sha256.hpp"

namespace ctaug {

double default_learning_rate(tune::BackboneId id) {
  switch (id) {
    case tune::BackboneId::resnest50: return 1e-4;
    case tune::BackboneId::vit: return 1e-5;
    default: return 1e-3;
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got \"" + assignment + "\"");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;  // plain string
  }

  nlohmann::json* node = &doc;
  size_t start = 0;
  while (true) {
    const size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad --set key \"" + key + "\"");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

tune::TrainConfig::Metric metric_from_string(const std::string& s) {
  if (s == "val_loss") return tune::TrainConfig::Metric::val_loss;
  if (s == "val_accuracy") return tune::TrainConfig::Metric::val_accuracy;
  throw ConfigError("early_stop_metric must be val_loss or val_accuracy");
}

const char* metric_to_string(tune::TrainConfig::Metric m) {
  return m == tune::TrainConfig::Metric::val_loss ? "val_loss" : "val_accuracy";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    read_into(j, "manifest_path", c.manifest_path);
    read_into(j, "cache_dir", c.cache_dir);
    read_into(j, "report_dir", c.report_dir);
    read_into(j, "model_dir", c.model_dir);
    read_into(j, "model_profile", c.model_profile);

    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (s.contains("ratios")) {
        const auto& r = s.at("ratios");
        if (!r.is_array() || r.size() != 3)
          throw ConfigError("split.ratios must be [train, val, test]");
        c.split.ratios = {r.at(0).get<double>(), r.at(1).get<double>(),
                          r.at(2).get<double>()};
      }
      read_into(s, "seed", c.split.seed);
    }

    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      read_into(p, "gaussian_sigma", c.preprocess.gaussian.sigma);
      read_into(p, "gaussian_radius", c.preprocess.gaussian.radius);
      read_into(p, "presize_dim", c.preprocess.augment.presize_dim);
      read_into(p, "final_dim", c.preprocess.augment.final_dim);
      if (p.contains("augment")) {
        const auto& a = p.at("augment");
        read_into(a, "flip_prob", c.preprocess.augment.flip_prob);
        read_into(a, "max_rotate_deg", c.preprocess.augment.max_rotate_deg);
        if (a.contains("zoom")) {
          c.preprocess.augment.zoom_lo = a.at("zoom").at(0).get<double>();
          c.preprocess.augment.zoom_hi = a.at("zoom").at(1).get<double>();
        }
        read_into(a, "warp_magnitude", c.preprocess.augment.warp_magnitude);
        if (a.contains("lighting")) {
          c.preprocess.augment.lighting_lo = a.at("lighting").at(0).get<double>();
          c.preprocess.augment.lighting_hi = a.at("lighting").at(1).get<double>();
        }
      }
    }

    if (j.contains("cyclegan")) {
      const auto& g = j.at("cyclegan");
      read_into(g, "enabled", c.cyclegan.enabled);
      if (g.contains("weights")) {
        read_into(g.at("weights"), "lambda_cycle", c.cyclegan.lambda_cycle);
        read_into(g.at("weights"), "lambda_identity", c.cyclegan.lambda_identity);
      }
      read_into(g, "epochs", c.cyclegan.epochs);
      read_into(g, "ratio", c.cyclegan.ratio);
      read_into(g, "checkpoint", c.cyclegan.checkpoint);
      read_into(g, "image_size", c.cyclegan.image_size);
      read_into(g, "base_width", c.cyclegan.base_width);
      read_into(g, "n_res_blocks", c.cyclegan.n_res_blocks);
      read_into(g, "d_layers", c.cyclegan.d_layers);
      read_into(g, "learning_rate", c.cyclegan.learning_rate);
      read_into(g, "buffer_capacity", c.cyclegan.buffer_capacity);
      read_into(g, "seed", c.cyclegan.seed);
    }

    if (j.contains("backbones")) {
      for (const auto& b : j.at("backbones")) {
        Backbone bb;
        bb.id = tune::backbone_id_from_string(b.at("id").get<std::string>());
        bb.learning_rate = default_learning_rate(bb.id);
        read_into(b, "batch_size", bb.batch_size);
        read_into(b, "learning_rate", bb.learning_rate);
        c.backbones.push_back(bb);
      }
    }

    if (j.contains("training")) {
      const auto& t = j.at("training");
      read_into(t, "stage1_epochs", c.training.stage1_epochs);
      read_into(t, "stage2_max_epochs", c.training.stage2_max_epochs);
      read_into(t, "patience", c.training.patience);
      if (t.contains("early_stop_metric"))
        c.training.early_stop_metric =
            metric_from_string(t.at("early_stop_metric").get<std::string>());
      read_into(t, "n_runs", c.training.n_runs);
      read_into(t, "seed", c.training.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (const char* cache = std::getenv("CTAUG_CACHE"))
    if (*cache) c.cache_dir = cache;
  return c;
}

ExperimentConfig ExperimentConfig::from_file(
    const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["manifest_path"] = manifest_path;
  j["cache_dir"] = cache_dir;
  j["report_dir"] = report_dir;
  j["model_dir"] = model_dir;
  j["model_profile"] = model_profile;
  j["split"] = {{"ratios", {split.ratios.train, split.ratios.val, split.ratios.test}},
                {"seed", split.seed}};
  j["preprocess"] = {
      {"gaussian_sigma", preprocess.gaussian.sigma},
      {"gaussian_radius", preprocess.gaussian.radius},
      {"presize_dim", preprocess.augment.presize_dim},
      {"final_dim", preprocess.augment.final_dim},
      {"augment",
       {{"flip_prob", preprocess.augment.flip_prob},
        {"max_rotate_deg", preprocess.augment.max_rotate_deg},
        {"zoom", {preprocess.augment.zoom_lo, preprocess.augment.zoom_hi}},
        {"warp_magnitude", preprocess.augment.warp_magnitude},
        {"lighting",
         {preprocess.augment.lighting_lo, preprocess.augment.lighting_hi}}}}};
  j["cyclegan"] = {{"enabled", cyclegan.enabled},
                   {"weights",
                    {{"lambda_cycle", cyclegan.lambda_cycle},
                     {"lambda_identity", cyclegan.lambda_identity}}},
                   {"epochs", cyclegan.epochs},
                   {"ratio", cyclegan.ratio},
                   {"checkpoint", cyclegan.checkpoint},
                   {"image_size", cyclegan.image_size},
                   {"base_width", cyclegan.base_width},
                   {"n_res_blocks", cyclegan.n_res_blocks},
                   {"d_layers", cyclegan.d_layers},
                   {"learning_rate", cyclegan.learning_rate},
                   {"buffer_capacity", cyclegan.buffer_capacity},
                   {"seed", cyclegan.seed}};
  j["backbones"] = nlohmann::json::array();
  for (const auto& b : backbones)
    j["backbones"].push_back({{"id", tune::to_string(b.id)},
                              {"batch_size", b.batch_size},
                              {"learning_rate", b.learning_rate}});
  j["training"] = {{"stage1_epochs", training.stage1_epochs},
                   {"stage2_max_epochs", training.stage2_max_epochs},
                   {"patience", training.patience},
                   {"early_stop_metric", metric_to_string(training.early_stop_metric)},
                   {"n_runs", training.n_runs},
                   {"seed", training.seed}};
  return j;
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_json().dump()); }

void ExperimentConfig::validate() const {
  if (manifest_path.empty()) throw ConfigError("manifest_path is required");
  if (cache_dir.empty()) throw ConfigError("cache_dir is required");
  if (report_dir.empty()) throw ConfigError("report_dir is required");
  const double sum = split.ratios.train + split.ratios.val + split.ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split.ratios must sum to 1");
  if (preprocess.gaussian.sigma <= 0 || preprocess.gaussian.radius < 1)
    throw ConfigError("gaussian filter parameters out of range");
  try {
    preprocess.augment.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (backbones.empty()) throw ConfigError("at least one backbone is required");
  for (const auto& b : backbones) {
    if (b.batch_size < 1) throw ConfigError("backbone batch_size must be >= 1");
    if (b.learning_rate <= 0) throw ConfigError("backbone learning_rate must be > 0");
  }
  if (training.n_runs < 1) throw ConfigError("training.n_runs must be >= 1");
  if (training.patience < 1) throw ConfigError("training.patience must be >= 1");
  if (cyclegan.ratio < 0 || cyclegan.ratio > 1)
    throw ConfigError("cyclegan.ratio must be in [0,1]");
  if (cyclegan.enabled && cyclegan.epochs < 1)
    throw ConfigError("cyclegan.epochs must be >= 1 when enabled");
  if (model_profile != "micro" && model_profile != "archive")
    throw ConfigError("model_profile must be \"micro\" or \"archive\"");
}

std::filesystem::path ExperimentConfig::cyclegan_checkpoint_path() const {
  if (!cyclegan.checkpoint.empty()) return cyclegan.checkpoint;
  return std::filesystem::path(cache_dir) / "cyclegan.ckpt";
}

std::filesystem::path ExperimentConfig::split_path() const {
  return std::filesystem::path(cache_dir) / "split.json";
}

std::filesystem::path ExperimentConfig::prepare_meta_path() const {
  return std::filesystem::path(cache_dir) / "prepare_meta.json";
}

std::filesystem::path ExperimentConfig::augmented_manifest_path() const {
  return std::filesystem::path(cache_dir) / "augmented_manifest.csv";
}

std::filesystem::path ExperimentConfig::models_path() const {
  if (!model_dir.empty()) return model_dir;
  return std::filesystem::path(cache_dir) / "models";
}

}  // namespace ctaug
