#include <utility>

#include "ctaug/errors.hpp"
#include "ctaug/finetune.hpp"
#include "ctaug/serialize.hpp"

namespace ctaug::tune {

const char* to_string(BackboneId id) {
  switch (id) {
    case BackboneId::densenet121: return "densenet121";
    case BackboneId::efficientnet_b3: return "efficientnet_b3";
    case BackboneId::resnet50: return "resnet50";
    case BackboneId::resnest50: return "resnest50";
    default: return "vit";
  }
}

BackboneId backbone_id_from_string(const std::string& s) {
  for (BackboneId id : all_backbone_ids())
    if (s == to_string(id)) return id;
  throw ConfigError("unknown backbone id \"" + s + "\"");
}

std::vector<BackboneId> all_backbone_ids() {
  return {BackboneId::densenet121, BackboneId::efficientnet_b3,
          BackboneId::resnet50, BackboneId::resnest50, BackboneId::vit};
}

ModelProvider::ModelProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ModelProvider::archive_path(BackboneId id) const {
  return dir_ / (std::string(to_string(id)) + ".ctmod");
}

bool ModelProvider::available(BackboneId id) const {
  return std::filesystem::exists(archive_path(id));
}

BackboneArchive ModelProvider::load(BackboneId id) const {
  const auto path = archive_path(id);
  if (!std::filesystem::exists(path))
    throw ConfigError("no pretrained weights for backbone \"" +
                      std::string(to_string(id)) + "\" (expected " +
                      path.string() + ")");
  nn::ArchiveReader r(path, kBackboneMagic);
  const auto& meta = r.meta();
  BackboneArchive a;
  a.id = meta.at("id").get<std::string>();
  if (a.id != to_string(id))
    throw DataError("backbone archive id mismatch in " + path.string());
  a.graph = meta.at("graph");
  a.feature_dim = meta.at("feature_dim").get<int64_t>();
  a.input_divisor = meta.at("input_divisor").get<int64_t>();
  a.min_input = meta.at("min_input").get<int64_t>();
  for (int i = 0; i < 3; ++i) {
    a.mean[static_cast<size_t>(i)] = meta.at("mean").at(i).get<double>();
    a.stddev[static_cast<size_t>(i)] = meta.at("std").at(i).get<double>();
  }
  for (const auto& name : r.tensor_names()) a.weights[name] = r.tensor(name);
  return a;
}

namespace {

using nn::Conv2d;
using nn::Gelu;
using nn::GlobalAvgPool;
using nn::ReLU;
using nn::Residual;
using nn::Sequential;

// No normalization layers here: per-sample norms would erase global
// intensity, which CT slices carry as real signal at this scale.
void conv_block(Sequential<float>& s, int64_t in, int64_t out, int64_t stride) {
  s.add(std::make_unique<Conv2d<float>>(in, out, 3, stride, 1));
  s.add(std::make_unique<ReLU<float>>());
}

Sequential<float> residual_block(int64_t width) {
  Sequential<float> body;
  body.add(std::make_unique<Conv2d<float>>(width, width, 3, 1, 1));
  body.add(std::make_unique<ReLU<float>>());
  body.add(std::make_unique<Conv2d<float>>(width, width, 3, 1, 1));
  return body;
}

// Desk-scale stand-ins, one flavor per id. They are provider black boxes, not
// faithful reimplementations (full-size weights are imported instead).
struct MicroPlan {
  Sequential<float> body;
  int64_t feature_dim = 0;
  int64_t input_divisor = 1;
  int64_t min_input = 8;
  uint64_t init_seed = 0;
};

MicroPlan micro_plan(BackboneId id) {
  MicroPlan plan;
  Sequential<float>& b = plan.body;
  switch (id) {
    case BackboneId::resnet50:
      conv_block(b, 3, 16, 2);
      b.add(std::make_unique<Residual<float>>(residual_block(16)));
      b.add(std::make_unique<ReLU<float>>());
      conv_block(b, 16, 32, 2);
      b.add(std::make_unique<Residual<float>>(residual_block(32)));
      b.add(std::make_unique<ReLU<float>>());
      b.add(std::make_unique<GlobalAvgPool<float>>());
      plan.feature_dim = 32;
      plan.init_seed = 0x5e50;
      break;
    case BackboneId::resnest50:
      conv_block(b, 3, 20, 2);
      b.add(std::make_unique<Residual<float>>(residual_block(20)));
      b.add(std::make_unique<ReLU<float>>());
      conv_block(b, 20, 40, 2);
      b.add(std::make_unique<Residual<float>>(residual_block(40)));
      b.add(std::make_unique<ReLU<float>>());
      b.add(std::make_unique<GlobalAvgPool<float>>());
      plan.feature_dim = 40;
      plan.init_seed = 0x5e57;
      break;
    case BackboneId::densenet121:
      conv_block(b, 3, 12, 2);
      conv_block(b, 12, 24, 2);
      conv_block(b, 24, 32, 2);
      b.add(std::make_unique<GlobalAvgPool<float>>());
      plan.feature_dim = 32;
      plan.init_seed = 0xde61;
      break;
    case BackboneId::efficientnet_b3:
      conv_block(b, 3, 8, 2);
      conv_block(b, 8, 16, 2);
      conv_block(b, 16, 24, 2);
      b.add(std::make_unique<GlobalAvgPool<float>>());
      plan.feature_dim = 24;
      plan.init_seed = 0xeffb3;
      break;
    case BackboneId::vit:
      // patch embedding + token MLP (1x1 convs act per token)
      b.add(std::make_unique<Conv2d<float>>(3, 32, 16, 16, 0));
      b.add(std::make_unique<Gelu<float>>());
      b.add(std::make_unique<Conv2d<float>>(32, 64, 1, 1, 0));
      b.add(std::make_unique<Gelu<float>>());
      b.add(std::make_unique<Conv2d<float>>(64, 32, 1, 1, 0));
      b.add(std::make_unique<GlobalAvgPool<float>>());
      plan.feature_dim = 32;
      plan.input_divisor = 16;
      plan.min_input = 16;
      plan.init_seed = 0x717;
      break;
  }
  return plan;
}

}  // namespace

void ModelProvider::write_micro_archive(const std::filesystem::path& path,
                                        BackboneId id) {
  MicroPlan plan = micro_plan(id);
  Rng rng(plan.init_seed);
  nn::init_kaiming(plan.body, rng);

  nn::ArchiveWriter w(kBackboneMagic);
  auto& meta = w.meta();
  meta["id"] = to_string(id);
  meta["graph"] = plan.body.spec();
  meta["feature_dim"] = plan.feature_dim;
  meta["input_divisor"] = plan.input_divisor;
  meta["min_input"] = plan.min_input;
  meta["mean"] = {0.5, 0.5, 0.5};
  meta["std"] = {0.25, 0.25, 0.25};
  meta["profile"] = "micro";
  nn::save_layer_params(w, plan.body, "");
  w.write(path);
}

void ModelProvider::ensure_micro_archives(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ModelProvider provider(dir);
  for (BackboneId id : all_backbone_ids())
    if (!provider.available(id)) write_micro_archive(provider.archive_path(id), id);
}

}  // namespace ctaug::tune
