#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ctaug/commands.hpp"
#include "ctaug/config.hpp"
#include "ctaug/errors.hpp"
#include "ctaug/kernels.hpp"

namespace {

struct SubcommandArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctaug - CT classification pipeline with CycleGAN augmentation"};
  app.require_subcommand(1);

  const std::pair<const char*, void (*)(const ctaug::ExperimentConfig&)>
      commands[] = {
          {"prepare", ctaug::cli::cmd_prepare},
          {"train-cyclegan", ctaug::cli::cmd_train_cyclegan},
          {"generate", ctaug::cli::cmd_generate},
          {"train-eval", ctaug::cli::cmd_train_eval},
          {"report", ctaug::cli::cmd_report},
      };

  std::vector<std::shared_ptr<SubcommandArgs>> args_store;
  std::function<void(const ctaug::ExperimentConfig&)> selected;
  std::shared_ptr<SubcommandArgs> selected_args;

  for (const auto& [name, fn] : commands) {
    auto args = std::make_shared<SubcommandArgs>();
    args_store.push_back(args);
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args->config_path, "experiment config JSON")
        ->required();
    sub->add_option("--set", args->overrides,
                    "override a config field, key.path=value");
    sub->callback([&selected, &selected_args, args, fn]() {
      selected = fn;
      selected_args = args;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = ctaug::ExperimentConfig::from_file(
        selected_args->config_path, selected_args->overrides);
    selected(cfg);
    return 0;
  } catch (const ctaug::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ctaug::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ctaug::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
