#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "spotlight/commands.hpp"

namespace fs = std::filesystem;
using namespace spotlight;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value settings file");
  sub->add_option("--seed", c.seed, "global seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = apply_config(read_config_file(c.config), cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foreground-aware training and evaluation for 3D virtual staining"};
  app.require_subcommand(1);

  Common common;
  int count = 1;
  std::string loss = "spotlight", data, checkpoint, input, pred, target, labels;
  std::vector<std::string> inputs;
  std::vector<double> thresholds;
  int bins = 100;

  auto* synth = app.add_subcommand("synth", "generate phantom volumes");
  add_common(synth, common);
  synth->add_option("--count", count, "number of phantoms")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train one arm and write a checkpoint");
  add_common(train, common);
  train->add_option("--loss", loss, "mse or spotlight");
  train->add_option("--data", data, "directory of *.input.vol / *.target.vol pairs");

  auto* predict = app.add_subcommand("predict", "predict a volume with a checkpoint");
  add_common(predict, common);
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--input", input)->required();

  auto* segment = app.add_subcommand("segment", "watershed segmentation with post-processing");
  add_common(segment, common);
  segment->add_option("--input", input)->required();

  auto* evaluate = app.add_subcommand("evaluate", "image and instance metrics of a prediction");
  add_common(evaluate, common);
  evaluate->add_option("--pred", pred)->required();
  evaluate->add_option("--target", target)->required();
  evaluate->add_option("--labels", labels, "ground-truth labels")->required();

  auto* sweep = app.add_subcommand("sweep", "threshold sweep of a prediction");
  add_common(sweep, common);
  sweep->add_option("--pred", pred)->required();
  sweep->add_option("--target", target)->required();
  sweep->add_option("--labels", labels, "ground-truth labels")->required();
  sweep->add_option("--thresholds", thresholds, "overrides sweep.thresholds")->delimiter(',');

  auto* experiment = app.add_subcommand("experiment", "baseline vs Spotlight comparison");
  add_common(experiment, common);

  auto* plot = app.add_subcommand("plot-hist", "overlaid intensity histograms as SVG");
  add_common(plot, common);
  plot->add_option("--inputs", inputs, "volumes")->required()->delimiter(',');
  plot->add_option("--thresholds", thresholds, "dashed threshold lines")->delimiter(',');
  plot->add_option("--bins", bins)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = load(common);
    const fs::path out = cfg.out_dir;
    auto log = [](const std::string& m) { std::cerr << m << "\n"; };
    if (*synth) {
      for (const auto& p : cmd_synth(cfg, count, out)) std::cout << p.string() << "\n";
    } else if (*train) {
      std::cout << cmd_train(cfg, parse_arm(loss), data, out).string() << "\n";
    } else if (*predict) {
      const auto r = cmd_predict(checkpoint, input, out);
      std::cout << r.standardized.string() << "\n" << r.rescaled.string() << "\n";
    } else if (*segment) {
      std::cout << cmd_segment(cfg, input, out).string() << "\n";
    } else if (*evaluate) {
      fs::create_directories(out);
      cmd_evaluate(cfg, pred, target, labels, out);
    } else if (*sweep) {
      ExperimentConfig c = cfg;
      if (!thresholds.empty()) c.sweep_thresholds = thresholds;
      fs::create_directories(out);
      cmd_sweep(c, pred, target, labels, out);
    } else if (*experiment) {
      cmd_run_experiment(cfg, log);
    } else if (*plot) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      std::cout << cmd_plot_histogram(paths, thresholds, out, bins).string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
