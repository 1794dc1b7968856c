#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spotlight/error.hpp"
#include "spotlight/experiment.hpp"

namespace spotlight {

/// Process exit status for an error: 2 configuration, 4 numeric failure,
/// 3 anything data related.
int exit_code_for(ErrorCode code);

/// Writes `count` phantoms as phantom_NNN.{input,target,labels}.vol.
std::vector<std::filesystem::path> cmd_synth(const ExperimentConfig& cfg, int count,
                                             const std::filesystem::path& out_dir);

/// Trains one arm. With an empty data_dir the training phantoms come from the
/// config; otherwise every *.input.vol with a matching *.target.vol is used.
/// Writes model.ckpt and loss.csv.
std::filesystem::path cmd_train(const ExperimentConfig& cfg, LossKind kind,
                                const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir);

struct PredictOutput {
  std::filesystem::path standardized;
  std::filesystem::path rescaled;
};

/// Inference-mode prediction. The input is cropped to a multiple of 2^depth
/// and standardized first; the rescaled copy uses the checkpoint's target range.
PredictOutput cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                          const std::filesystem::path& out_dir);

/// Watershed segmentation plus post-processing; writes <stem>.labels.vol.
std::filesystem::path cmd_segment(const ExperimentConfig& cfg, const std::filesystem::path& input,
                                  const std::filesystem::path& out_dir);

/// Image and instance metrics of one prediction; writes metrics.csv, ap.csv
/// and features.csv.
void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& pred,
                  const std::filesystem::path& target, const std::filesystem::path& labels,
                  const std::filesystem::path& out_dir);

/// Writes sweep.csv over cfg.sweep_thresholds.
void cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& pred,
               const std::filesystem::path& target, const std::filesystem::path& labels,
               const std::filesystem::path& out_dir);

void cmd_run_experiment(const ExperimentConfig& cfg, const ExperimentLog& log = {});

/// Overlaid histograms of the given volumes; writes histogram.svg.
std::filesystem::path cmd_plot_histogram(const std::vector<std::filesystem::path>& volumes,
                                         const std::vector<double>& thresholds,
                                         const std::filesystem::path& out_dir, int bins = 100);

}  // namespace spotlight
