#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spotlight/config.hpp"
#include "spotlight/losses.hpp"
#include "spotlight/metrics.hpp"
#include "spotlight/net.hpp"
#include "spotlight/segeval.hpp"
#include "spotlight/synth.hpp"
#include "spotlight/train.hpp"

namespace spotlight {

/// Baseline-vs-Spotlight comparison on synthetic phantoms. Both arms share the
/// phantoms, network, seed and budget; only the objective (and the matching
/// target standardization) differs.
struct ExperimentConfig {
  PhantomConfig phantom;  // seed is ignored; each phantom derives its own
  int n_train = 16;
  int n_test = 4;
  NetConfig net;
  TrainConfig train;  // loss field is set per arm
  LossConfig loss;
  SegConfig seg;
  std::vector<double> sweep_thresholds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  int frc_bin_delta = 5;
  std::int64_t eval_crop = 16;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "spotlight_out";

  void validate() const;
  TrainConfig arm(LossKind kind) const;
};

/// Applies the entries of `m` on top of `base`; unknown keys are errors.
ExperimentConfig apply_config(const ConfigMap& m, ExperimentConfig base = {});
/// Canonical `key = value` dump that apply_config reads back unchanged.
std::string config_text(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

const char* arm_name(LossKind kind);
LossKind parse_arm(const std::string& name);

/// Deterministic per-stream seed (SplitMix64 over the global seed).
std::uint64_t derive_seed(std::uint64_t global, std::uint64_t stream, std::uint64_t index);

/// Mean-centered, unit-variance network input.
Volume standardize_input(const Volume& input);

/// Standardized pair for training. The mask is the Otsu foreground of the raw
/// target; the target is centered on the Otsu threshold for the Spotlight arm
/// and on its mean for the plain arm.
TrainingPair make_training_pair(const SynthSample& s, LossKind kind);

/// Raw and standardized extremes over all training targets.
TargetRange training_target_range(std::span<const SynthSample> train, LossKind kind);

struct MetricRow {
  std::string arm;
  int sample = 0;
  std::string metric;
  std::string scope;
  double value = 0.0;
};

struct ApTableRow {
  std::string arm;
  int sample = 0;
  ApRow row;
};

struct FeatureRow {
  std::string arm;
  int sample = 0;
  InstanceFeatures features;
};

struct SweepTableRow {
  std::string arm;
  int sample = 0;
  SweepRow row;
};

struct ArmResult {
  LossKind kind = LossKind::PlainMse;
  NetParams<float> params;
  TargetRange range;
  std::vector<double> loss_trace;
  std::vector<Volume> predictions;  // rescaled, one per test sample
};

struct ExperimentReport {
  std::vector<MetricRow> metrics;
  std::vector<ApTableRow> ap;
  std::vector<FeatureRow> features;
  std::vector<SweepTableRow> sweep;
  std::vector<ArmResult> arms;      // plain MSE first, then Spotlight
  std::vector<Volume> targets;      // cropped test targets
};

/// Per-arm aggregates over the test set.
struct ArmSummary {
  double ap25 = 0, ap50 = 0, ap75 = 0;
  double psnr_whole = 0, psnr_fg = 0;
  double ssim_whole = 0, ssim_fg = 0;
  double frc_whole = 0, frc_fg = 0;
  double profile_distance = 0;  // mean over samples where both sides have instances
  int profile_samples = 0;
  std::vector<double> sweep_ap50;  // per threshold, mean over samples
  double sweep_ap50_std = 0;       // population std across thresholds
  double sweep_ap50_best = 0;
  double final_loss = 0;           // mean of the last 100 iterations
};

struct ExperimentSummary {
  ArmSummary mse;
  ArmSummary spotlight;
  ArmSummary target;  // segmentation of the true targets, AP only
};

using ExperimentLog = std::function<void(const std::string&)>;

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ExperimentLog& log = {});
ExperimentSummary summarize(const ExperimentReport& report, const ExperimentConfig& cfg);

/// Writes metrics.csv, ap.csv, features.csv, sweep.csv, loss.csv, the
/// histogram SVGs, config.txt and summary.txt into cfg.out_dir.
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg);

}  // namespace spotlight
