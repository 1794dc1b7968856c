#include "spotlight/commands.hpp"

#include <algorithm>
#include <cstdio>

#include "spotlight/checkpoint.hpp"
#include "spotlight/foreground.hpp"
#include "spotlight/report.hpp"

namespace spotlight {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSharpness:
      return 2;
    case ErrorCode::NumericFailure:
      return 4;
    default:
      return 3;
  }
}

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double meta_double(const Checkpoint& c, const std::string& key) {
  const auto it = c.meta.find(key);
  if (it == c.meta.end()) throw Error(ErrorCode::Incompatible, "checkpoint lacks metadata " + key);
  try {
    return config_double(key, it->second);
  } catch (const Error&) {
    throw Error(ErrorCode::Incompatible, "checkpoint metadata " + key + " is not a number");
  }
}

// "dir/name.input.vol" -> "name"
std::string stem_of(const fs::path& p) {
  std::string s = p.filename().string();
  if (s.size() > 4 && s.ends_with(".vol")) s.resize(s.size() - 4);
  return s;
}

}  // namespace

std::vector<fs::path> cmd_synth(const ExperimentConfig& cfg, int count, const fs::path& out_dir) {
  cfg.phantom.validate();
  if (count < 1) throw Error(ErrorCode::InvalidConfig, "count must be >= 1");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (int i = 0; i < count; ++i) {
    PhantomConfig pc = cfg.phantom;
    pc.seed = derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(i));
    const SynthSample s = generate_phantom(pc);
    char name[32];
    std::snprintf(name, sizeof name, "phantom_%03d", i);
    const fs::path base = out_dir / name;
    save_volume(s.input, base.string() + ".input.vol");
    save_volume(s.target, base.string() + ".target.vol");
    save_labels(s.labels, base.string() + ".labels.vol");
    written.push_back(base.string() + ".input.vol");
  }
  return written;
}

fs::path cmd_train(const ExperimentConfig& cfg, LossKind kind, const fs::path& data_dir, const fs::path& out_dir) {
  cfg.validate();
  std::vector<SynthSample> samples;
  if (data_dir.empty()) {
    for (int i = 0; i < cfg.n_train; ++i) {
      PhantomConfig pc = cfg.phantom;
      pc.seed = derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(i));
      samples.push_back(generate_phantom(pc));
    }
  } else {
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(data_dir)) {
      if (e.path().filename().string().ends_with(".input.vol")) inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    for (const auto& in : inputs) {
      std::string t = in.string();
      t.replace(t.size() - std::string(".input.vol").size(), std::string::npos, ".target.vol");
      SynthSample s;
      s.input = load_volume(in);
      s.target = load_volume(t);
      samples.push_back(std::move(s));
    }
    if (samples.empty()) throw Error(ErrorCode::CorruptFile, "no *.input.vol files in " + data_dir.string());
  }
  std::vector<TrainingPair> pairs;
  for (const auto& s : samples) pairs.push_back(make_training_pair(s, kind));
  const TargetRange range = training_target_range(samples, kind);
  TrainResult r = train(cfg.arm(kind), cfg.net, pairs);

  fs::create_directories(out_dir);
  Checkpoint ckpt{std::move(r.params), {}};
  ckpt.meta["loss"] = arm_name(kind);
  ckpt.meta["seed"] = std::to_string(cfg.seed);
  ckpt.meta["iterations"] = std::to_string(cfg.train.iterations);
  ckpt.meta["raw_min"] = exact(range.raw_min);
  ckpt.meta["raw_max"] = exact(range.raw_max);
  ckpt.meta["std_min"] = exact(range.std_min);
  ckpt.meta["std_max"] = exact(range.std_max);
  const fs::path path = out_dir / "model.ckpt";
  save_checkpoint(ckpt, path);

  CsvWriter loss({"arm", "iteration", "loss"});
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
    loss.cell(arm_name(kind)).cell(static_cast<std::int64_t>(i)).cell(r.loss_trace[i]);
    loss.end_row();
  }
  loss.save(out_dir / "loss.csv");
  return path;
}

PredictOutput cmd_predict(const fs::path& checkpoint, const fs::path& input, const fs::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const TargetRange range{meta_double(ckpt, "raw_min"), meta_double(ckpt, "raw_max"), meta_double(ckpt, "std_min"),
                          meta_double(ckpt, "std_max")};
  const Volume v = crop_to_multiple(load_volume(input), ckpt.params.config.divisor());
  if (v.empty()) {
    throw Error(ErrorCode::Incompatible, "input " + to_string(load_volume(input).shape()) +
                                             " is smaller than the network divisor");
  }
  const Volume pred = predict_volume(ckpt.params, standardize_input(v));
  fs::create_directories(out_dir);
  const std::string stem = stem_of(input);
  PredictOutput out{out_dir / (stem + ".pred.vol"), out_dir / (stem + ".pred.rescaled.vol")};
  save_volume(pred, out.standardized);
  save_volume(rescale_to_target_range(pred, range), out.rescaled);
  return out;
}

fs::path cmd_segment(const ExperimentConfig& cfg, const fs::path& input, const fs::path& out_dir) {
  cfg.seg.validate();
  const LabelVolume l = segment_instances(load_volume(input), cfg.seg);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / (stem_of(input) + ".labels.vol");
  save_labels(l, path);
  return path;
}

void cmd_evaluate(const ExperimentConfig& cfg, const fs::path& pred_path, const fs::path& target_path,
                  const fs::path& labels_path, const fs::path& out_dir) {
  cfg.seg.validate();
  const Volume pred = load_volume(pred_path);
  const Volume target = load_volume(target_path);
  const LabelVolume gt = load_labels(labels_path);
  require_same_shape(pred, target, "evaluate");
  require_same_shape(pred, gt, "evaluate");
  const MaskVolume fg = foreground_mask(target, otsu_threshold(target).threshold);

  CsvWriter metrics({"metric", "scope", "value"});
  auto row = [&](const char* m, const char* s, double v) {
    metrics.cell(m).cell(s).cell(v);
    metrics.end_row();
  };
  row("psnr", "whole", psnr(pred, target));
  row("psnr", "fg", psnr(pred, target, &fg));
  row("ssim", "whole", ssim3d(pred, target));
  row("ssim", "fg", ssim3d(pred, target, &fg));
  row("frc_resolution", "whole", frc_resolution(pred, target, cfg.frc_bin_delta));

  const LabelVolume labels = segment_instances(pred, cfg.seg);
  const auto ap = average_precision(labels, gt, {0.25, 0.5, 0.75});
  CsvWriter apcsv({"tau", "tp", "fp", "fn", "ap"});
  for (const auto& r : ap) {
    apcsv.cell(r.tau).cell(r.tp).cell(r.fp).cell(r.fn).cell(r.ap);
    apcsv.end_row();
  }
  const auto feats = extract_features(labels, pred);
  const auto ref = extract_features(segment_instances(target, cfg.seg), target);
  row("count", "instances", static_cast<double>(feats.size()));
  row("profile_distance", "instances",
      feats.empty() || ref.empty() ? std::numeric_limits<double>::quiet_NaN() : profile_distance(feats, ref));

  std::vector<std::string> fh{"label"};
  for (const auto& n : InstanceFeatures::names()) fh.push_back(n);
  CsvWriter fcsv(fh);
  for (const auto& f : feats) {
    fcsv.cell(static_cast<std::int64_t>(f.label));
    for (double v : f.values()) fcsv.cell(v);
    fcsv.end_row();
  }
  metrics.save(out_dir / "metrics.csv");
  apcsv.save(out_dir / "ap.csv");
  fcsv.save(out_dir / "features.csv");
}

void cmd_sweep(const ExperimentConfig& cfg, const fs::path& pred, const fs::path& target, const fs::path& labels,
               const fs::path& out_dir) {
  cfg.seg.validate();
  const auto rows = threshold_sweep(load_volume(pred), cfg.sweep_thresholds, load_labels(labels),
                                    load_volume(target), cfg.seg);
  CsvWriter csv({"threshold", "metric", "scope", "value"});
  for (const auto& r : rows) {
    csv.cell(r.threshold).cell(r.metric).cell(r.scope).cell(r.value);
    csv.end_row();
  }
  csv.save(out_dir / "sweep.csv");
}

void cmd_run_experiment(const ExperimentConfig& cfg, const ExperimentLog& log) {
  write_report(run_experiment(cfg, log), cfg);
}

fs::path cmd_plot_histogram(const std::vector<fs::path>& volumes, const std::vector<double>& thresholds,
                            const fs::path& out_dir, int bins) {
  if (volumes.empty()) throw Error(ErrorCode::InvalidConfig, "plot-hist needs at least one volume");
  std::vector<Volume> loaded;
  std::vector<std::string> names;
  for (const auto& p : volumes) {
    loaded.push_back(load_volume(p));
    names.push_back(stem_of(p));
  }
  std::vector<const Volume*> ptrs;
  for (const auto& v : loaded) ptrs.push_back(&v);
  const fs::path path = out_dir / "histogram.svg";
  write_text_file(path, histogram_svg(intensity_histograms(ptrs, bins), names, thresholds, "voxel intensities"));
  return path;
}

}  // namespace spotlight
