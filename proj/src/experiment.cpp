#include "spotlight/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "spotlight/foreground.hpp"
#include "spotlight/report.hpp"

namespace spotlight {

namespace {

struct Setting {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string num(double v) { return format_number(v); }
std::string num(long long v) { return std::to_string(v); }

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

Shape3 shape_value(const std::string& key, const std::string& value) {
  const auto v = config_double_list(key, value);
  if (v.size() != 3) throw Error(ErrorCode::InvalidConfig, key + ": expected z,y,x");
  for (double d : v) {
    if (d != std::floor(d) || d < 1) throw Error(ErrorCode::InvalidConfig, key + ": extents must be positive integers");
  }
  return {static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1]), static_cast<std::int64_t>(v[2])};
}

std::string shape_text(const Shape3& s) {
  return std::to_string(s.z) + "," + std::to_string(s.y) + "," + std::to_string(s.x);
}

int int_value(const std::string& key, const std::string& value) {
  const long long v = config_int(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::InvalidConfig, key + ": out of range");
  }
  return static_cast<int>(v);
}

#define DOUBLE_SETTING(KEY, FIELD)                                                      \
  Setting {                                                                             \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = config_double(KEY, v); }, \
        [](const ExperimentConfig& c) { return num(c.FIELD); }                         \
  }
#define INT_SETTING(KEY, FIELD)                                                      \
  Setting {                                                                          \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = int_value(KEY, v); }, \
        [](const ExperimentConfig& c) { return num(static_cast<long long>(c.FIELD)); } \
  }
#define I64_SETTING(KEY, FIELD)                                                        \
  Setting {                                                                            \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = config_int(KEY, v); }, \
        [](const ExperimentConfig& c) { return num(static_cast<long long>(c.FIELD)); }   \
  }
#define BOOL_SETTING(KEY, FIELD)                                                        \
  Setting {                                                                             \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = config_bool(KEY, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); } \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      Setting{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = config_u64("seed", v); },
              [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      Setting{"out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
              [](const ExperimentConfig& c) { return c.out_dir.string(); }},
      INT_SETTING("n_train", n_train),
      INT_SETTING("n_test", n_test),
      Setting{"phantom.shape",
              [](ExperimentConfig& c, const std::string& v) { c.phantom.shape = shape_value("phantom.shape", v); },
              [](const ExperimentConfig& c) { return shape_text(c.phantom.shape); }},
      INT_SETTING("phantom.n_nuclei", phantom.n_nuclei),
      DOUBLE_SETTING("phantom.radius_min", phantom.radius_min),
      DOUBLE_SETTING("phantom.radius_max", phantom.radius_max),
      DOUBLE_SETTING("phantom.axial_elongation_sigma_ratio", phantom.axial_elongation_sigma_ratio),
      DOUBLE_SETTING("phantom.psf_sigma_xy", phantom.psf_sigma_xy),
      DOUBLE_SETTING("phantom.bg_noise_sigma", phantom.bg_noise_sigma),
      DOUBLE_SETTING("phantom.bg_gradient_amplitude", phantom.bg_gradient_amplitude),
      DOUBLE_SETTING("phantom.fg_intensity", phantom.fg_intensity),
      DOUBLE_SETTING("phantom.input_noise_sigma", phantom.input_noise_sigma),
      DOUBLE_SETTING("phantom.falloff", phantom.falloff),
      INT_SETTING("phantom.max_placement_attempts", phantom.max_placement_attempts),
      INT_SETTING("net.base_channels", net.base_channels),
      INT_SETTING("net.depth", net.depth),
      BOOL_SETTING("net.batch_norm", net.batch_norm),
      INT_SETTING("train.iterations", train.iterations),
      INT_SETTING("train.batch_size", train.batch_size),
      Setting{"train.patch",
              [](ExperimentConfig& c, const std::string& v) { c.train.patch_shape = shape_value("train.patch", v); },
              [](const ExperimentConfig& c) { return shape_text(c.train.patch_shape); }},
      DOUBLE_SETTING("train.learning_rate", train.learning_rate),
      DOUBLE_SETTING("train.beta1", train.beta1),
      DOUBLE_SETTING("train.beta2", train.beta2),
      DOUBLE_SETTING("train.adam_eps", train.adam_eps),
      DOUBLE_SETTING("train.min_fg_fraction", train.min_fg_fraction),
      INT_SETTING("train.max_patch_retries", train.max_patch_retries),
      DOUBLE_SETTING("loss.lambda", loss.lambda),
      DOUBLE_SETTING("loss.k", loss.k),
      DOUBLE_SETTING("loss.epsilon", loss.epsilon),
      INT_SETTING("seg.clahe_tiles_y", seg.clahe_tiles_y),
      INT_SETTING("seg.clahe_tiles_x", seg.clahe_tiles_x),
      DOUBLE_SETTING("seg.clahe_clip", seg.clahe_clip),
      DOUBLE_SETTING("seg.seed_min_distance", seg.seed_min_distance),
      I64_SETTING("seg.min_size", seg.min_size),
      I64_SETTING("seg.max_size", seg.max_size),
      BOOL_SETTING("seg.remove_edge_objects", seg.remove_edge_objects),
      Setting{"sweep.thresholds",
              [](ExperimentConfig& c, const std::string& v) {
                c.sweep_thresholds = config_double_list("sweep.thresholds", v);
              },
              [](const ExperimentConfig& c) { return list_text(c.sweep_thresholds); }},
      INT_SETTING("eval.frc_bin_delta", frc_bin_delta),
      I64_SETTING("eval.crop", eval_crop),
  };
  return table;
}

#undef DOUBLE_SETTING
#undef INT_SETTING
#undef I64_SETTING
#undef BOOL_SETTING

}  // namespace

void ExperimentConfig::validate() const {
  phantom.validate();
  if (n_train < 1 || n_test < 1) throw Error(ErrorCode::InvalidConfig, "n_train and n_test must be >= 1");
  net.validate();
  arm(LossKind::Spotlight).validate(net);
  loss.validate();
  seg.validate();
  if (!std::is_sorted(sweep_thresholds.begin(), sweep_thresholds.end())) {
    throw Error(ErrorCode::InvalidConfig, "sweep.thresholds must be ascending");
  }
  if (frc_bin_delta < 1) throw Error(ErrorCode::InvalidConfig, "eval.frc_bin_delta must be >= 1");
  if (eval_crop < 1 || eval_crop % net.divisor() != 0) {
    throw Error(ErrorCode::InvalidConfig, "eval.crop must be a positive multiple of 2^net.depth");
  }
  const Shape3 s = phantom.shape;
  if (s.z / eval_crop == 0 || s.y / eval_crop == 0 || s.x / eval_crop == 0) {
    throw Error(ErrorCode::InvalidConfig, "phantom.shape is smaller than eval.crop");
  }
}

TrainConfig ExperimentConfig::arm(LossKind kind) const {
  TrainConfig t = train;
  t.loss = kind;
  t.spotlight = loss;
  t.rng_seed = derive_seed(seed, 1, 0);
  return t;
}

ExperimentConfig apply_config(const ConfigMap& m, ExperimentConfig base) {
  for (const auto& [key, value] : m) {
    const auto& table = settings();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Setting& s) { return key == s.key; });
    if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
    it->set(base, value);
  }
  return base;
}

std::string config_text(const ExperimentConfig& cfg) {
  std::string s;
  for (const auto& e : settings()) s += std::string(e.key) + " = " + e.get(cfg) + "\n";
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : settings()) keys.emplace_back(e.key);
  return keys;
}

const char* arm_name(LossKind kind) { return kind == LossKind::Spotlight ? "spotlight" : "mse"; }

LossKind parse_arm(const std::string& name) {
  if (name == "spotlight") return LossKind::Spotlight;
  if (name == "mse") return LossKind::PlainMse;
  throw Error(ErrorCode::InvalidConfig, "unknown loss '" + name + "' (expected mse or spotlight)");
}

std::uint64_t derive_seed(std::uint64_t global, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(global) ^ stream) ^ index);
}

Volume standardize_input(const Volume& input) { return standardize(input, mean_std(input).mean).volume; }

TrainingPair make_training_pair(const SynthSample& s, LossKind kind) {
  const double t = otsu_threshold(s.target).threshold;
  const double center = kind == LossKind::Spotlight ? t : mean_std(s.target).mean;
  return {standardize_input(s.input), standardize(s.target, center).volume, foreground_mask(s.target, t)};
}

TargetRange training_target_range(std::span<const SynthSample> train, LossKind kind) {
  if (train.empty()) throw Error(ErrorCode::InvalidConfig, "empty training set");
  TargetRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : train) {
    const auto [lo, hi] = std::minmax_element(s.target.begin(), s.target.end());
    r.raw_min = std::min<double>(r.raw_min, *lo);
    r.raw_max = std::max<double>(r.raw_max, *hi);
    const double center =
        kind == LossKind::Spotlight ? otsu_threshold(s.target).threshold : mean_std(s.target).mean;
    const Volume st = standardize(s.target, center).volume;
    const auto [slo, shi] = std::minmax_element(st.begin(), st.end());
    r.std_min = std::min<double>(r.std_min, *slo);
    r.std_max = std::max<double>(r.std_max, *shi);
  }
  return r;
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + name + ": " + e.what());
  }
}

Volume apply_mask(const Volume& v, const MaskVolume& m) {
  Volume out = v;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!m[i]) out[i] = 0.0f;
  return out;
}

SynthSample make_phantom(const ExperimentConfig& cfg, std::uint64_t stream, int index) {
  PhantomConfig pc = cfg.phantom;
  pc.seed = derive_seed(cfg.seed, stream, static_cast<std::uint64_t>(index));
  return generate_phantom(pc);
}

// Segmentation, AP and features of one volume against the ground truth.
struct Segmented {
  LabelVolume labels;
  std::vector<ApRow> ap;
  std::vector<InstanceFeatures> features;
};

Segmented segment_and_score(const Volume& v, const LabelVolume& gt, const SegConfig& seg) {
  Segmented s;
  s.labels = segment_instances(v, seg);
  s.ap = average_precision(s.labels, gt, {0.25, 0.5, 0.75});
  s.features = extract_features(s.labels, v);
  return s;
}

void add_ap_rows(ExperimentReport& rep, const std::string& arm, int sample, const Segmented& s) {
  static const char* names[] = {"ap_0.25", "ap_0.5", "ap_0.75"};
  for (std::size_t k = 0; k < s.ap.size(); ++k) {
    rep.ap.push_back({arm, sample, s.ap[k]});
    rep.metrics.push_back({arm, sample, names[k], "instances", s.ap[k].ap});
  }
  rep.metrics.push_back({arm, sample, "count", "instances", static_cast<double>(s.features.size())});
  for (const auto& f : s.features) rep.features.push_back({arm, sample, f});
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ExperimentLog& log) {
  cfg.validate();
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  ExperimentReport rep;

  std::vector<SynthSample> train_set, test_set;
  for (int i = 0; i < cfg.n_train; ++i) {
    train_set.push_back(stage("synth train sample " + std::to_string(i), [&] { return make_phantom(cfg, 2, i); }));
  }
  for (int i = 0; i < cfg.n_test; ++i) {
    test_set.push_back(stage("synth test sample " + std::to_string(i), [&] { return make_phantom(cfg, 3, i); }));
  }
  say("generated " + std::to_string(cfg.n_train) + " training and " + std::to_string(cfg.n_test) + " test phantoms");

  for (LossKind kind : {LossKind::PlainMse, LossKind::Spotlight}) {
    const std::string arm = arm_name(kind);
    ArmResult a;
    a.kind = kind;
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      pairs.push_back(stage("prepare " + arm + " sample " + std::to_string(i),
                            [&] { return make_training_pair(train_set[i], kind); }));
    }
    a.range = stage("target range " + arm, [&] { return training_target_range(train_set, kind); });
    auto result = stage("train " + arm, [&] {
      return train(cfg.arm(kind), cfg.net, pairs, [&](int it, double loss) {
        if ((it + 1) % 250 == 0) say("train " + arm + " iteration " + std::to_string(it + 1) + " loss " + format_number(loss));
      });
    });
    a.params = std::move(result.params);
    a.loss_trace = std::move(result.loss_trace);
    rep.arms.push_back(std::move(a));
  }

  for (int i = 0; i < cfg.n_test; ++i) {
    const std::string sid = std::to_string(i);
    const SynthSample& s = test_set[i];
    const Volume input = crop_to_multiple(s.input, cfg.eval_crop);
    const Volume target = crop_to_multiple(s.target, cfg.eval_crop);
    const LabelVolume gt = crop_to_multiple(s.labels, cfg.eval_crop);
    const MaskVolume fg = stage("mask sample " + sid, [&] { return foreground_mask(target, otsu_threshold(target).threshold); });
    const Volume input_std = stage("standardize sample " + sid, [&] { return standardize_input(input); });
    const Segmented ref = stage("segment target sample " + sid, [&] { return segment_and_score(target, gt, cfg.seg); });
    add_ap_rows(rep, "target", i, ref);
    rep.targets.push_back(target);

    for (auto& a : rep.arms) {
      const std::string arm = arm_name(a.kind);
      const std::string where = arm + " sample " + sid;
      const Volume pred = stage("predict " + where, [&] {
        return rescale_to_target_range(predict_volume(a.params, input_std), a.range);
      });
      stage("metrics " + where, [&] {
        rep.metrics.push_back({arm, i, "psnr", "whole", psnr(pred, target)});
        rep.metrics.push_back({arm, i, "psnr", "fg", psnr(pred, target, &fg)});
        rep.metrics.push_back({arm, i, "ssim", "whole", ssim3d(pred, target)});
        rep.metrics.push_back({arm, i, "ssim", "fg", ssim3d(pred, target, &fg)});
        rep.metrics.push_back({arm, i, "frc_resolution", "whole", frc_resolution(pred, target, cfg.frc_bin_delta)});
        rep.metrics.push_back({arm, i, "frc_resolution", "fg",
                               frc_resolution(apply_mask(pred, fg), apply_mask(target, fg), cfg.frc_bin_delta)});
        return 0;
      });
      const Segmented seg = stage("segment " + where, [&] { return segment_and_score(pred, gt, cfg.seg); });
      add_ap_rows(rep, arm, i, seg);
      const double dist = seg.features.empty() || ref.features.empty()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : stage("profile " + where, [&] { return profile_distance(seg.features, ref.features); });
      rep.metrics.push_back({arm, i, "profile_distance", "instances", dist});
      for (const auto& row : stage("sweep " + where, [&] {
             return threshold_sweep(pred, cfg.sweep_thresholds, gt, target, cfg.seg);
           })) {
        rep.sweep.push_back({arm, i, row});
      }
      a.predictions.push_back(pred);
    }
    say("evaluated test sample " + sid);
  }
  return rep;
}

namespace {

double mean_of(const ExperimentReport& rep, const std::string& arm, const std::string& metric,
               const std::string& scope, int* count = nullptr) {
  double acc = 0.0;
  int n = 0;
  for (const auto& r : rep.metrics) {
    if (r.arm != arm || r.metric != metric || r.scope != scope || std::isnan(r.value)) continue;
    acc += r.value;
    ++n;
  }
  if (count) *count = n;
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

ArmSummary summarize_arm(const ExperimentReport& rep, const ExperimentConfig& cfg, const std::string& arm) {
  ArmSummary s;
  s.ap25 = mean_of(rep, arm, "ap_0.25", "instances");
  s.ap50 = mean_of(rep, arm, "ap_0.5", "instances");
  s.ap75 = mean_of(rep, arm, "ap_0.75", "instances");
  if (arm == "target") return s;
  s.psnr_whole = mean_of(rep, arm, "psnr", "whole");
  s.psnr_fg = mean_of(rep, arm, "psnr", "fg");
  s.ssim_whole = mean_of(rep, arm, "ssim", "whole");
  s.ssim_fg = mean_of(rep, arm, "ssim", "fg");
  s.frc_whole = mean_of(rep, arm, "frc_resolution", "whole");
  s.frc_fg = mean_of(rep, arm, "frc_resolution", "fg");
  s.profile_distance = mean_of(rep, arm, "profile_distance", "instances", &s.profile_samples);
  for (double t : cfg.sweep_thresholds) {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : rep.sweep) {
      if (r.arm == arm && r.row.threshold == t && r.row.metric == "ap_0.5") {
        acc += r.row.value;
        ++n;
      }
    }
    s.sweep_ap50.push_back(n ? acc / n : 0.0);
  }
  if (!s.sweep_ap50.empty()) {
    const double m = std::accumulate(s.sweep_ap50.begin(), s.sweep_ap50.end(), 0.0) / s.sweep_ap50.size();
    double var = 0.0;
    for (double v : s.sweep_ap50) var += (v - m) * (v - m);
    s.sweep_ap50_std = std::sqrt(var / s.sweep_ap50.size());
    s.sweep_ap50_best = *std::max_element(s.sweep_ap50.begin(), s.sweep_ap50.end());
  }
  for (const auto& a : rep.arms) {
    if (arm_name(a.kind) != arm || a.loss_trace.empty()) continue;
    const std::size_t n = std::min<std::size_t>(100, a.loss_trace.size());
    s.final_loss = std::accumulate(a.loss_trace.end() - n, a.loss_trace.end(), 0.0) / n;
  }
  return s;
}

Volume stack_z(const std::vector<Volume>& vs) {
  if (vs.empty()) return {};
  Shape3 s = vs.front().shape();
  std::vector<float> data;
  for (const auto& v : vs) {
    require_same_shape(v, vs.front(), "histogram stack");
    data.insert(data.end(), v.begin(), v.end());
  }
  s.z *= static_cast<std::int64_t>(vs.size());
  return Volume(s, std::move(data));
}

}  // namespace

ExperimentSummary summarize(const ExperimentReport& report, const ExperimentConfig& cfg) {
  return {summarize_arm(report, cfg, "mse"), summarize_arm(report, cfg, "spotlight"),
          summarize_arm(report, cfg, "target")};
}

void write_report(const ExperimentReport& rep, const ExperimentConfig& cfg) {
  const auto& dir = cfg.out_dir;
  std::filesystem::create_directories(dir);

  CsvWriter metrics({"arm", "sample", "metric", "scope", "value"});
  for (const auto& r : rep.metrics) {
    metrics.cell(r.arm).cell(r.sample).cell(r.metric).cell(r.scope).cell(r.value);
    metrics.end_row();
  }
  metrics.save(dir / "metrics.csv");

  CsvWriter ap({"arm", "sample", "tau", "tp", "fp", "fn", "ap"});
  for (const auto& r : rep.ap) {
    ap.cell(r.arm).cell(r.sample).cell(r.row.tau).cell(r.row.tp).cell(r.row.fp).cell(r.row.fn).cell(r.row.ap);
    ap.end_row();
  }
  ap.save(dir / "ap.csv");

  std::vector<std::string> fh{"arm", "sample", "label"};
  for (const auto& n : InstanceFeatures::names()) fh.push_back(n);
  CsvWriter features(fh);
  for (const auto& r : rep.features) {
    features.cell(r.arm).cell(r.sample).cell(static_cast<std::int64_t>(r.features.label));
    for (double v : r.features.values()) features.cell(v);
    features.end_row();
  }
  features.save(dir / "features.csv");

  CsvWriter sweep({"arm", "sample", "threshold", "metric", "scope", "value"});
  for (const auto& r : rep.sweep) {
    sweep.cell(r.arm).cell(r.sample).cell(r.row.threshold).cell(r.row.metric).cell(r.row.scope).cell(r.row.value);
    sweep.end_row();
  }
  sweep.save(dir / "sweep.csv");

  CsvWriter loss({"arm", "iteration", "loss"});
  for (const auto& a : rep.arms) {
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i) {
      loss.cell(arm_name(a.kind)).cell(static_cast<std::int64_t>(i)).cell(a.loss_trace[i]);
      loss.end_row();
    }
  }
  loss.save(dir / "loss.csv");

  const Volume targets = stack_z(rep.targets);
  for (const auto& a : rep.arms) {
    const Volume preds = stack_z(a.predictions);
    if (preds.empty()) continue;
    const auto h = intensity_histograms({&preds, &targets});
    write_text_file(dir / ("histogram_" + std::string(arm_name(a.kind)) + ".svg"),
                    histogram_svg(h, {std::string(arm_name(a.kind)) + " prediction", "target"},
                                  cfg.sweep_thresholds, std::string(arm_name(a.kind)) + " test predictions"));
  }

  write_text_file(dir / "config.txt", config_text(cfg));

  const ExperimentSummary sum = summarize(rep, cfg);
  std::ostringstream out;
  auto arm_lines = [&](const std::string& name, const ArmSummary& s, bool full) {
    out << name << ".ap_0.25 = " << format_number(s.ap25) << "\n";
    out << name << ".ap_0.5 = " << format_number(s.ap50) << "\n";
    out << name << ".ap_0.75 = " << format_number(s.ap75) << "\n";
    if (!full) return;
    out << name << ".psnr.whole = " << format_number(s.psnr_whole) << "\n";
    out << name << ".psnr.fg = " << format_number(s.psnr_fg) << "\n";
    out << name << ".ssim.whole = " << format_number(s.ssim_whole) << "\n";
    out << name << ".ssim.fg = " << format_number(s.ssim_fg) << "\n";
    out << name << ".frc_resolution.whole = " << format_number(s.frc_whole) << "\n";
    out << name << ".frc_resolution.fg = " << format_number(s.frc_fg) << "\n";
    out << name << ".profile_distance = " << format_number(s.profile_distance) << " (" << s.profile_samples
        << " samples)\n";
    out << name << ".sweep.ap_0.5.std = " << format_number(s.sweep_ap50_std) << "\n";
    out << name << ".sweep.ap_0.5.best = " << format_number(s.sweep_ap50_best) << "\n";
    out << name << ".final_loss = " << format_number(s.final_loss) << "\n";
  };
  out << "seed = " << cfg.seed << "\n";
  arm_lines("mse", sum.mse, true);
  arm_lines("spotlight", sum.spotlight, true);
  arm_lines("target", sum.target, false);
  write_text_file(dir / "summary.txt", out.str());
}

}  // namespace spotlight
