#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spotlight/losses.hpp"
#include "spotlight/net.hpp"

namespace spotlight {

enum class LossKind { PlainMse, Spotlight };

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 4;
  Shape3 patch_shape{16, 32, 32};
  int iterations = 2000;
  std::uint64_t rng_seed = 0;
  LossKind loss = LossKind::PlainMse;
  LossConfig spotlight{};
  double min_fg_fraction = 0.001;
  int max_patch_retries = 100;

  void validate(const NetConfig& net) const;
};

template <typename T>
struct AdamState {
  ParamGrads<T> m;
  ParamGrads<T> v;
  std::int64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const NetParams<T>& params) {
  AdamState<T> s;
  for (auto t : params.trainable()) {
    s.m.emplace_back(t.size(), T{0});
    s.v.emplace_back(t.size(), T{0});
  }
  return s;
}

/// Bias-corrected Adam update; bumps the parameter generation.
template <typename T>
void adam_step(NetParams<T>& params, const ParamGrads<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg) {
  auto tensors = params.trainable();
  if (grads.size() != tensors.size() || state.m.size() != tensors.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: gradient layout does not match parameters");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (grads[t].size() != tensors[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, "adam_step: tensor size mismatch");
    }
    for (std::size_t i = 0; i < tensors[t].size(); ++i) {
      const double g = grads[t][i];
      const double m = cfg.beta1 * state.m[t][i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * state.v[t][i] + (1.0 - cfg.beta2) * g * g;
      state.m[t][i] = static_cast<T>(m);
      state.v[t][i] = static_cast<T>(v);
      const double mhat = m / c1;
      const double vhat = v / c2;
      tensors[t][i] = static_cast<T>(tensors[t][i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  params.generation += 1;
}

/// One training volume: standardized input and target plus the target's
/// foreground mask computed on the full volume.
struct TrainingPair {
  Volume input;
  Volume target;
  MaskVolume mask;
};

struct TrainResult {
  NetParams<float> params;
  std::vector<double> loss_trace;
};

using TrainProgress = std::function<void(int iteration, double loss)>;

TrainResult train(const TrainConfig& train_cfg, const NetConfig& net_cfg,
                  std::span<const TrainingPair> dataset, const TrainProgress& progress = {});

/// Inference-mode prediction of one volume; extents must divide by 2^depth.
Volume predict_volume(const NetParams<float>& params, const Volume& input);

}  // namespace spotlight
