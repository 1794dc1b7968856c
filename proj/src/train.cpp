#include "spotlight/train.hpp"

#include <random>
#include <string>

#include "spotlight/foreground.hpp"

namespace spotlight {

void TrainConfig::validate(const NetConfig& net) const {
  net.validate();
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (iterations < 0) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 0");
  if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw Error(ErrorCode::InvalidConfig, "adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw Error(ErrorCode::InvalidConfig, "adam_eps must be positive");
  const std::int64_t d = net.divisor();
  if (patch_shape.z < d || patch_shape.y < d || patch_shape.x < d || patch_shape.z % d ||
      patch_shape.y % d || patch_shape.x % d) {
    throw Error(ErrorCode::InvalidConfig,
                "patch " + to_string(patch_shape) + " not divisible by " + std::to_string(d));
  }
  if (max_patch_retries < 1) throw Error(ErrorCode::InvalidConfig, "max_patch_retries must be >= 1");
  if (loss == LossKind::Spotlight) spotlight.validate();
}

namespace {

struct PatchBatch {
  Tensor<float> input;
  std::vector<float> target;
  std::vector<std::uint8_t> mask;
};

class PatchSampler {
 public:
  PatchSampler(const TrainConfig& cfg, std::span<const TrainingPair> data)
      : cfg_(cfg), data_(data), rng_(cfg.rng_seed ^ 0x9E3779B97F4A7C15ULL) {}

  PatchBatch next() {
    const Shape3 ps = cfg_.patch_shape;
    const std::int64_t pv = ps.voxels();
    PatchBatch batch{Tensor<float>(cfg_.batch_size, 1, ps),
                     std::vector<float>(static_cast<std::size_t>(cfg_.batch_size * pv)),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(cfg_.batch_size * pv))};
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (int b = 0; b < cfg_.batch_size; ++b) {
      bool accepted = false;
      for (int attempt = 0; attempt < cfg_.max_patch_retries && !accepted; ++attempt) {
        const TrainingPair& pair = data_[pick(rng_)];
        const Shape3 s = pair.target.shape();
        const Shape3 origin{uniform(s.z - ps.z), uniform(s.y - ps.y), uniform(s.x - ps.x)};
        if (cfg_.loss == LossKind::Spotlight) {
          const MaskVolume m = extract_patch(pair.mask, origin, ps);
          if (fg_fraction(m) < cfg_.min_fg_fraction) continue;
        }
        copy_patch(pair.input, origin, batch.input.channel(b, 0));
        copy_patch(pair.target, origin, batch.target.data() + b * pv);
        copy_patch(pair.mask, origin, batch.mask.data() + b * pv);
        accepted = true;
      }
      if (!accepted) {
        throw Error(ErrorCode::NoForegroundPatches,
                    "no patch with foreground fraction >= " + std::to_string(cfg_.min_fg_fraction) +
                        " after " + std::to_string(cfg_.max_patch_retries) + " draws");
      }
    }
    return batch;
  }

 private:
  std::int64_t uniform(std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(0, hi)(rng_);
  }

  template <typename V, typename D>
  void copy_patch(const Grid<V>& v, const Shape3& o, D* dst) const {
    const Shape3 ps = cfg_.patch_shape;
    for (std::int64_t z = 0; z < ps.z; ++z)
      for (std::int64_t y = 0; y < ps.y; ++y) {
        const V* src = &v(o.z + z, o.y + y, o.x);
        std::copy(src, src + ps.x, dst + (z * ps.y + y) * ps.x);
      }
  }

  const TrainConfig& cfg_;
  std::span<const TrainingPair> data_;
  std::mt19937_64 rng_;
};

}  // namespace

TrainResult train(const TrainConfig& train_cfg, const NetConfig& net_cfg,
                  std::span<const TrainingPair> dataset, const TrainProgress& progress) {
  train_cfg.validate(net_cfg);
  if (dataset.empty()) throw Error(ErrorCode::InvalidConfig, "empty training set");
  for (const auto& pair : dataset) {
    require_same_shape(pair.input, pair.target, "training pair");
    require_same_shape(pair.input, pair.mask, "training pair");
    const Shape3 s = pair.input.shape();
    const Shape3 ps = train_cfg.patch_shape;
    if (s.z < ps.z || s.y < ps.y || s.x < ps.x) {
      throw Error(ErrorCode::TooSmall, "volume " + to_string(s) + " smaller than patch " + to_string(ps));
    }
  }

  TrainResult result{init_net<float>(net_cfg, train_cfg.rng_seed), {}};
  result.loss_trace.reserve(static_cast<std::size_t>(train_cfg.iterations));
  AdamState<float> adam = make_adam_state(result.params);
  PatchSampler sampler(train_cfg, dataset);

  for (int it = 0; it < train_cfg.iterations; ++it) {
    PatchBatch batch = sampler.next();
    ForwardResult<float> fwd = forward(result.params, batch.input, Mode::Training);
    const std::span<const float> pred(fwd.prediction.data);
    LossResult<float> loss =
        train_cfg.loss == LossKind::Spotlight
            ? spotlight_loss<float>(pred, batch.target, batch.mask, train_cfg.spotlight)
            : mse_loss<float>(pred, batch.target);
    if (!std::isfinite(loss.value)) {
      throw Error(ErrorCode::NumericFailure, "non-finite loss at iteration " + std::to_string(it));
    }
    Tensor<float> grad_out(fwd.prediction.n, 1, fwd.prediction.spatial);
    grad_out.data = std::move(loss.grad);
    const ParamGrads<float> grads = backward(result.params, fwd.cache, grad_out);
    update_running_stats(result.params, fwd.cache);
    adam_step(result.params, grads, adam, train_cfg);
    result.loss_trace.push_back(loss.value);
    if (progress) progress(it, loss.value);
  }
  return result;
}

Volume predict_volume(const NetParams<float>& params, const Volume& input) {
  const Volume inputs[] = {input};
  const Tensor<float> x = stack_volumes<float, float>(inputs);
  const ForwardResult<float> r = forward(params, x, Mode::Inference, false);
  return unstack_volume<float>(r.prediction, 0, 0, input.voxel_size());
}

}  // namespace spotlight
