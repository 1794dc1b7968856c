#include "spotlight/losses.hpp"

#include <cmath>
#include <string>

namespace spotlight {

namespace {

void check_sharpness(double k) {
  if (!(k > -1.0 && k <= 0.0)) {
    throw Error(ErrorCode::InvalidSharpness, "k=" + std::to_string(k) + " outside (-1, 0]");
  }
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

template <typename T>
VolumeLoss<T> wrap(LossResult<T>&& r, const Grid<T>& like) {
  return {r.value, Grid<T>(like.shape(), std::move(r.grad), like.voxel_size())};
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "lambda=" + std::to_string(lambda) + " outside [0, 1]");
  }
  check_sharpness(k);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be positive");
}

double soft_threshold(double x, double k) {
  check_sharpness(k);
  return (x - k * x) / (k - 2.0 * k * std::abs(x) + 1.0);
}

double soft_threshold_derivative(double x, double k) {
  check_sharpness(k);
  const double d = k - 2.0 * k * std::abs(x) + 1.0;
  return (1.0 - k * k) / (d * d);
}

template <typename T>
Grid<T> soft_threshold(const Grid<T>& v, double k) {
  check_sharpness(k);
  Grid<T> out(v.shape(), T{}, v.voxel_size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(soft_threshold(v[i], k));
  return out;
}

template <typename T>
LossResult<T> mse_loss(std::span<const T> pred, std::span<const T> target) {
  check_sizes(pred.size(), target.size(), "mse_loss");
  if (pred.empty()) throw Error(ErrorCode::EmptyMask, "mse_loss over zero voxels");
  const double n = static_cast<double>(pred.size());
  LossResult<T> r;
  r.grad.resize(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / n);
  }
  r.value = acc / n;
  return r;
}

template <typename T>
LossResult<T> masked_mse(std::span<const T> pred, std::span<const T> target,
                         std::span<const std::uint8_t> mask) {
  check_sizes(pred.size(), target.size(), "masked_mse target");
  check_sizes(pred.size(), mask.size(), "masked_mse mask");
  double count = 0.0;
  for (auto b : mask) count += b ? 1.0 : 0.0;
  if (count == 0.0) throw Error(ErrorCode::EmptyMask, "masked_mse with an empty mask");

  LossResult<T> r;
  r.grad.assign(pred.size(), T{0});
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / count);
  }
  r.value = acc / count;
  return r;
}

template <typename T>
LossResult<T> dice_loss(std::span<const T> pred, std::span<const std::uint8_t> mask,
                        const LossConfig& cfg) {
  cfg.validate();
  check_sizes(pred.size(), mask.size(), "dice_loss mask");
  double mask_sum = 0.0;
  for (auto b : mask) mask_sum += b ? 1.0 : 0.0;
  if (mask_sum == 0.0) throw Error(ErrorCode::EmptyMask, "dice_loss with an empty mask");

  // Rectified soft foreground and its local slope.
  std::vector<double> soft(pred.size());
  std::vector<double> slope(pred.size());
  double overlap = 0.0;
  double soft_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = pred[i];
    const double s = soft_threshold(x, cfg.k);
    if (s > 0.0) {
      soft[i] = s;
      slope[i] = soft_threshold_derivative(x, cfg.k);
    } else {
      soft[i] = 0.0;
      slope[i] = 0.0;
    }
    soft_sum += soft[i];
    if (mask[i]) overlap += soft[i];
  }

  const double denom = soft_sum + mask_sum + cfg.epsilon;
  LossResult<T> r;
  r.value = 1.0 - 2.0 * overlap / denom;
  r.grad.resize(pred.size());
  const double inv_d2 = 1.0 / (denom * denom);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double m = mask[i] ? 1.0 : 0.0;
    const double dl_ds = -2.0 * (m * denom - overlap) * inv_d2;
    r.grad[i] = static_cast<T>(dl_ds * slope[i]);
  }
  return r;
}

template <typename T>
LossResult<T> spotlight_loss(std::span<const T> pred, std::span<const T> target,
                             std::span<const std::uint8_t> mask, const LossConfig& cfg) {
  cfg.validate();
  LossResult<T> mmse = masked_mse(pred, target, mask);
  LossResult<T> dice = dice_loss(pred, mask, cfg);
  const double a = cfg.lambda;
  const double b = 1.0 - cfg.lambda;
  LossResult<T> r;
  r.value = a * mmse.value + b * dice.value;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.grad[i] = static_cast<T>(a * static_cast<double>(mmse.grad[i]) +
                               b * static_cast<double>(dice.grad[i]));
  }
  return r;
}

template <typename T>
VolumeLoss<T> masked_mse(const Grid<T>& pred, const Grid<T>& target, const MaskVolume& m) {
  require_same_shape(pred, target, "masked_mse");
  require_same_shape(pred, m, "masked_mse");
  return wrap(masked_mse<T>(pred.data(), target.data(), m.data()), pred);
}

template <typename T>
VolumeLoss<T> dice_loss(const Grid<T>& pred, const MaskVolume& m, const LossConfig& cfg) {
  require_same_shape(pred, m, "dice_loss");
  return wrap(dice_loss<T>(pred.data(), m.data(), cfg), pred);
}

template <typename T>
VolumeLoss<T> spotlight_loss(const Grid<T>& pred, const Grid<T>& target, const MaskVolume& m,
                             const LossConfig& cfg) {
  require_same_shape(pred, target, "spotlight_loss");
  require_same_shape(pred, m, "spotlight_loss");
  return wrap(spotlight_loss<T>(pred.data(), target.data(), m.data(), cfg), pred);
}

#define SPOTLIGHT_INSTANTIATE_LOSSES(T)                                                        \
  template Grid<T> soft_threshold(const Grid<T>&, double);                                    \
  template LossResult<T> mse_loss(std::span<const T>, std::span<const T>);                     \
  template LossResult<T> masked_mse(std::span<const T>, std::span<const T>,                    \
                                    std::span<const std::uint8_t>);                            \
  template LossResult<T> dice_loss(std::span<const T>, std::span<const std::uint8_t>,          \
                                   const LossConfig&);                                         \
  template LossResult<T> spotlight_loss(std::span<const T>, std::span<const T>,                \
                                        std::span<const std::uint8_t>, const LossConfig&);     \
  template VolumeLoss<T> masked_mse(const Grid<T>&, const Grid<T>&, const MaskVolume&);        \
  template VolumeLoss<T> dice_loss(const Grid<T>&, const MaskVolume&, const LossConfig&);      \
  template VolumeLoss<T> spotlight_loss(const Grid<T>&, const Grid<T>&, const MaskVolume&,     \
                                        const LossConfig&);

SPOTLIGHT_INSTANTIATE_LOSSES(float)
SPOTLIGHT_INSTANTIATE_LOSSES(double)

#undef SPOTLIGHT_INSTANTIATE_LOSSES

}  // namespace spotlight
