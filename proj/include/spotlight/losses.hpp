#pragma once

#include <span>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

/// Weights and shape parameters of the foreground-aware objective.
struct LossConfig {
  double lambda = 0.5;    // weight of the masked MSE term
  double k = -0.95;       // soft-threshold sharpness, valid range (-1, 0]
  double epsilon = 1e-6;  // Dice denominator stabilizer

  void validate() const;
};

/// Loss value plus the gradient with respect to the prediction.
template <typename T>
struct LossResult {
  double value = 0.0;
  std::vector<T> grad;
};

template <typename T>
struct VolumeLoss {
  double value = 0.0;
  Grid<T> grad;
};

// Normalized tunable sigmoid: odd, increasing, fixes 0 and +/-1.
double soft_threshold(double x, double k);
double soft_threshold_derivative(double x, double k);

template <typename T>
Grid<T> soft_threshold(const Grid<T>& v, double k);

// Flat-buffer forms, used by the trainer on whole batches. Reductions run in
// double in index order.
template <typename T>
LossResult<T> mse_loss(std::span<const T> pred, std::span<const T> target);

template <typename T>
LossResult<T> masked_mse(std::span<const T> pred, std::span<const T> target,
                         std::span<const std::uint8_t> mask);

/// 1 - 2*sum(s*M) / (sum(s) + sum(M) + eps) with s = max(soft_threshold(pred), 0).
template <typename T>
LossResult<T> dice_loss(std::span<const T> pred, std::span<const std::uint8_t> mask,
                        const LossConfig& cfg);

/// lambda * masked_mse + (1 - lambda) * dice_loss.
template <typename T>
LossResult<T> spotlight_loss(std::span<const T> pred, std::span<const T> target,
                             std::span<const std::uint8_t> mask, const LossConfig& cfg);

// Volume forms.
template <typename T>
VolumeLoss<T> masked_mse(const Grid<T>& pred, const Grid<T>& target, const MaskVolume& m);

template <typename T>
VolumeLoss<T> dice_loss(const Grid<T>& pred, const MaskVolume& m, const LossConfig& cfg);

template <typename T>
VolumeLoss<T> spotlight_loss(const Grid<T>& pred, const Grid<T>& target, const MaskVolume& m,
                             const LossConfig& cfg);

}  // namespace spotlight
