#pragma once

// Finite-difference check of the full network against a training loss.
// Parameters whose +/-h perturbation flips any ReLU or the Dice rectification
// are skipped: the objective is not differentiable across such a stencil.
// The fourth-order stencil keeps truncation error below the tolerance where
// the soft threshold bends sharply near zero.

#include <random>
#include <vector>

#include "spotlight/losses.hpp"
#include "spotlight/net.hpp"
#include "spotlight/train.hpp"
#include "support.hpp"

namespace spotlight::testing {

struct NetGradReport {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

inline std::vector<bool> kink_pattern(const NetParams<double>& p, const Tensor<double>& x,
                                      bool output_kinks) {
  const auto r = forward(p, x, Mode::Training, true);
  std::vector<bool> bits;
  for (const auto& a : r.cache.act)
    for (double v : a.data) bits.push_back(v > 0.0);
  if (output_kinks)
    for (double v : r.prediction.data) bits.push_back(v > 0.0);
  return bits;
}

/// One random instance: batch 2, single-channel input of shape s, the chosen
/// loss against a random target and its mask. Step h, double precision.
inline NetGradReport network_gradient_check(const NetConfig& cfg, Shape3 s, std::mt19937_64& rng,
                                            LossKind kind = LossKind::Spotlight, double h = 1e-4) {
  NetParams<double> p = init_net<double>(cfg, rng());
  std::normal_distribution<double> d;
  for (auto t : p.trainable())
    for (auto& v : t) v = 0.4 * d(rng);

  Tensor<double> x(2, 1, s);
  for (auto& v : x.data) v = d(rng);
  std::vector<double> target(x.size());
  std::vector<std::uint8_t> mask(x.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = d(rng);
    mask[i] = target[i] > 0.3 ? 1 : 0;
  }
  mask[0] = 1;
  const LossConfig lc;

  const bool spot = kind == LossKind::Spotlight;
  auto evaluate = [&](const std::vector<double>& pred) {
    return spot ? spotlight_loss<double>(pred, target, mask, lc) : mse_loss<double>(pred, target);
  };

  const auto fwd = forward(p, x);
  const auto loss = evaluate(fwd.prediction.data);
  Tensor<double> g(2, 1, s);
  g.data = loss.grad;
  const auto grads = backward(p, fwd.cache, g);
  const auto base = kink_pattern(p, x, spot);

  auto objective = [&] { return evaluate(forward(p, x, Mode::Training, false).prediction.data).value; };

  NetGradReport rep;
  auto tensors = p.trainable();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t].size(); ++i) {
      double& xi = tensors[t][i];
      const double saved = xi;
      bool flipped = false;
      for (double off : {2 * h, h, -h, -2 * h}) {
        xi = saved + off;
        flipped = flipped || kink_pattern(p, x, spot) != base;
      }
      xi = saved;
      if (flipped) {
        ++rep.skipped;
        continue;
      }
      const double numeric = central_difference4(objective, xi, h);
      rep.worst = std::max(rep.worst, relative_error(grads[t][i], numeric));
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace spotlight::testing
