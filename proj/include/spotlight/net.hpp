#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spotlight/tensor.hpp"

namespace spotlight {

/// Miniature encoder-decoder. Each level doubles the channel count; depth
/// counts the stride-2 down/up pairs.
struct NetConfig {
  int base_channels = 8;
  int depth = 1;
  bool batch_norm = true;

  int channels_at(int level) const { return base_channels << level; }
  std::int64_t divisor() const { return std::int64_t{1} << depth; }
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

enum class ConvKind { Same3, Down2, Up2 };

int kernel_volume(ConvKind kind);

/// Weight layout [out][in][kernel offset]; kernel offsets run z-major.
template <typename T>
struct ConvLayer {
  ConvKind kind = ConvKind::Same3;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<T> weight;
  std::vector<T> bias;
};

template <typename T>
struct NormLayer {
  int channels = 0;
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

/// Layer indices for one resolution level; -1 where absent.
struct LevelPlan {
  int enc_conv = -1, enc_norm = -1;
  int down_conv = -1, down_norm = -1;
  int up_conv = -1, up_norm = -1;
  int dec_conv = -1, dec_norm = -1;
};

template <typename T>
struct NetParams {
  NetConfig config;
  std::vector<ConvLayer<T>> convs;  // declaration (= execution) order
  std::vector<NormLayer<T>> norms;
  std::vector<LevelPlan> levels;
  int final_conv = -1;

  // Bumped whenever trainable values change through the optimizer.
  std::uint64_t generation = 0;
  std::uint64_t identity = 0;

  /// Trainable tensors in declaration order: per conv (weight, bias), then per
  /// norm (gamma, beta).
  std::vector<std::span<T>> trainable();
  std::vector<std::span<const T>> trainable() const;
  std::size_t parameter_count() const;
};

/// Zero-initialized structure for `cfg`, no randomness.
template <typename T>
NetParams<T> make_net(const NetConfig& cfg);

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, unit BN scale.
template <typename T>
NetParams<T> init_net(const NetConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
NetParams<To> convert_params(const NetParams<From>& p);

enum class Mode { Training, Inference };

template <typename T>
struct NormCache {
  std::vector<T> xhat;      // normalized pre-activation, [n][c][v]
  std::vector<double> inv_std;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;  // biased
};

template <typename T>
struct ForwardCache {
  std::uint64_t identity = 0;
  std::uint64_t generation = 0;
  Mode mode = Mode::Training;
  bool valid = false;
  Tensor<T> input;
  // Per conv layer: its input activation and its raw output (before norm).
  std::vector<Tensor<T>> conv_in;
  // Per norm layer.
  std::vector<NormCache<T>> norm;
  // Per conv layer followed by ReLU: the post-ReLU activation.
  std::vector<Tensor<T>> act;
};

template <typename T>
struct ForwardResult {
  Tensor<T> prediction;
  ForwardCache<T> cache;
};

/// One gradient buffer per entry of NetParams::trainable().
template <typename T>
using ParamGrads = std::vector<std::vector<T>>;

template <typename T>
ForwardResult<T> forward(const NetParams<T>& params, const Tensor<T>& input,
                         Mode mode = Mode::Training, bool keep_cache = true);

template <typename T>
ParamGrads<T> backward(const NetParams<T>& params, const ForwardCache<T>& cache,
                       const Tensor<T>& grad_output);

/// Folds a training-mode forward's batch statistics into the running averages.
template <typename T>
void update_running_stats(NetParams<T>& params, const ForwardCache<T>& cache,
                          double momentum = 0.1);

// Raw layer kernels, exposed for tests.
template <typename T>
Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& in);

/// Accumulates weight and bias gradients; returns the input gradient when
/// `need_input_grad`.
template <typename T>
Tensor<T> conv_backward(const ConvLayer<T>& layer, const Tensor<T>& in, const Tensor<T>& grad_out,
                        std::vector<T>& grad_weight, std::vector<T>& grad_bias,
                        bool need_input_grad);

}  // namespace spotlight
