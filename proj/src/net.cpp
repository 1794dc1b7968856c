#include "spotlight/net.hpp"

#include <Eigen/Dense>
#include <cstring>
#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <random>

namespace spotlight {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Columns per im2col block; keeps the block resident in L2.
constexpr std::int64_t kChunkVoxels = 512;
constexpr double kNormEps = 1e-5;

std::atomic<std::uint64_t> next_identity{1};

std::int64_t rows_per_chunk(std::int64_t x) { return std::max<std::int64_t>(1, kChunkVoxels / x); }

// 3x3x3 convolutions gather only the nine (dz, dy) taps per input channel.
// Each x-line is stored with one zero on either side (pitch X + 2), so the
// three dx taps become column offsets 0, 1, 2 of the same block.
template <typename T>
void im2col_same3(const Tensor<T>& in, std::int64_t b, std::int64_t r0, std::int64_t r1,
                  RowMat<T>& col) {
  const Shape3 s = in.spatial;
  const std::int64_t pitch = s.x + 2;
  for (std::int64_t ci = 0; ci < in.c; ++ci) {
    const T* src = in.channel(b, ci);
    for (int dz = 0; dz < 3; ++dz)
      for (int dy = 0; dy < 3; ++dy) {
        T* dst_row = col.row(ci * 9 + dz * 3 + dy).data();
        for (std::int64_t r = r0; r < r1; ++r) {
          const std::int64_t zz = r / s.y + dz - 1;
          const std::int64_t yy = r % s.y + dy - 1;
          T* dst = dst_row + (r - r0) * pitch;
          if (zz < 0 || zz >= s.z || yy < 0 || yy >= s.y) {
            std::fill(dst, dst + pitch, T{0});
          } else {
            dst[0] = T{0};
            std::copy(src + (zz * s.y + yy) * s.x, src + (zz * s.y + yy + 1) * s.x, dst + 1);
            dst[pitch - 1] = T{0};
          }
        }
      }
  }
}

// Zero-padded copy of every channel: one voxel on each z/y side, one on the
// left in x and enough on the right that x-lines split into whole blocks.
template <typename T>
struct PaddedVolume {
  std::vector<T> data;
  std::int64_t pitch = 0, plane = 0, chan = 0;

  PaddedVolume(const Tensor<T>& t, std::int64_t block) {
    const Shape3 s = t.spatial;
    pitch = (s.x + block - 1) / block * block + 2;
    plane = (s.y + 2) * pitch;
    chan = (s.z + 2) * plane;
    data.assign(static_cast<std::size_t>(t.n * t.c * chan), T{0});
    for (std::int64_t b = 0; b < t.n; ++b)
      for (std::int64_t c = 0; c < t.c; ++c) {
        const T* src = t.channel(b, c);
        T* dst = data.data() + (b * t.c + c) * chan;
        for (std::int64_t z = 0; z < s.z; ++z)
          for (std::int64_t y = 0; y < s.y; ++y)
            std::copy(src + (z * s.y + y) * s.x, src + (z * s.y + y + 1) * s.x,
                      dst + (z + 1) * plane + (y + 1) * pitch + 1);
      }
  }
};

// One 64-byte vector of T; the compiler keeps these in registers.
template <typename T>
using Vec [[gnu::vector_size(64)]] = T;
template <typename T>
constexpr int kLanes = 64 / static_cast<int>(sizeof(T));

// OB output channels over NV vectors of one x-line. The accumulators stay in
// registers across all input channels and taps.
template <typename T, int OB, int NV>
void same3_block(const PaddedVolume<T>& in, const T* src, std::int64_t cin, const T* w,
                 Vec<T> (&acc)[OB][NV]) {
  constexpr int L = kLanes<T>;
  for (int o = 0; o < OB; ++o)
    for (int v = 0; v < NV; ++v) acc[o][v] = Vec<T>{} ;
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    const T* base = src + ci * in.chan;
    const T* wc = w + ci * 27;
    for (int k = 0; k < 9; ++k) {
      const T* line = base + (k / 3) * in.plane + (k % 3) * in.pitch;
      for (int dx = 0; dx < 3; ++dx) {
        Vec<T> x[NV];
        for (int v = 0; v < NV; ++v) std::memcpy(&x[v], line + dx + v * L, sizeof(Vec<T>));
        for (int o = 0; o < OB; ++o) {
          const T wv = wc[o * cin * 27 + k * 3 + dx];
          for (int v = 0; v < NV; ++v) acc[o][v] += wv * x[v];
        }
      }
    }
  }
}

template <typename T, int OB, int NV>
void same3_channels(const PaddedVolume<T>& in, std::int64_t b, std::int64_t cin, const T* w,
                    const T* bias, Tensor<T>& out, std::int64_t co0) {
  constexpr int L = kLanes<T>;
  const Shape3 s = out.spatial;
  Vec<T> acc[OB][NV];
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x0 = 0; x0 < s.x; x0 += NV * L) {
        const T* src = in.data.data() + b * cin * in.chan + z * in.plane + y * in.pitch + x0;
        same3_block<T, OB, NV>(in, src, cin, w + co0 * cin * 27, acc);
        const std::int64_t n = std::min<std::int64_t>(NV * L, s.x - x0);
        for (int o = 0; o < OB; ++o) {
          T* dst = out.channel(b, co0 + o) + (z * s.y + y) * s.x + x0;
          const T bo = bias ? bias[co0 + o] : T{0};
          for (std::int64_t i = 0; i < n; ++i) dst[i] = acc[o][i / L][i % L] + bo;
        }
      }
}

// Direct 3x3x3 correlation with weights laid out [out][in][27]. Serves the
// forward pass and, with flipped channel-swapped weights, the input gradient.
template <typename T>
void same3_direct(const Tensor<T>& in, const T* w, const T* bias, Tensor<T>& out) {
  // Narrow channel blocks take two vectors per line for independent FMA chains.
  const PaddedVolume<T> pad(in, 2 * kLanes<T>);
  const std::int64_t cout = out.c;
  for (std::int64_t b = 0; b < in.n; ++b) {
    std::int64_t co = 0;
    for (; co + 8 <= cout; co += 8) same3_channels<T, 8, 1>(pad, b, in.c, w, bias, out, co);
    if (co + 4 <= cout) same3_channels<T, 4, 2>(pad, b, in.c, w, bias, out, co), co += 4;
    if (co + 2 <= cout) same3_channels<T, 2, 2>(pad, b, in.c, w, bias, out, co), co += 2;
    if (co < cout) same3_channels<T, 1, 2>(pad, b, in.c, w, bias, out, co);
  }
}

// im2col for the 2x2x2 stride-2 convolution over output rows [r0, r1).
template <typename T>
void im2col_down2(const Tensor<T>& in, std::int64_t b, std::int64_t r0, std::int64_t r1,
                  const Shape3& os, RowMat<T>& col) {
  const Shape3 s = in.spatial;
  for (std::int64_t ci = 0; ci < in.c; ++ci) {
    const T* src = in.channel(b, ci);
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          T* dst_row = col.row(ci * 8 + dz * 4 + dy * 2 + dx).data();
          for (std::int64_t r = r0; r < r1; ++r) {
            const std::int64_t zi = 2 * (r / os.y) + dz;
            const std::int64_t yi = 2 * (r % os.y) + dy;
            const T* line = src + (zi * s.y + yi) * s.x + dx;
            T* dst = dst_row + (r - r0) * os.x;
            for (std::int64_t x = 0; x < os.x; ++x) dst[x] = line[2 * x];
          }
        }
  }
}

template <typename T>
void col2im_down2(const RowMat<T>& dcol, std::int64_t r0, std::int64_t r1, const Shape3& os,
                  Tensor<T>& dx_t, std::int64_t b) {
  const Shape3 s = dx_t.spatial;
  for (std::int64_t ci = 0; ci < dx_t.c; ++ci) {
    T* dst_ch = dx_t.channel(b, ci);
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const T* src_row = dcol.row(ci * 8 + dz * 4 + dy * 2 + dx).data();
          for (std::int64_t r = r0; r < r1; ++r) {
            const std::int64_t zi = 2 * (r / os.y) + dz;
            const std::int64_t yi = 2 * (r % os.y) + dy;
            T* line = dst_ch + (zi * s.y + yi) * s.x + dx;
            const T* src = src_row + (r - r0) * os.x;
            for (std::int64_t x = 0; x < os.x; ++x) line[2 * x] += src[x];
          }
        }
  }
}

// Transposed-conv weights as a ((out, k) x in) matrix.
template <typename T>
RowMat<T> up_matrix(const ConvLayer<T>& layer) {
  RowMat<T> a(layer.out_channels * 8, layer.in_channels);
  for (int co = 0; co < layer.out_channels; ++co)
    for (int ci = 0; ci < layer.in_channels; ++ci)
      for (int k = 0; k < 8; ++k)
        a(co * 8 + k, ci) = layer.weight[(static_cast<std::size_t>(co) * layer.in_channels + ci) * 8 + k];
  return a;
}

template <typename T>
void check_input(const ConvLayer<T>& layer, const Tensor<T>& in) {
  if (in.c != layer.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "conv expects " + std::to_string(layer.in_channels) +
                                              " channels, got " + std::to_string(in.c));
  }
  if (layer.kind == ConvKind::Down2 &&
      (in.spatial.z % 2 || in.spatial.y % 2 || in.spatial.x % 2)) {
    throw Error(ErrorCode::ShapeMismatch, "stride-2 conv on odd extent " + to_string(in.spatial));
  }
}

Shape3 output_spatial(ConvKind kind, const Shape3& s) {
  switch (kind) {
    case ConvKind::Same3: return s;
    case ConvKind::Down2: return {s.z / 2, s.y / 2, s.x / 2};
    case ConvKind::Up2: return {s.z * 2, s.y * 2, s.x * 2};
  }
  return s;
}

}  // namespace

void NetConfig::validate() const {
  if (base_channels < 1) throw Error(ErrorCode::InvalidConfig, "base_channels must be >= 1");
  if (depth < 0 || depth > 6) throw Error(ErrorCode::InvalidConfig, "depth must be in [0, 6]");
}

int kernel_volume(ConvKind kind) { return kind == ConvKind::Same3 ? 27 : 8; }

template <typename T>
std::vector<std::span<T>> NetParams<T>::trainable() {
  std::vector<std::span<T>> out;
  for (auto& c : convs) {
    out.emplace_back(c.weight);
    out.emplace_back(c.bias);
  }
  for (auto& n : norms) {
    out.emplace_back(n.gamma);
    out.emplace_back(n.beta);
  }
  return out;
}

template <typename T>
std::vector<std::span<const T>> NetParams<T>::trainable() const {
  std::vector<std::span<const T>> out;
  for (const auto& c : convs) {
    out.emplace_back(c.weight);
    out.emplace_back(c.bias);
  }
  for (const auto& n : norms) {
    out.emplace_back(n.gamma);
    out.emplace_back(n.beta);
  }
  return out;
}

template <typename T>
std::size_t NetParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto s : trainable()) n += s.size();
  return n;
}

template <typename T>
NetParams<T> make_net(const NetConfig& cfg) {
  cfg.validate();
  NetParams<T> p;
  p.config = cfg;
  p.identity = next_identity.fetch_add(1);
  p.levels.resize(static_cast<std::size_t>(cfg.depth) + 1);

  auto add_conv = [&](ConvKind kind, int cin, int cout) {
    ConvLayer<T> c;
    c.kind = kind;
    c.in_channels = cin;
    c.out_channels = cout;
    c.weight.assign(static_cast<std::size_t>(cin) * cout * kernel_volume(kind), T{0});
    c.bias.assign(static_cast<std::size_t>(cout), T{0});
    p.convs.push_back(std::move(c));
    return static_cast<int>(p.convs.size()) - 1;
  };
  auto add_norm = [&](int channels) {
    if (!cfg.batch_norm) return -1;
    NormLayer<T> n;
    n.channels = channels;
    n.gamma.assign(channels, T{1});
    n.beta.assign(channels, T{0});
    n.running_mean.assign(channels, T{0});
    n.running_var.assign(channels, T{1});
    p.norms.push_back(std::move(n));
    return static_cast<int>(p.norms.size()) - 1;
  };

  // Encoder path, top to bottom.
  for (int l = 0; l <= cfg.depth; ++l) {
    auto& lv = p.levels[l];
    const int cin = l == 0 ? 1 : cfg.channels_at(l);
    lv.enc_conv = add_conv(ConvKind::Same3, cin, cfg.channels_at(l));
    lv.enc_norm = add_norm(cfg.channels_at(l));
    if (l < cfg.depth) {
      lv.down_conv = add_conv(ConvKind::Down2, cfg.channels_at(l), cfg.channels_at(l + 1));
      lv.down_norm = add_norm(cfg.channels_at(l + 1));
    }
  }
  // Decoder path, bottom to top.
  for (int l = cfg.depth - 1; l >= 0; --l) {
    auto& lv = p.levels[l];
    lv.up_conv = add_conv(ConvKind::Up2, cfg.channels_at(l + 1), cfg.channels_at(l));
    lv.up_norm = add_norm(cfg.channels_at(l));
    lv.dec_conv = add_conv(ConvKind::Same3, 2 * cfg.channels_at(l), cfg.channels_at(l));
    lv.dec_norm = add_norm(cfg.channels_at(l));
  }
  p.final_conv = add_conv(ConvKind::Same3, cfg.channels_at(0), 1);
  return p;
}

template <typename T>
NetParams<T> init_net(const NetConfig& cfg, std::uint64_t seed) {
  NetParams<T> p = make_net<T>(cfg);
  std::mt19937_64 rng(seed);
  for (auto& c : p.convs) {
    const int fan_in = c.kind == ConvKind::Up2 ? c.in_channels : c.in_channels * kernel_volume(c.kind);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : c.weight) w = static_cast<T>(dist(rng));
  }
  return p;
}

template <typename To, typename From>
NetParams<To> convert_params(const NetParams<From>& p) {
  auto cast = [](const std::vector<From>& v) {
    return std::vector<To>(v.begin(), v.end());
  };
  NetParams<To> out;
  out.config = p.config;
  out.levels = p.levels;
  out.final_conv = p.final_conv;
  out.identity = next_identity.fetch_add(1);
  for (const auto& c : p.convs) {
    out.convs.push_back({c.kind, c.in_channels, c.out_channels, cast(c.weight), cast(c.bias)});
  }
  for (const auto& n : p.norms) {
    out.norms.push_back(
        {n.channels, cast(n.gamma), cast(n.beta), cast(n.running_mean), cast(n.running_var)});
  }
  return out;
}

template <typename T>
Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& in) {
  check_input(layer, in);
  const Shape3 os = output_spatial(layer.kind, in.spatial);
  Tensor<T> out(in.n, layer.out_channels, os);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(layer.bias.data(),
                                                                   layer.out_channels);
  if (layer.kind == ConvKind::Up2) {
    const RowMat<T> a = up_matrix(layer);
    const Shape3 is = in.spatial;
    const std::int64_t rpc = rows_per_chunk(is.x);
    RowMat<T> y(a.rows(), rpc * is.x);
    for (std::int64_t b = 0; b < in.n; ++b) {
      for (std::int64_t r0 = 0; r0 < is.z * is.y; r0 += rpc) {
        const std::int64_t r1 = std::min(r0 + rpc, is.z * is.y);
        const std::int64_t len = (r1 - r0) * is.x;
        ConstStridedMap<T> x(in.channel(b, 0) + r0 * is.x, in.c, len,
                             Eigen::OuterStride<>(in.voxels()));
        y.leftCols(len).noalias() = a * x;
        for (int co = 0; co < layer.out_channels; ++co) {
          T* dst = out.channel(b, co);
          for (int k = 0; k < 8; ++k) {
            const int dz = k / 4, dy = (k / 2) % 2, dx = k % 2;
            const T* src = y.row(co * 8 + k).data();
            for (std::int64_t r = r0; r < r1; ++r) {
              const std::int64_t zo = 2 * (r / is.y) + dz;
              const std::int64_t yo = 2 * (r % is.y) + dy;
              T* line = dst + (zo * os.y + yo) * os.x + dx;
              const T* s = src + (r - r0) * is.x;
              for (std::int64_t x0 = 0; x0 < is.x; ++x0) line[2 * x0] = s[x0] + layer.bias[co];
            }
          }
        }
      }
    }
    return out;
  }

  if (layer.kind == ConvKind::Same3) {
    same3_direct(in, layer.weight.data(), layer.bias.data(), out);
    return out;
  }

  const std::int64_t K = static_cast<std::int64_t>(layer.in_channels) * kernel_volume(layer.kind);
  const Eigen::Map<const RowMat<T>> w(layer.weight.data(), layer.out_channels, K);
  const std::int64_t rpc = rows_per_chunk(os.x);
  RowMat<T> col(K, rpc * os.x);
  for (std::int64_t b = 0; b < in.n; ++b) {
    for (std::int64_t r0 = 0; r0 < os.z * os.y; r0 += rpc) {
      const std::int64_t r1 = std::min(r0 + rpc, os.z * os.y);
      const std::int64_t len = (r1 - r0) * os.x;
      im2col_down2(in, b, r0, r1, os, col);
      StridedMap<T> o(out.channel(b, 0) + r0 * os.x, layer.out_channels, len,
                      Eigen::OuterStride<>(out.voxels()));
      o.noalias() = w * col.leftCols(len);
      o.colwise() += bias;
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv_backward(const ConvLayer<T>& layer, const Tensor<T>& in, const Tensor<T>& grad_out,
                        std::vector<T>& grad_weight, std::vector<T>& grad_bias,
                        bool need_input_grad) {
  check_input(layer, in);
  const Shape3 os = output_spatial(layer.kind, in.spatial);
  if (grad_out.n != in.n || grad_out.c != layer.out_channels || !(grad_out.spatial == os)) {
    throw Error(ErrorCode::ShapeMismatch, "conv gradient does not match layer output");
  }
  grad_weight.resize(layer.weight.size(), T{0});
  grad_bias.resize(layer.bias.size(), T{0});
  Tensor<T> dx;
  if (need_input_grad) dx = Tensor<T>(in.n, in.c, in.spatial);

  for (int co = 0; co < layer.out_channels; ++co) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < grad_out.n; ++b) {
      const T* g = grad_out.channel(b, co);
      for (std::int64_t i = 0; i < grad_out.voxels(); ++i) acc += g[i];
    }
    grad_bias[co] += static_cast<T>(acc);
  }

  if (layer.kind == ConvKind::Up2) {
    const RowMat<T> a = up_matrix(layer);
    RowMat<T> da = RowMat<T>::Zero(a.rows(), a.cols());
    const Shape3 is = in.spatial;
    const std::int64_t rpc = rows_per_chunk(is.x);
    RowMat<T> dy(a.rows(), rpc * is.x);
    for (std::int64_t b = 0; b < in.n; ++b) {
      for (std::int64_t r0 = 0; r0 < is.z * is.y; r0 += rpc) {
        const std::int64_t r1 = std::min(r0 + rpc, is.z * is.y);
        const std::int64_t len = (r1 - r0) * is.x;
        for (int co = 0; co < layer.out_channels; ++co) {
          const T* src_ch = grad_out.channel(b, co);
          for (int k = 0; k < 8; ++k) {
            const int dz = k / 4, dyo = (k / 2) % 2, dxo = k % 2;
            T* dst = dy.row(co * 8 + k).data();
            for (std::int64_t r = r0; r < r1; ++r) {
              const std::int64_t zo = 2 * (r / is.y) + dz;
              const std::int64_t yo = 2 * (r % is.y) + dyo;
              const T* line = src_ch + (zo * os.y + yo) * os.x + dxo;
              T* d = dst + (r - r0) * is.x;
              for (std::int64_t x0 = 0; x0 < is.x; ++x0) d[x0] = line[2 * x0];
            }
          }
        }
        ConstStridedMap<T> x(in.channel(b, 0) + r0 * is.x, in.c, len,
                             Eigen::OuterStride<>(in.voxels()));
        da.noalias() += dy.leftCols(len) * x.transpose();
        if (need_input_grad) {
          StridedMap<T> dxm(dx.channel(b, 0) + r0 * is.x, in.c, len,
                            Eigen::OuterStride<>(in.voxels()));
          dxm.noalias() = a.transpose() * dy.leftCols(len);
        }
      }
    }
    for (int co = 0; co < layer.out_channels; ++co)
      for (int ci = 0; ci < layer.in_channels; ++ci)
        for (int k = 0; k < 8; ++k)
          grad_weight[(static_cast<std::size_t>(co) * layer.in_channels + ci) * 8 + k] += da(co * 8 + k, ci);
    return dx;
  }

  if (layer.kind == ConvKind::Same3) {
    const int cin = layer.in_channels;
    std::array<RowMat<T>, 3> dw;
    for (auto& m : dw) m = RowMat<T>::Zero(layer.out_channels, cin * 9);
    const std::int64_t pitch = os.x + 2;
    const std::int64_t rpc = rows_per_chunk(pitch);
    RowMat<T> col(static_cast<std::int64_t>(cin) * 9, rpc * pitch);
    RowMat<T> g = RowMat<T>::Zero(layer.out_channels, rpc * pitch);
    for (std::int64_t b = 0; b < in.n; ++b) {
      for (std::int64_t r0 = 0; r0 < os.z * os.y; r0 += rpc) {
        const std::int64_t r1 = std::min(r0 + rpc, os.z * os.y);
        const std::int64_t span = (r1 - r0) * pitch - 2;
        im2col_same3(in, b, r0, r1, col);
        // Upstream gradient on the padded pitch; pad columns stay zero.
        for (int co = 0; co < layer.out_channels; ++co) {
          const T* src = grad_out.channel(b, co) + r0 * os.x;
          T* dst = g.row(co).data();
          for (std::int64_t r = 0; r < r1 - r0; ++r)
            std::copy(src + r * os.x, src + (r + 1) * os.x, dst + r * pitch);
        }
        for (int dx = 0; dx < 3; ++dx) {
          dw[dx].noalias() += g.leftCols(span) * col.middleCols(dx, span).transpose();
        }
      }
    }
    for (int co = 0; co < layer.out_channels; ++co)
      for (int ci = 0; ci < cin; ++ci)
        for (int t = 0; t < 9; ++t)
          for (int d = 0; d < 3; ++d)
            grad_weight[(static_cast<std::size_t>(co) * cin + ci) * 27 + t * 3 + d] += dw[d](co, ci * 9 + t);
    if (need_input_grad) {
      // Input gradient is the correlation of grad_out with the flipped kernel.
      std::vector<T> flipped(layer.weight.size());
      for (int co = 0; co < layer.out_channels; ++co)
        for (int ci = 0; ci < cin; ++ci)
          for (int k = 0; k < 27; ++k)
            flipped[(static_cast<std::size_t>(ci) * layer.out_channels + co) * 27 + 26 - k] =
                layer.weight[(static_cast<std::size_t>(co) * cin + ci) * 27 + k];
      same3_direct<T>(grad_out, flipped.data(), nullptr, dx);
    }
    return dx;
  }

  const std::int64_t K = static_cast<std::int64_t>(layer.in_channels) * kernel_volume(layer.kind);
  const RowMat<T> wt = Eigen::Map<const RowMat<T>>(layer.weight.data(), layer.out_channels, K).transpose();
  Eigen::Map<RowMat<T>> dw(grad_weight.data(), layer.out_channels, K);
  const std::int64_t rpc = rows_per_chunk(os.x);
  RowMat<T> col(K, rpc * os.x);
  RowMat<T> dcol;
  if (need_input_grad) dcol.resize(K, rpc * os.x);
  for (std::int64_t b = 0; b < in.n; ++b) {
    for (std::int64_t r0 = 0; r0 < os.z * os.y; r0 += rpc) {
      const std::int64_t r1 = std::min(r0 + rpc, os.z * os.y);
      const std::int64_t len = (r1 - r0) * os.x;
      im2col_down2(in, b, r0, r1, os, col);
      ConstStridedMap<T> gm(grad_out.channel(b, 0) + r0 * os.x, layer.out_channels, len,
                            Eigen::OuterStride<>(grad_out.voxels()));
      dw.noalias() += gm * col.leftCols(len).transpose();
      if (need_input_grad) {
        dcol.leftCols(len).noalias() = wt * gm;
        col2im_down2(dcol, r0, r1, os, dx, b);
      }
    }
  }
  return dx;
}

namespace {

// Sum of term(i) over [0, n) with eight interleaved double accumulators,
// combined in a fixed order so results do not depend on vectorization.
template <typename F>
double lane_sum(std::int64_t n, F term) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += term(i + l);
  for (; i < n; ++i) acc[i % 8] += term(i);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <typename T>
void norm_forward(const NormLayer<T>& layer, Tensor<T>& x, Mode mode, NormCache<T>* cache) {
  const std::int64_t v = x.voxels();
  const double count = static_cast<double>(x.n * v);
  if (cache) {
    cache->xhat.resize(x.size());
    cache->inv_std.assign(x.c, 0.0);
    cache->batch_mean.assign(x.c, 0.0);
    cache->batch_var.assign(x.c, 0.0);
  }
  for (std::int64_t ch = 0; ch < x.c; ++ch) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Training) {
      for (std::int64_t b = 0; b < x.n; ++b) {
        const T* p = x.channel(b, ch);
        mean += lane_sum(v, [p](std::int64_t i) { return static_cast<double>(p[i]); });
      }
      mean /= count;
      for (std::int64_t b = 0; b < x.n; ++b) {
        const T* p = x.channel(b, ch);
        var += lane_sum(v, [p, mean](std::int64_t i) {
          const double d = p[i] - mean;
          return d * d;
        });
      }
      var /= count;
    } else {
      mean = layer.running_mean[ch];
      var = layer.running_var[ch];
    }
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    const double gamma = layer.gamma[ch];
    const double beta = layer.beta[ch];
    for (std::int64_t b = 0; b < x.n; ++b) {
      T* p = x.channel(b, ch);
      T* xh = cache ? cache->xhat.data() + (b * x.c + ch) * v : nullptr;
      for (std::int64_t i = 0; i < v; ++i) {
        const double h = (p[i] - mean) * inv;
        if (xh) xh[i] = static_cast<T>(h);
        p[i] = static_cast<T>(gamma * h + beta);
      }
    }
    if (cache) {
      cache->inv_std[ch] = inv;
      cache->batch_mean[ch] = mean;
      cache->batch_var[ch] = var;
    }
  }
}

template <typename T>
void norm_backward(const NormLayer<T>& layer, const NormCache<T>& cache, Tensor<T>& grad,
                   std::vector<T>& dgamma, std::vector<T>& dbeta) {
  const std::int64_t v = grad.voxels();
  const double count = static_cast<double>(grad.n * v);
  dgamma.resize(layer.channels, T{0});
  dbeta.resize(layer.channels, T{0});
  for (std::int64_t ch = 0; ch < grad.c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::int64_t b = 0; b < grad.n; ++b) {
      const T* g = grad.channel(b, ch);
      const T* xh = cache.xhat.data() + (b * grad.c + ch) * v;
      sum_dy += lane_sum(v, [g](std::int64_t i) { return static_cast<double>(g[i]); });
      sum_dy_xhat += lane_sum(v, [g, xh](std::int64_t i) { return static_cast<double>(g[i]) * xh[i]; });
    }
    dgamma[ch] += static_cast<T>(sum_dy_xhat);
    dbeta[ch] += static_cast<T>(sum_dy);
    const double scale = layer.gamma[ch] * cache.inv_std[ch] / count;
    for (std::int64_t b = 0; b < grad.n; ++b) {
      T* g = grad.channel(b, ch);
      const T* xh = cache.xhat.data() + (b * grad.c + ch) * v;
      for (std::int64_t i = 0; i < v; ++i) {
        g[i] = static_cast<T>(scale * (count * g[i] - sum_dy - xh[i] * sum_dy_xhat));
      }
    }
  }
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.n, a.c + b.c, a.spatial);
  const std::int64_t v = a.voxels();
  for (std::int64_t n = 0; n < a.n; ++n) {
    std::copy(a.channel(n, 0), a.channel(n, 0) + a.c * v, out.channel(n, 0));
    std::copy(b.channel(n, 0), b.channel(n, 0) + b.c * v, out.channel(n, a.c));
  }
  return out;
}

template <typename T>
class Runner {
 public:
  Runner(const NetParams<T>& p, Mode mode, ForwardCache<T>* cache)
      : p_(p), mode_(mode), cache_(cache) {}

  Tensor<T> stage(int conv, int norm, const Tensor<T>& x) {
    Tensor<T> z = conv_forward(p_.convs[conv], x);
    if (cache_) cache_->conv_in[conv] = x;
    if (norm >= 0) norm_forward(p_.norms[norm], z, mode_, cache_ ? &cache_->norm[norm] : nullptr);
    for (auto& e : z.data) e = e > T{0} ? e : T{0};
    if (cache_) cache_->act[conv] = z;
    return z;
  }

  Tensor<T> level(int l, const Tensor<T>& x) {
    const LevelPlan& lv = p_.levels[l];
    Tensor<T> a = stage(lv.enc_conv, lv.enc_norm, x);
    if (l == p_.config.depth) return a;
    Tensor<T> d = stage(lv.down_conv, lv.down_norm, a);
    Tensor<T> inner = level(l + 1, d);
    Tensor<T> u = stage(lv.up_conv, lv.up_norm, inner);
    return stage(lv.dec_conv, lv.dec_norm, concat_channels(a, u));
  }

 private:
  const NetParams<T>& p_;
  Mode mode_;
  ForwardCache<T>* cache_;
};

template <typename T>
class BackRunner {
 public:
  BackRunner(const NetParams<T>& p, const ForwardCache<T>& c, ParamGrads<T>& g)
      : p_(p), c_(c), g_(g) {}

  std::size_t weight_slot(int conv) const { return 2 * static_cast<std::size_t>(conv); }
  std::size_t gamma_slot(int norm) const { return 2 * (p_.convs.size() + norm); }

  Tensor<T> stage(int conv, int norm, Tensor<T> dy, bool need_input) {
    const Tensor<T>& act = c_.act[conv];
    for (std::size_t i = 0; i < dy.data.size(); ++i) {
      if (!(act.data[i] > T{0})) dy.data[i] = T{0};
    }
    if (norm >= 0) {
      norm_backward(p_.norms[norm], c_.norm[norm], dy, g_[gamma_slot(norm)],
                    g_[gamma_slot(norm) + 1]);
    }
    return conv_backward(p_.convs[conv], c_.conv_in[conv], dy, g_[weight_slot(conv)],
                         g_[weight_slot(conv) + 1], need_input);
  }

  Tensor<T> level(int l, Tensor<T> dy, bool need_input) {
    const LevelPlan& lv = p_.levels[l];
    if (l == p_.config.depth) return stage(lv.enc_conv, lv.enc_norm, std::move(dy), need_input);
    Tensor<T> dc = stage(lv.dec_conv, lv.dec_norm, std::move(dy), true);
    const std::int64_t ca = p_.convs[lv.enc_conv].out_channels;
    Tensor<T> da(dc.n, ca, dc.spatial);
    Tensor<T> du(dc.n, dc.c - ca, dc.spatial);
    const std::int64_t v = dc.voxels();
    for (std::int64_t n = 0; n < dc.n; ++n) {
      std::copy(dc.channel(n, 0), dc.channel(n, 0) + ca * v, da.channel(n, 0));
      std::copy(dc.channel(n, ca), dc.channel(n, ca) + du.c * v, du.channel(n, 0));
    }
    Tensor<T> dinner = stage(lv.up_conv, lv.up_norm, std::move(du), true);
    Tensor<T> dd = level(l + 1, std::move(dinner), true);
    Tensor<T> da2 = stage(lv.down_conv, lv.down_norm, std::move(dd), true);
    for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] += da2.data[i];
    return stage(lv.enc_conv, lv.enc_norm, std::move(da), need_input);
  }

 private:
  const NetParams<T>& p_;
  const ForwardCache<T>& c_;
  ParamGrads<T>& g_;
};

}  // namespace

template <typename T>
ForwardResult<T> forward(const NetParams<T>& params, const Tensor<T>& input, Mode mode,
                         bool keep_cache) {
  if (input.c != 1) throw Error(ErrorCode::ShapeMismatch, "network input must have one channel");
  const std::int64_t d = params.config.divisor();
  if (input.spatial.z % d || input.spatial.y % d || input.spatial.x % d || input.n < 1) {
    throw Error(ErrorCode::ShapeMismatch, "input extent " + to_string(input.spatial) +
                                              " not divisible by " + std::to_string(d));
  }
  ForwardResult<T> r;
  ForwardCache<T>* cache = keep_cache ? &r.cache : nullptr;
  if (cache) {
    cache->identity = params.identity;
    cache->generation = params.generation;
    cache->mode = mode;
    cache->input = input;
    cache->conv_in.resize(params.convs.size());
    cache->act.resize(params.convs.size());
    cache->norm.resize(params.norms.size());
  }
  Runner<T> run(params, mode, cache);
  Tensor<T> h = run.level(0, input);
  r.prediction = conv_forward(params.convs[params.final_conv], h);
  if (cache) {
    cache->conv_in[params.final_conv] = std::move(h);
    cache->valid = true;
  }
  return r;
}

template <typename T>
ParamGrads<T> backward(const NetParams<T>& params, const ForwardCache<T>& cache,
                       const Tensor<T>& grad_output) {
  if (!cache.valid || cache.mode != Mode::Training) {
    throw Error(ErrorCode::InvalidCache, "backward needs a training-mode forward cache");
  }
  if (cache.identity != params.identity || cache.generation != params.generation) {
    throw Error(ErrorCode::InvalidCache, "parameters changed since the forward pass");
  }
  const Tensor<T>& h = cache.conv_in[params.final_conv];
  if (grad_output.n != h.n || grad_output.c != 1 || !(grad_output.spatial == h.spatial)) {
    throw Error(ErrorCode::ShapeMismatch, "grad_output does not match the prediction");
  }
  ParamGrads<T> g;
  for (auto s : params.trainable()) g.emplace_back(s.size(), T{0});
  BackRunner<T> run(params, cache, g);
  const int fc = params.final_conv;
  Tensor<T> dh = conv_backward(params.convs[fc], h, grad_output, g[2 * fc], g[2 * fc + 1], true);
  run.level(0, std::move(dh), false);
  return g;
}

template <typename T>
void update_running_stats(NetParams<T>& params, const ForwardCache<T>& cache, double momentum) {
  if (!cache.valid || cache.mode != Mode::Training) return;
  for (std::size_t j = 0; j < params.norms.size(); ++j) {
    auto& n = params.norms[j];
    const auto& c = cache.norm[j];
    for (int ch = 0; ch < n.channels; ++ch) {
      n.running_mean[ch] =
          static_cast<T>((1.0 - momentum) * n.running_mean[ch] + momentum * c.batch_mean[ch]);
      n.running_var[ch] =
          static_cast<T>((1.0 - momentum) * n.running_var[ch] + momentum * c.batch_var[ch]);
    }
  }
}

#define SPOTLIGHT_INSTANTIATE_NET(T)                                                          \
  template struct NetParams<T>;                                                              \
  template NetParams<T> make_net<T>(const NetConfig&);                                       \
  template NetParams<T> init_net<T>(const NetConfig&, std::uint64_t);                        \
  template ForwardResult<T> forward(const NetParams<T>&, const Tensor<T>&, Mode, bool);     \
  template ParamGrads<T> backward(const NetParams<T>&, const ForwardCache<T>&,               \
                                  const Tensor<T>&);                                         \
  template void update_running_stats(NetParams<T>&, const ForwardCache<T>&, double);        \
  template Tensor<T> conv_forward(const ConvLayer<T>&, const Tensor<T>&);                    \
  template Tensor<T> conv_backward(const ConvLayer<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                   std::vector<T>&, std::vector<T>&, bool);

SPOTLIGHT_INSTANTIATE_NET(float)
SPOTLIGHT_INSTANTIATE_NET(double)

#undef SPOTLIGHT_INSTANTIATE_NET

template NetParams<double> convert_params<double, float>(const NetParams<float>&);
template NetParams<float> convert_params<float, double>(const NetParams<double>&);
template NetParams<float> convert_params<float, float>(const NetParams<float>&);

}  // namespace spotlight
