#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

/// Batch of multi-channel volumes, layout [n][c][z][y][x].
template <typename T>
struct Tensor {
  std::int64_t n = 0;
  std::int64_t c = 0;
  Shape3 spatial{};
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::int64_t batch, std::int64_t channels, Shape3 s, T fill = T{})
      : n(batch), c(channels), spatial(s),
        data(static_cast<std::size_t>(batch * channels * s.voxels()), fill) {}

  std::int64_t voxels() const { return spatial.voxels(); }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  T* channel(std::int64_t b, std::int64_t ch) { return data.data() + (b * c + ch) * voxels(); }
  const T* channel(std::int64_t b, std::int64_t ch) const {
    return data.data() + (b * c + ch) * voxels();
  }

  bool same_layout(const Tensor& o) const { return n == o.n && c == o.c && spatial == o.spatial; }
};

/// Stacks single-channel volumes into an [n][1] tensor.
template <typename T, typename V>
Tensor<T> stack_volumes(std::span<const Grid<V>> volumes) {
  if (volumes.empty()) return {};
  Tensor<T> t(static_cast<std::int64_t>(volumes.size()), 1, volumes.front().shape());
  for (std::size_t b = 0; b < volumes.size(); ++b) {
    require_same_shape(volumes[b], volumes.front(), "stack_volumes");
    T* dst = t.channel(static_cast<std::int64_t>(b), 0);
    for (std::size_t i = 0; i < volumes[b].size(); ++i) dst[i] = static_cast<T>(volumes[b][i]);
  }
  return t;
}

template <typename V, typename T>
Grid<V> unstack_volume(const Tensor<T>& t, std::int64_t b, std::int64_t ch = 0,
                       Spacing3 voxel_size = {}) {
  Grid<V> out(t.spatial, V{}, voxel_size);
  const T* src = t.channel(b, ch);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<V>(src[i]);
  return out;
}

}  // namespace spotlight
