#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spotlight/error.hpp"

namespace spotlight {

/// Voxel counts in Z, Y, X order.
struct Shape3 {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;

  std::int64_t voxels() const { return z * y * x; }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

/// Physical voxel size in micrometers, Z, Y, X order.
struct Spacing3 {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  bool operator==(const Spacing3&) const = default;
};

/// Dense 3D scalar field stored Z-major / X-minor.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  explicit Grid(Shape3 shape, T fill = T{}, Spacing3 voxel_size = {})
      : shape_(shape), voxel_size_(voxel_size) {
    validate_shape_and_spacing();
    data_.assign(static_cast<std::size_t>(shape_.voxels()), fill);
  }

  Grid(Shape3 shape, std::vector<T> data, Spacing3 voxel_size = {})
      : shape_(shape), voxel_size_(voxel_size), data_(std::move(data)) {
    validate_shape_and_spacing();
    if (static_cast<std::int64_t>(data_.size()) != shape_.voxels()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "data length " + std::to_string(data_.size()) + " does not match shape " +
                      to_string(shape_));
    }
  }

  const Shape3& shape() const { return shape_; }
  const Spacing3& voxel_size() const { return voxel_size_; }
  void set_voxel_size(Spacing3 s) {
    voxel_size_ = s;
    validate_shape_and_spacing();
  }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::int64_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return (z * shape_.y + y) * shape_.x + x;
  }

  T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) { return data_[index(z, y, x)]; }
  const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data_[index(z, y, x)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Grid&) const = default;

 private:
  void validate_shape_and_spacing() const {
    if (shape_.z < 0 || shape_.y < 0 || shape_.x < 0) {
      throw Error(ErrorCode::ShapeMismatch, "negative extent in shape " + to_string(shape_));
    }
    if (!(voxel_size_.z > 0 && voxel_size_.y > 0 && voxel_size_.x > 0)) {
      throw Error(ErrorCode::ShapeMismatch, "voxel sizes must be strictly positive");
    }
  }

  Shape3 shape_{};
  Spacing3 voxel_size_{};
  std::vector<T> data_;
};

using Volume = Grid<float>;
using VolumeD = Grid<double>;
using MaskVolume = Grid<std::uint8_t>;
using LabelVolume = Grid<std::uint32_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + to_string(a.shape()) +
                                              " vs " + to_string(b.shape()));
  }
}

template <typename To, typename From>
Grid<To> grid_cast(const Grid<From>& g) {
  std::vector<To> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<To>(g[i]);
  return Grid<To>(g.shape(), std::move(out), g.voxel_size());
}

// Container I/O. `path` names the raw payload (`name.vol`); the text header
// lives next to it at `name.vol.hdr`.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);
void save_labels(const LabelVolume& v, const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);

std::filesystem::path header_path(const std::filesystem::path& payload);

/// Corner-anchored crop so every extent is a multiple of `m`.
template <typename T>
Grid<T> crop_to_multiple(const Grid<T>& v, std::int64_t m = 16);

/// 2x2x2 mean pooling; voxel size doubles per axis.
Volume downscale_half(const Volume& v);

/// Nearest-neighbour 2x upsampling, the inverse layout of downscale_half.
template <typename T>
Grid<T> upsample_double(const Grid<T>& v);

template <typename T>
Grid<T> extract_patch(const Grid<T>& v, Shape3 origin, Shape3 size);

// ---- template definitions ----

template <typename T>
Grid<T> extract_patch(const Grid<T>& v, Shape3 origin, Shape3 size) {
  const Shape3& s = v.shape();
  const bool ok = origin.z >= 0 && origin.y >= 0 && origin.x >= 0 && size.z >= 0 &&
                  size.y >= 0 && size.x >= 0 && origin.z + size.z <= s.z &&
                  origin.y + size.y <= s.y && origin.x + size.x <= s.x;
  if (!ok) {
    throw Error(ErrorCode::OutOfBounds, "patch at " + to_string(origin) + " of size " +
                                            to_string(size) + " exceeds " + to_string(s));
  }
  Grid<T> out(size, T{}, v.voxel_size());
  for (std::int64_t z = 0; z < size.z; ++z) {
    for (std::int64_t y = 0; y < size.y; ++y) {
      const T* src = &v(origin.z + z, origin.y + y, origin.x);
      T* dst = &out(z, y, 0);
      std::copy(src, src + size.x, dst);
    }
  }
  return out;
}

template <typename T>
Grid<T> crop_to_multiple(const Grid<T>& v, std::int64_t m) {
  if (m <= 0) throw Error(ErrorCode::InvalidConfig, "crop multiple must be positive");
  const Shape3& s = v.shape();
  if (s.z < m || s.y < m || s.x < m) {
    throw Error(ErrorCode::TooSmall,
                to_string(s) + " has an extent below the crop multiple " + std::to_string(m));
  }
  return extract_patch(v, Shape3{0, 0, 0}, Shape3{s.z / m * m, s.y / m * m, s.x / m * m});
}

template <typename T>
Grid<T> upsample_double(const Grid<T>& v) {
  const Shape3& s = v.shape();
  const Spacing3& vs = v.voxel_size();
  Grid<T> out(Shape3{2 * s.z, 2 * s.y, 2 * s.x}, T{}, Spacing3{vs.z / 2, vs.y / 2, vs.x / 2});
  for (std::int64_t z = 0; z < out.shape().z; ++z)
    for (std::int64_t y = 0; y < out.shape().y; ++y)
      for (std::int64_t x = 0; x < out.shape().x; ++x) out(z, y, x) = v(z / 2, y / 2, x / 2);
  return out;
}

}  // namespace spotlight
