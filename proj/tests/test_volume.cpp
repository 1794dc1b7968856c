#include <fstream>

#include "doctest.h"
#include "spotlight/volume.hpp"
#include "support.hpp"

using namespace spotlight;

namespace {

Volume ramp(Shape3 s) {
  Volume v(s, 0.0f, Spacing3{0.5, 0.29, 0.29});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.25f - 3.0f;
  return v;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("save then load is the identity") {
  auto dir = spotlight::testing::scratch_dir("volume_io");
  const Volume v = ramp({2, 3, 4});
  save_volume(v, dir / "ramp.vol");
  const Volume back = load_volume(dir / "ramp.vol");
  CHECK(back == v);
  CHECK(back.voxel_size() == v.voxel_size());

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Shape3 s{1 + trial % 3, 2 + trial % 5, 3 + trial % 4};
    Volume r = spotlight::testing::random_grid(s, rng, -1e6, 1e6);
    r.set_voxel_size({0.1 * (trial + 1), 1.0 / 3.0, 2.5});
    save_volume(r, dir / "r.vol");
    CHECK(load_volume(dir / "r.vol") == r);
    CHECK(load_volume(dir / "r.vol").voxel_size() == r.voxel_size());
  }

  LabelVolume labels({2, 2, 2}, 0u);
  labels[3] = 7u;
  labels[7] = 4000000000u;
  save_labels(labels, dir / "labels.vol");
  CHECK(load_labels(dir / "labels.vol") == labels);
}

TEST_CASE("header text carries the documented fields") {
  auto dir = spotlight::testing::scratch_dir("volume_hdr");
  save_volume(ramp({2, 3, 4}), dir / "a.vol");
  std::ifstream in(dir / "a.vol.hdr");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  for (const char* key : {"shape_z=2", "shape_y=3", "shape_x=4", "voxel_um_z=0.5", "dtype=f32", "order=ZYX"}) {
    CHECK(text.find(key) != std::string::npos);
  }
  CHECK(std::filesystem::file_size(dir / "a.vol") == 2 * 3 * 4 * 4);
}

TEST_CASE("loading checks payload size and dtype") {
  auto dir = spotlight::testing::scratch_dir("volume_bad");
  const Volume v({4, 4, 4}, 1.5f);
  save_volume(v, dir / "ok.vol");
  CHECK(std::filesystem::file_size(dir / "ok.vol") == 256);
  CHECK(load_volume(dir / "ok.vol") == v);

  std::filesystem::resize_file(dir / "ok.vol", 200);
  CHECK(code_of([&] { load_volume(dir / "ok.vol"); }) == ErrorCode::CorruptFile);

  save_volume(v, dir / "f.vol");
  {
    std::ofstream hdr(dir / "f.vol.hdr");
    hdr << "shape_z=4\nshape_y=4\nshape_x=4\nvoxel_um_z=1\nvoxel_um_y=1\nvoxel_um_x=1\ndtype=f64\norder=ZYX\n";
  }
  CHECK(code_of([&] { load_volume(dir / "f.vol"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([&] { load_labels(dir / "ok.vol"); }) != ErrorCode::InvalidConfig);
  CHECK(code_of([&] { load_volume(dir / "missing.vol"); }) == ErrorCode::CorruptFile);
}

TEST_CASE("crop_to_multiple floors every extent") {
  CHECK(crop_to_multiple(Volume({50, 300, 400}), 16).shape() == Shape3{48, 288, 400});
  const Volume same = ramp({32, 64, 64});
  CHECK(crop_to_multiple(same, 16) == same);
  CHECK(code_of([] { crop_to_multiple(Volume({15, 64, 64}), 16); }) == ErrorCode::TooSmall);

  const Volume r = ramp({5, 6, 7});
  const Volume c = crop_to_multiple(r, 2);
  CHECK(c.shape() == Shape3{4, 6, 6});
  CHECK(c(3, 5, 5) == r(3, 5, 5));
}

TEST_CASE("downscale_half averages 2x2x2 blocks") {
  const Volume constant({4, 6, 8}, 3.25f, Spacing3{1, 2, 3});
  const Volume half = downscale_half(constant);
  CHECK(half.shape() == Shape3{2, 3, 4});
  CHECK(half.voxel_size() == Spacing3{2, 4, 6});
  for (float f : half) CHECK(f == 3.25f);

  Volume block({2, 2, 2});
  for (int i = 4; i < 8; ++i) block[i] = 1.0f;
  CHECK(downscale_half(block)[0] == 0.5f);

  CHECK(code_of([] { downscale_half(Volume({3, 4, 4})); }) == ErrorCode::OddShape);

  // Mean preservation; dyadic values keep every sum exact.
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> d(-64, 64);
  Volume v({6, 8, 4});
  for (auto& f : v) f = d(rng) / 8.0f;
  double a = 0, b = 0;
  for (float f : v) a += f;
  const Volume h = downscale_half(v);
  for (float f : h) b += f;
  CHECK(a / v.size() == b / h.size());
}

TEST_CASE("extract_patch samples v at origin + index") {
  const Volume v = ramp({3, 4, 5});
  CHECK(extract_patch(v, {0, 0, 0}, v.shape()) == v);
  const Volume one = extract_patch(v, {2, 1, 3}, {1, 1, 1});
  CHECK(one.size() == 1);
  CHECK(one[0] == v(2, 1, 3));
  CHECK(code_of([] { extract_patch(Volume({1, 1, 4}), {0, 0, 1}, {1, 1, 4}); }) == ErrorCode::OutOfBounds);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto u = [&](std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(0, hi)(rng); };
    const Shape3 size{1 + u(2), 1 + u(3), 1 + u(4)};
    const Shape3 origin{u(3 - size.z), u(4 - size.y), u(5 - size.x)};
    const Volume p = extract_patch(v, origin, size);
    for (std::int64_t z = 0; z < size.z; ++z)
      for (std::int64_t y = 0; y < size.y; ++y)
        for (std::int64_t x = 0; x < size.x; ++x)
          CHECK(p(z, y, x) == v(origin.z + z, origin.y + y, origin.x + x));
  }
}

TEST_CASE("upsample_double is the nearest-neighbour inverse of the halving layout") {
  LabelVolume l({2, 2, 2});
  for (std::uint32_t i = 0; i < 8; ++i) l[i] = i + 1;
  const LabelVolume up = upsample_double(l);
  CHECK(up.shape() == Shape3{4, 4, 4});
  CHECK(up(3, 2, 1) == l(1, 1, 0));
}
