#include "spotlight/volume.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace spotlight {

std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.z) + "," + std::to_string(s.y) + "," + std::to_string(s.x) + ")";
}

std::filesystem::path header_path(const std::filesystem::path& payload) {
  auto p = payload;
  p += ".hdr";
  return p;
}

namespace {

static_assert(sizeof(float) == 4 && sizeof(std::uint32_t) == 4);

template <typename T>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() { return "f32"; }
template <>
constexpr const char* dtype_name<std::uint32_t>() { return "u32"; }

template <typename T>
void to_little_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) {
      std::array<char, sizeof(T)> bytes;
      std::memcpy(bytes.data(), &v, sizeof(T));
      std::reverse(bytes.begin(), bytes.end());
      std::memcpy(&v, bytes.data(), sizeof(T));
    }
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
void save_grid(const Grid<T>& v, const std::filesystem::path& path) {
  {
    std::ofstream hdr(header_path(path), std::ios::trunc);
    if (!hdr) throw Error(ErrorCode::CorruptFile, "cannot write " + header_path(path).string());
    hdr << "shape_z=" << v.shape().z << "\n"
        << "shape_y=" << v.shape().y << "\n"
        << "shape_x=" << v.shape().x << "\n"
        << "voxel_um_z=" << format_double(v.voxel_size().z) << "\n"
        << "voxel_um_y=" << format_double(v.voxel_size().y) << "\n"
        << "voxel_um_x=" << format_double(v.voxel_size().x) << "\n"
        << "dtype=" << dtype_name<T>() << "\n"
        << "order=ZYX\n";
  }
  std::vector<T> payload = v.values();
  to_little_endian(payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::CorruptFile, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(T)));
  if (!out) throw Error(ErrorCode::CorruptFile, "short write to " + path.string());
}

struct Header {
  Shape3 shape;
  Spacing3 voxel;
  std::string dtype;
};

std::int64_t parse_int(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::filesystem::path& file) {
  auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorCode::CorruptFile, file.string() + " lacks " + key);
  std::int64_t out = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || out < 0) {
    throw Error(ErrorCode::CorruptFile, file.string() + ": bad value for " + key);
  }
  return out;
}

double parse_double(const std::map<std::string, std::string>& kv, const std::string& key,
                    const std::filesystem::path& file) {
  auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorCode::CorruptFile, file.string() + " lacks " + key);
  std::istringstream is(it->second);
  double out = 0;
  is >> out;
  if (!is || !is.eof()) throw Error(ErrorCode::CorruptFile, file.string() + ": bad value for " + key);
  return out;
}

Header read_header(const std::filesystem::path& payload) {
  const auto hpath = header_path(payload);
  std::ifstream in(hpath);
  if (!in) throw Error(ErrorCode::CorruptFile, "missing header " + hpath.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::CorruptFile, hpath.string() + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  Header h;
  h.shape = {parse_int(kv, "shape_z", hpath), parse_int(kv, "shape_y", hpath),
             parse_int(kv, "shape_x", hpath)};
  h.voxel = {parse_double(kv, "voxel_um_z", hpath), parse_double(kv, "voxel_um_y", hpath),
             parse_double(kv, "voxel_um_x", hpath)};
  if (!(h.voxel.z > 0 && h.voxel.y > 0 && h.voxel.x > 0)) {
    throw Error(ErrorCode::CorruptFile, hpath.string() + ": non-positive voxel size");
  }
  auto order = kv.find("order");
  if (order != kv.end() && order->second != "ZYX") {
    throw Error(ErrorCode::UnsupportedFormat, hpath.string() + ": axis order " + order->second);
  }
  auto dtype = kv.find("dtype");
  if (dtype == kv.end()) throw Error(ErrorCode::CorruptFile, hpath.string() + " lacks dtype");
  h.dtype = dtype->second;
  return h;
}

template <typename T>
Grid<T> load_grid(const std::filesystem::path& path) {
  const Header h = read_header(path);
  if (h.dtype != dtype_name<T>()) {
    throw Error(ErrorCode::UnsupportedFormat,
                path.string() + ": dtype " + h.dtype + ", expected " + dtype_name<T>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::CorruptFile, "missing payload " + path.string());
  const std::uint64_t expected = static_cast<std::uint64_t>(h.shape.voxels()) * sizeof(T);
  in.seekg(0, std::ios::end);
  const auto actual = static_cast<std::uint64_t>(in.tellg());
  if (actual != expected) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": payload is " + std::to_string(actual) +
                                            " bytes, header implies " + std::to_string(expected));
  }
  in.seekg(0);
  std::vector<T> values(static_cast<std::size_t>(h.shape.voxels()));
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (!in) throw Error(ErrorCode::CorruptFile, "short read from " + path.string());
  to_little_endian(values);
  if constexpr (std::is_floating_point_v<T>) {
    for (T v : values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::CorruptFile, path.string() + ": non-finite value");
    }
  }
  return Grid<T>(h.shape, std::move(values), h.voxel);
}

}  // namespace

void save_volume(const Volume& v, const std::filesystem::path& path) { save_grid(v, path); }
Volume load_volume(const std::filesystem::path& path) { return load_grid<float>(path); }
void save_labels(const LabelVolume& v, const std::filesystem::path& path) { save_grid(v, path); }
LabelVolume load_labels(const std::filesystem::path& path) { return load_grid<std::uint32_t>(path); }

Volume downscale_half(const Volume& v) {
  const Shape3& s = v.shape();
  if (s.z % 2 || s.y % 2 || s.x % 2) {
    throw Error(ErrorCode::OddShape, "cannot halve " + to_string(s));
  }
  const Spacing3& vs = v.voxel_size();
  Volume out(Shape3{s.z / 2, s.y / 2, s.x / 2}, 0.0f, Spacing3{vs.z * 2, vs.y * 2, vs.x * 2});
  for (std::int64_t z = 0; z < out.shape().z; ++z) {
    for (std::int64_t y = 0; y < out.shape().y; ++y) {
      for (std::int64_t x = 0; x < out.shape().x; ++x) {
        double acc = 0.0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) acc += v(2 * z + dz, 2 * y + dy, 2 * x + dx);
        out(z, y, x) = static_cast<float>(acc / 8.0);
      }
    }
  }
  return out;
}

}  // namespace spotlight
