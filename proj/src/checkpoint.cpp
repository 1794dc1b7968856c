#include "spotlight/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spotlight {

namespace {

const char* kind_name(ConvKind k) {
  switch (k) {
    case ConvKind::Same3: return "same3";
    case ConvKind::Down2: return "down2";
    case ConvKind::Up2: return "up2";
  }
  return "?";
}

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  std::vector<float> tmp = v;
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : tmp) {
      std::array<char, 4> b;
      std::memcpy(b.data(), &f, 4);
      std::reverse(b.begin(), b.end());
      std::memcpy(&f, b.data(), 4);
    }
  }
  out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * 4));
}

void read_floats(std::ifstream& in, std::vector<float>& v, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  if (!in) throw Error(ErrorCode::Incompatible, path.string() + ": truncated parameter payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v) {
      std::array<char, 4> b;
      std::memcpy(b.data(), &f, 4);
      std::reverse(b.begin(), b.end());
      std::memcpy(&f, b.data(), 4);
    }
  }
  for (float f : v) {
    if (!std::isfinite(f)) throw Error(ErrorCode::Incompatible, path.string() + ": non-finite parameter");
  }
}

int to_int(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Incompatible, path.string() + ": bad integer '" + s + "'");
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::CorruptFile, "cannot write " + path.string());
  const auto& p = ckpt.params;
  out << "spotlight-checkpoint 1\n";
  out << "base_channels=" << p.config.base_channels << "\n";
  out << "depth=" << p.config.depth << "\n";
  out << "batch_norm=" << (p.config.batch_norm ? 1 : 0) << "\n";
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    const auto& c = p.convs[i];
    out << "conv" << i << "=" << kind_name(c.kind) << " " << c.in_channels << " " << c.out_channels
        << "\n";
  }
  for (std::size_t j = 0; j < p.norms.size(); ++j) out << "norm" << j << "=" << p.norms[j].channels << "\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "checkpoint metadata key/value not representable: " + k);
    }
    out << "meta." << k << "=" << v << "\n";
  }
  out << "end_header\n";
  for (const auto& c : p.convs) {
    write_floats(out, c.weight);
    write_floats(out, c.bias);
  }
  for (const auto& n : p.norms) {
    write_floats(out, n.gamma);
    write_floats(out, n.beta);
    write_floats(out, n.running_mean);
    write_floats(out, n.running_var);
  }
  if (!out) throw Error(ErrorCode::CorruptFile, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Incompatible, "cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "spotlight-checkpoint 1") {
    throw Error(ErrorCode::Incompatible, path.string() + ": not a checkpoint");
  }
  std::map<std::string, std::string> kv;
  std::map<std::string, std::string> meta;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Incompatible, path.string() + ": bad header line");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key.rfind("meta.", 0) == 0) {
      meta[key.substr(5)] = value;
    } else {
      kv[key] = value;
    }
  }
  if (!ended) throw Error(ErrorCode::Incompatible, path.string() + ": header not terminated");

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::Incompatible, path.string() + " lacks " + key);
    return it->second;
  };
  NetConfig cfg;
  cfg.base_channels = to_int(need("base_channels"), path);
  cfg.depth = to_int(need("depth"), path);
  cfg.batch_norm = to_int(need("batch_norm"), path) != 0;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Incompatible, e.what());
  }

  Checkpoint ck{make_net<float>(cfg), std::move(meta)};
  auto& p = ck.params;
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    std::ostringstream expect;
    expect << kind_name(p.convs[i].kind) << " " << p.convs[i].in_channels << " "
           << p.convs[i].out_channels;
    if (need("conv" + std::to_string(i)) != expect.str()) {
      throw Error(ErrorCode::Incompatible, path.string() + ": layer " + std::to_string(i) + " shape");
    }
  }
  for (std::size_t j = 0; j < p.norms.size(); ++j) {
    if (to_int(need("norm" + std::to_string(j)), path) != p.norms[j].channels) {
      throw Error(ErrorCode::Incompatible, path.string() + ": norm " + std::to_string(j) + " shape");
    }
  }
  for (auto& c : p.convs) {
    read_floats(in, c.weight, path);
    read_floats(in, c.bias, path);
  }
  for (auto& n : p.norms) {
    read_floats(in, n.gamma, path);
    read_floats(in, n.beta, path);
    read_floats(in, n.running_mean, path);
    read_floats(in, n.running_var, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::Incompatible, path.string() + ": trailing bytes after payload");
  }
  return ck;
}

}  // namespace spotlight
