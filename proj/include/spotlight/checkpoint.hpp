#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "spotlight/net.hpp"

namespace spotlight {

/// Trained parameters plus free-form metadata (e.g. intensity ranges).
struct Checkpoint {
  NetParams<float> params;
  std::map<std::string, std::string> meta;
};

// Text header (config, layer shapes, metadata) terminated by `end_header`,
// followed by little-endian f32 payloads in declaration order: per conv
// weight then bias, per norm gamma, beta, running mean, running variance.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws Incompatible on any structural or size mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spotlight
