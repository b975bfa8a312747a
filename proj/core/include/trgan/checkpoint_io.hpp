#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "trgan/nn/params.hpp"
#include "trgan/train.hpp"

namespace trgan {

// Parameter files (checkpoints and trained segmenters) are a pair:
//
//   <name>.json  manifest
//     {"format":"trgan-params-1","kind":"trgan"|"segmenter","step":N,
//      "config_digest":"<16 hex digits>","rng_state":"...","payload":"<name>.bin",
//      "parameters":[{"name":"generator/g0.0.weight","shape":[...],
//                     "offset":<first float index>,"count":<floats>}, ...]}
//   <name>.bin   every parameter as little-endian binary32, concatenated in
//                manifest order (offset/count are in floats, not bytes).
//
// Parameter names are "<group>/<parameter>"; TrGAN checkpoints use the groups
// "generator" and "discriminator", segmenters use "segmenter".

struct ParamFile {
  std::string kind;
  long step = 0;
  std::uint64_t config_digest = 0;
  std::string rng_state;
  std::map<std::string, nn::NamedTensors> groups;
};

void write_param_file(const std::filesystem::path& manifest_path, const ParamFile& file);
/// Throws ParseError on malformed manifests or payload/length mismatches.
ParamFile read_param_file(const std::filesystem::path& manifest_path);

void save_checkpoint(const std::filesystem::path& manifest_path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest_path);

std::string digest_hex(std::uint64_t digest);

}  // namespace trgan
