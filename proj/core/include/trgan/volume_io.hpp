#pragma once

#include <filesystem>
#include <variant>

#include "trgan/volume.hpp"

namespace trgan {

// Volume file: one UTF-8 JSON header line
//   {"magic":"vol1","dims":[W,H,D],"voxel_size_mm":[x,y,z],"kind":"volume"|"mask"}
// terminated by '\n', followed by W*H*D little-endian binary32 values
// (masks: one unsigned byte per voxel), x fastest, then y, then slice t.
// Optional header keys "id" and "member" carry Sample metadata; readers
// ignore keys they do not know.

void write_volume_file(const std::filesystem::path& path, const Volume& v, const Sample* meta = nullptr);
void write_mask_file(const std::filesystem::path& path, const Mask& m, const Sample* meta = nullptr);

struct VolumeFile {
  std::variant<Volume, Mask> content;
  std::string id;
  std::optional<bool> member;
};

/// Throws ParseError with kMalformedHeader, kTruncatedPayload, kDimensionMismatch or kIo.
VolumeFile read_volume_file(const std::filesystem::path& path);

/// Companion mask path: "case.vol" -> "case.mask.vol".
std::filesystem::path mask_path_for(const std::filesystem::path& volume_path);

/// Writes the volume at `path` and the mask at mask_path_for(path).
void save_volume(const Sample& sample, const std::filesystem::path& path);
Sample load_volume(const std::filesystem::path& path);

}  // namespace trgan
