#include "trgan/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "trgan/errors.hpp"

namespace trgan {

namespace {

using json = nlohmann::json;
using Kind = ParseError::Kind;

json header_for(const GridDims& d, const VoxelSize& vs, const char* kind, const Sample* meta) {
  json h;
  h["magic"] = "vol1";
  h["dims"] = {d.width, d.height, d.depth};
  h["voxel_size_mm"] = {vs[0], vs[1], vs[2]};
  h["kind"] = kind;
  if (meta) {
    h["id"] = meta->id;
    if (meta->member) h["member"] = *meta->member;
  }
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(Kind::kIo, "cannot open " + path.string() + " for writing");
  return out;
}

void put_f32_le(std::string& buf, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_volume_file(const std::filesystem::path& path, const Volume& v, const Sample* meta) {
  if (v.data.size() != v.dims.voxels()) throw ShapeError("write_volume_file: payload does not match grid");
  std::string buf = header_for(v.dims, v.voxel_size_mm, "volume", meta).dump() + "\n";
  buf.reserve(buf.size() + 4 * v.data.size());
  for (float f : v.data) put_f32_le(buf, f);
  auto out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParseError(Kind::kIo, "write failed for " + path.string());
}

void write_mask_file(const std::filesystem::path& path, const Mask& m, const Sample* meta) {
  if (m.data.size() != m.dims.voxels()) throw ShapeError("write_mask_file: payload does not match grid");
  std::string buf = header_for(m.dims, m.voxel_size_mm, "mask", meta).dump() + "\n";
  buf.append(reinterpret_cast<const char*>(m.data.data()), m.data.size());
  auto out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParseError(Kind::kIo, "write failed for " + path.string());
}

VolumeFile read_volume_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(Kind::kIo, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError(Kind::kMalformedHeader, path.string() + ": no header line");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw ParseError(Kind::kMalformedHeader, path.string() + ": header is not JSON: " + e.what());
  }

  GridDims dims;
  VoxelSize vs{};
  std::string kind;
  try {
    if (!h.is_object() || h.at("magic").get<std::string>() != "vol1") {
      throw ParseError(Kind::kMalformedHeader, path.string() + ": bad magic");
    }
    const auto& d = h.at("dims");
    const auto& s = h.at("voxel_size_mm");
    if (!d.is_array() || d.size() != 3 || !s.is_array() || s.size() != 3) {
      throw ParseError(Kind::kMalformedHeader, path.string() + ": dims and voxel_size_mm need 3 entries");
    }
    dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    vs = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    kind = h.at("kind").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(Kind::kMalformedHeader, path.string() + ": " + e.what());
  }
  if (kind != "volume" && kind != "mask") {
    throw ParseError(Kind::kMalformedHeader, path.string() + ": unknown kind '" + kind + "'");
  }
  if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0) {
    throw ParseError(Kind::kDimensionMismatch, path.string() + ": non-positive dims " + to_string(dims));
  }

  const std::size_t elem = kind == "volume" ? 4 : 1;
  const std::size_t expected = dims.voxels() * elem;
  const std::size_t have = bytes.size() - nl - 1;
  if (have < expected) {
    throw ParseError(Kind::kTruncatedPayload, path.string() + ": payload has " + std::to_string(have) +
                                                  " bytes, header implies " + std::to_string(expected));
  }
  if (have > expected) {
    throw ParseError(Kind::kDimensionMismatch, path.string() + ": payload has " + std::to_string(have) +
                                                   " bytes, header implies " + std::to_string(expected));
  }

  VolumeFile f;
  if (h.contains("id")) f.id = h["id"].get<std::string>();
  if (h.contains("member")) f.member = h["member"].get<bool>();
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  if (kind == "volume") {
    Volume v(dims, vs);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = get_f32_le(payload + 4 * i);
    f.content = std::move(v);
  } else {
    Mask m(dims, vs);
    std::memcpy(m.data.data(), payload, m.data.size());
    f.content = std::move(m);
  }
  return f;
}

std::filesystem::path mask_path_for(const std::filesystem::path& volume_path) {
  auto p = volume_path;
  const auto ext = p.extension().string();
  p.replace_extension();
  p += ".mask" + ext;
  return p;
}

void save_volume(const Sample& sample, const std::filesystem::path& path) {
  validate(sample);
  write_volume_file(path, sample.volume, &sample);
  write_mask_file(mask_path_for(path), sample.mask, &sample);
}

Sample load_volume(const std::filesystem::path& path) {
  VolumeFile vf = read_volume_file(path);
  VolumeFile mf = read_volume_file(mask_path_for(path));
  auto* v = std::get_if<Volume>(&vf.content);
  auto* m = std::get_if<Mask>(&mf.content);
  if (!v) throw ParseError(Kind::kMalformedHeader, path.string() + ": expected kind 'volume'");
  if (!m) throw ParseError(Kind::kMalformedHeader, mask_path_for(path).string() + ": expected kind 'mask'");
  if (v->dims != m->dims) {
    throw ParseError(Kind::kDimensionMismatch, path.string() + ": volume grid " + to_string(v->dims) +
                                                   " differs from mask grid " + to_string(m->dims));
  }
  Sample s;
  s.id = vf.id.empty() ? path.stem().string() : vf.id;
  s.member = vf.member;
  s.volume = std::move(*v);
  s.mask = std::move(*m);
  return s;
}

}  // namespace trgan
