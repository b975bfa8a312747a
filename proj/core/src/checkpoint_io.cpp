#include "trgan/checkpoint_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "trgan/errors.hpp"

namespace trgan {

namespace {

using json = nlohmann::json;
using Kind = ParseError::Kind;

std::uint64_t parse_hex(const std::string& s, const std::filesystem::path& where) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw ParseError(Kind::kMalformedHeader, where.string() + ": bad digest '" + s + "'");
  return v;
}

}  // namespace

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

void write_param_file(const std::filesystem::path& manifest_path, const ParamFile& file) {
  auto payload_path = manifest_path;
  payload_path.replace_extension(".bin");

  json params = json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const auto& [group, tensors] : file.groups) {
    for (const auto& [name, t] : tensors) {
      params.push_back({{"name", group + "/" + name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
      for (double v : t.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
      }
      offset += t.size();
    }
  }
  json manifest = {{"format", "trgan-params-1"},
                   {"kind", file.kind},
                   {"step", file.step},
                   {"config_digest", digest_hex(file.config_digest)},
                   {"rng_state", file.rng_state},
                   {"payload", payload_path.filename().string()},
                   {"parameters", params}};

  std::ofstream bin(payload_path, std::ios::binary | std::ios::trunc);
  bin.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::ofstream man(manifest_path, std::ios::trunc);
  man << manifest.dump(1) << '\n';
  if (!bin || !man) throw ParseError(Kind::kIo, "cannot write " + manifest_path.string());
}

ParamFile read_param_file(const std::filesystem::path& manifest_path) {
  std::ifstream man(manifest_path);
  if (!man) throw ParseError(Kind::kIo, "cannot open " + manifest_path.string());
  json m;
  try {
    m = json::parse(man);
  } catch (const json::exception& e) {
    throw ParseError(Kind::kMalformedHeader, manifest_path.string() + ": " + e.what());
  }

  ParamFile f;
  std::vector<std::tuple<std::string, nn::Shape, std::size_t, std::size_t>> index;
  std::string payload_name;
  try {
    if (m.at("format").get<std::string>() != "trgan-params-1") {
      throw ParseError(Kind::kMalformedHeader, manifest_path.string() + ": unknown format");
    }
    f.kind = m.at("kind").get<std::string>();
    f.step = m.at("step").get<long>();
    f.config_digest = parse_hex(m.at("config_digest").get<std::string>(), manifest_path);
    f.rng_state = m.value("rng_state", std::string{});
    payload_name = m.at("payload").get<std::string>();
    for (const auto& p : m.at("parameters")) {
      index.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<nn::Shape>(),
                         p.at("offset").get<std::size_t>(), p.at("count").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw ParseError(Kind::kMalformedHeader, manifest_path.string() + ": " + e.what());
  }

  const auto payload_path = manifest_path.parent_path() / payload_name;
  std::ifstream bin(payload_path, std::ios::binary);
  if (!bin) throw ParseError(Kind::kIo, "cannot open " + payload_path.string());
  std::string bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t floats = bytes.size() / 4;

  std::size_t total = 0;
  for (const auto& [name, shape, offset, count] : index) {
    if (nn::shape_size(shape) != count) {
      throw ParseError(Kind::kDimensionMismatch, manifest_path.string() + ": " + name + " count/shape mismatch");
    }
    if (offset + count > floats) {
      throw ParseError(Kind::kTruncatedPayload, payload_path.string() + ": payload too short for " + name);
    }
    const auto slash = name.find('/');
    if (slash == std::string::npos) {
      throw ParseError(Kind::kMalformedHeader, manifest_path.string() + ": parameter name without group: " + name);
    }
    nn::Tensor t(shape);
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned char* p = raw + 4 * (offset + i);
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(p[k]) << (8 * k);
      t[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    f.groups[name.substr(0, slash)].emplace(name.substr(slash + 1), std::move(t));
    total += count;
  }
  if (total * 4 != bytes.size()) {
    throw ParseError(Kind::kDimensionMismatch, payload_path.string() + ": payload length does not match manifest");
  }
  return f;
}

void save_checkpoint(const std::filesystem::path& manifest_path, const Checkpoint& ckpt) {
  ParamFile f;
  f.kind = "trgan";
  f.step = ckpt.step;
  f.config_digest = ckpt.config_digest;
  f.rng_state = ckpt.rng_state;
  f.groups["generator"] = ckpt.generator;
  f.groups["discriminator"] = ckpt.discriminator;
  write_param_file(manifest_path, f);
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  ParamFile f = read_param_file(manifest_path);
  if (f.kind != "trgan" || !f.groups.contains("generator") || !f.groups.contains("discriminator")) {
    throw ParseError(Kind::kMalformedHeader, manifest_path.string() + ": not a TrGAN checkpoint");
  }
  return Checkpoint{f.step, std::move(f.groups["generator"]), std::move(f.groups["discriminator"]), f.config_digest,
                    f.rng_state};
}

}  // namespace trgan
