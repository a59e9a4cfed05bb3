#pragma once

// Volume files: a JSON sidecar `<stem>.json`
//   {"dims":[nx,ny,nz], "spacing":[Vx,Vy,Vz], "dtype":"f32"|"u8",
//    "order":"x-fastest", "normalize":bool}
// next to a raw little-endian payload `<stem>.vraw`. Flow fields use the same
// layout with dims [nx,ny,2]: the u plane followed by the v plane.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "regflow/grid.hpp"
#include "regflow/imaging.hpp"
#include "regflow/resample.hpp"

namespace regflow {

namespace fs = std::filesystem;

struct VolumePaths {
  fs::path header;
  fs::path payload;
};

/// Accepts the sidecar, the payload, or the bare stem.
[[nodiscard]] inline VolumePaths volume_paths(const fs::path& path) {
  fs::path stem = path;
  if (path.extension() == ".json" || path.extension() == ".vraw") stem.replace_extension();
  fs::path header = stem;
  header += ".json";
  fs::path payload = stem;
  payload += ".vraw";
  return {header, payload};
}

struct VolumeHeader {
  Dims3 dims{};
  Spacing3 spacing{};
  std::string dtype = "f32";
  std::string order = "x-fastest";
  bool normalize = false;
};

namespace detail {

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline float load_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<std::uint8_t>(p[b]);
  return std::bit_cast<float>(bits);
}

inline void store_f32_le(float v, char* p) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) {
    p[b] = static_cast<char>(bits & 0xFFU);
    bits >>= 8;
  }
}

inline VolumeHeader parse_header(const nlohmann::json& j, const fs::path& where) {
  VolumeHeader h;
  try {
    const auto dims = j.at("dims").get<std::vector<std::int64_t>>();
    const auto spacing = j.at("spacing").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3) {
      throw IoError(where.string() + ": dims and spacing must have 3 entries");
    }
    h.dims = {dims[0], dims[1], dims[2]};
    h.spacing = {spacing[0], spacing[1], spacing[2]};
    h.dtype = j.at("dtype").get<std::string>();
    h.order = j.value("order", std::string("x-fastest"));
    h.normalize = j.value("normalize", false);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(where.string() + ": bad volume header: " + e.what());
  }
  if (h.order != "x-fastest") throw IoError(where.string() + ": unsupported order '" + h.order + "'");
  if (h.dtype != "f32" && h.dtype != "u8") throw IoError(where.string() + ": unsupported dtype '" + h.dtype + "'");
  if (h.dims.nx < 1 || h.dims.ny < 1 || h.dims.nz < 1) throw IoError(where.string() + ": dims must be >= 1");
  if (!(h.spacing.x > 0 && h.spacing.y > 0 && h.spacing.z > 0)) {
    throw IoError(where.string() + ": spacing must be > 0");
  }
  return h;
}

inline nlohmann::json header_json(const VolumeHeader& h) {
  nlohmann::json j;
  j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
  j["spacing"] = {h.spacing.x, h.spacing.y, h.spacing.z};
  j["dtype"] = h.dtype;
  j["order"] = h.order;
  j["normalize"] = h.normalize;
  return j;
}

inline std::size_t dtype_size(const std::string& dtype) { return dtype == "u8" ? 1 : 4; }

struct RawVolume {
  VolumeHeader header;
  std::vector<char> payload;
};

inline RawVolume read_raw(const fs::path& path, const std::string& expected_dtype) {
  const auto paths = volume_paths(path);
  if (!fs::exists(paths.header)) throw IoError("missing volume header " + paths.header.string());
  if (!fs::exists(paths.payload)) throw IoError("missing volume payload " + paths.payload.string());
  RawVolume raw{parse_header(read_json(paths.header), paths.header), read_bytes(paths.payload)};
  if (raw.header.dtype != expected_dtype) {
    throw IoError(paths.header.string() + ": expected dtype " + expected_dtype + ", found " + raw.header.dtype);
  }
  const auto expected = static_cast<std::size_t>(raw.header.dims.count()) * dtype_size(raw.header.dtype);
  if (raw.payload.size() != expected) {
    throw IoError(paths.payload.string() + ": payload has " + std::to_string(raw.payload.size()) +
                  " bytes but header " + to_string(raw.header.dims) + " " + raw.header.dtype + " needs " +
                  std::to_string(expected));
  }
  return raw;
}

inline void write_raw(const fs::path& path, const VolumeHeader& header, const std::vector<char>& payload) {
  const auto paths = volume_paths(path);
  write_text(paths.header, header_json(header).dump(2) + "\n");
  write_bytes(paths.payload, payload);
}

inline std::vector<char> encode_f32(std::span<const float> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) store_f32_le(values[i], bytes.data() + 4 * i);
  return bytes;
}

inline std::vector<float> decode_f32(const std::vector<char>& bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = load_f32_le(bytes.data() + 4 * i);
  return values;
}

}  // namespace detail

/// Loads a float volume. With `normalize` set in the header, values are
/// rescaled to [0,1] by (v - min) / (max - min); a constant volume becomes 0.
[[nodiscard]] inline Volume load_volume(const fs::path& path) {
  auto raw = detail::read_raw(path, "f32");
  auto values = detail::decode_f32(raw.payload);
  require_finite(std::span<const float>(values), path.string());
  if (raw.header.normalize) {
    const auto [lo, hi] = min_max(std::span<const float>(values));
    const double range = hi - lo;
    for (auto& v : values) {
      v = range > 0.0 ? static_cast<float>((static_cast<double>(v) - lo) / range) : 0.0F;
    }
  }
  return Volume(raw.header.dims, raw.header.spacing, std::move(values));
}

/// Writes the volume with normalize=false unless asked otherwise.
inline void save_volume(const fs::path& path, const Volume& v, bool normalize_flag = false) {
  VolumeHeader h{v.dims(), v.spacing(), "f32", "x-fastest", normalize_flag};
  detail::write_raw(path, h, detail::encode_f32(v.data()));
}

[[nodiscard]] inline LabelMask load_mask(const fs::path& path) {
  auto raw = detail::read_raw(path, "u8");
  std::vector<std::uint8_t> values(raw.payload.size());
  std::memcpy(values.data(), raw.payload.data(), values.size());
  LabelMask mask(raw.header.dims, raw.header.spacing, std::move(values));
  if (!is_binary(mask)) throw IoError(path.string() + ": mask values must be 0 or 1");
  return mask;
}

inline void save_mask(const fs::path& path, const LabelMask& mask) {
  if (!is_binary(mask)) throw InvalidArgument("mask values must be 0 or 1");
  VolumeHeader h{mask.dims(), mask.spacing(), "u8", "x-fastest", false};
  std::vector<char> bytes(mask.data().size());
  std::memcpy(bytes.data(), mask.data().data(), bytes.size());
  detail::write_raw(path, h, bytes);
}

[[nodiscard]] inline FlowField load_flow(const fs::path& path) {
  auto raw = detail::read_raw(path, "f32");
  if (raw.header.dims.nz != 2) throw IoError(path.string() + ": flow files need dims [nx, ny, 2]");
  auto values = detail::decode_f32(raw.payload);
  const auto n = static_cast<std::ptrdiff_t>(raw.header.dims.nx * raw.header.dims.ny);
  std::vector<float> u(values.begin(), values.begin() + n);
  std::vector<float> v(values.begin() + n, values.end());
  try {
    return FlowField({raw.header.dims.nx, raw.header.dims.ny}, std::move(u), std::move(v));
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_flow(const fs::path& path, const FlowField& f) {
  f.validate();
  VolumeHeader h{{f.dims.nx, f.dims.ny, 2}, {1.0, 1.0, 1.0}, "f32", "x-fastest", false};
  std::vector<float> planes(f.u);
  planes.insert(planes.end(), f.v.begin(), f.v.end());
  detail::write_raw(path, h, detail::encode_f32(planes));
}

/// Affine transforms are stored as a bare 12-element row-major JSON array.
[[nodiscard]] inline AffineTransform load_affine(const fs::path& path) {
  const auto j = detail::read_json(path);
  AffineTransform t;
  try {
    const auto values = j.get<std::vector<double>>();
    if (values.size() != 12) throw IoError(path.string() + ": affine needs 12 entries");
    std::copy(values.begin(), values.end(), t.m.begin());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad affine: " + e.what());
  }
  return t;
}

inline void save_affine(const fs::path& path, const AffineTransform& t) {
  nlohmann::json j = t.m;
  detail::write_text(path, j.dump() + "\n");
}

}  // namespace regflow
