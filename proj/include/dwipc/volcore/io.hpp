#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dwipc/volcore/gradients.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc {

namespace fs = std::filesystem;

// A volume on disk is `<stem>.json` (header) next to `<stem>.raw` (float32 LE).
// Multi-channel containers store channels back to back, channel slowest.
namespace detail {

inline fs::path stem_of(const fs::path& p) {
  auto ext = p.extension();
  if (ext == ".json" || ext == ".raw") return fs::path(p).replace_extension();
  return p;
}

inline fs::path with_ext(const fs::path& stem, const char* ext) {
  return fs::path(stem.string() + ext);
}

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

struct Header {
  Dims dims;
  VoxelSize voxel_size{1.0, 1.0, 1.0};
  std::size_t channels = 1;
};

inline Header read_header(const fs::path& json_path) {
  if (!fs::exists(json_path)) throw Error(ErrorKind::FileNotFound, json_path.string());
  std::ifstream in(json_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidHeader, json_path.string() + ": " + e.what());
  }
  Header h;
  try {
    const auto d = j.at("dims").get<std::vector<long long>>();
    if (d.size() != 3 || d[0] <= 0 || d[1] <= 0 || d[2] <= 0)
      throw Error(ErrorKind::InvalidHeader, json_path.string() + ": dims must be three positive integers");
    h.dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    if (j.contains("voxel_size")) h.voxel_size = j.at("voxel_size").get<VoxelSize>();
    if (j.at("dtype").get<std::string>() != "float32")
      throw Error(ErrorKind::InvalidHeader, json_path.string() + ": dtype must be float32");
    if (j.at("byte_order").get<std::string>() != "little-endian")
      throw Error(ErrorKind::InvalidHeader, json_path.string() + ": byte_order must be \"little-endian\"");
    const auto c = j.value("channels", 1LL);
    if (c <= 0) throw Error(ErrorKind::InvalidHeader, json_path.string() + ": channels must be positive");
    h.channels = static_cast<std::size_t>(c);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidHeader, json_path.string() + ": " + e.what());
  }
  return h;
}

inline void write_header(const fs::path& json_path, const Header& h) {
  nlohmann::ordered_json j;
  j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
  j["voxel_size"] = h.voxel_size;
  j["dtype"] = "float32";
  j["byte_order"] = "little-endian";
  j["channels"] = h.channels;
  std::ofstream out(json_path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

inline std::vector<float> read_payload(const fs::path& raw_path, std::size_t expected) {
  if (!fs::exists(raw_path)) throw Error(ErrorKind::FileNotFound, raw_path.string());
  const auto bytes = fs::file_size(raw_path);
  if (bytes < expected * sizeof(float))
    throw Error(ErrorKind::TruncatedPayload, raw_path.string() + ": " + std::to_string(bytes) +
                                                 " bytes, expected " + std::to_string(expected * 4));
  if (bytes > expected * sizeof(float))
    throw Error(ErrorKind::DimsMismatch, raw_path.string() + ": " + std::to_string(bytes) +
                                             " bytes exceeds header dims (" + std::to_string(expected * 4) + ")");
  std::vector<std::uint32_t> words(expected);
  std::ifstream in(raw_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(expected * sizeof(float)));
  if (!in) throw Error(ErrorKind::TruncatedPayload, raw_path.string());
  std::vector<float> out(expected);
  for (std::size_t i = 0; i < expected; ++i) out[i] = std::bit_cast<float>(to_le(words[i]));
  return out;
}

inline void write_payload(const fs::path& raw_path, std::span<const float> values) {
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) words[i] = to_le(std::bit_cast<std::uint32_t>(values[i]));
  std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + raw_path.string());
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw Error(ErrorKind::Io, "short write to " + raw_path.string());
}

}  // namespace detail

/// Writes `vols` as one container. All channels must share dims.
inline void save_channels(std::span<const Volume3> vols, const fs::path& path) {
  if (vols.empty()) throw Error(ErrorKind::InvalidArgument, "save_channels: no channels");
  const auto stem = detail::stem_of(path);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  std::vector<float> payload;
  payload.reserve(vols.size() * vols.front().size());
  for (const auto& v : vols) {
    require_same_dims(v, vols.front(), "save_channels");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorKind::InvalidData, stem.string() + ": non-finite voxel");
      payload.push_back(static_cast<float>(x));
    }
  }
  detail::write_header(detail::with_ext(stem, ".json"),
                       {vols.front().dims(), vols.front().voxel_size(), vols.size()});
  detail::write_payload(detail::with_ext(stem, ".raw"), payload);
}

inline void save_volume(const Volume3& vol, const fs::path& path) { save_channels({&vol, 1}, path); }

inline std::vector<Volume3> load_channels(const fs::path& path) {
  const auto stem = detail::stem_of(path);
  const auto h = detail::read_header(detail::with_ext(stem, ".json"));
  const auto n = h.dims.voxels();
  const auto payload = detail::read_payload(detail::with_ext(stem, ".raw"), n * h.channels);
  std::vector<Volume3> out;
  out.reserve(h.channels);
  for (std::size_t c = 0; c < h.channels; ++c) {
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float f = payload[c * n + i];
      if (!std::isfinite(f))
        throw Error(ErrorKind::InvalidData, stem.string() + ": non-finite value at voxel " + std::to_string(i));
      data[i] = f;
    }
    out.emplace_back(h.dims, std::move(data), h.voxel_size);
  }
  return out;
}

inline Volume3 load_volume(const fs::path& path) {
  auto ch = load_channels(path);
  if (ch.size() != 1)
    throw Error(ErrorKind::InvalidHeader, path.string() + ": expected 1 channel, found " + std::to_string(ch.size()));
  return std::move(ch.front());
}

inline void save_mask(const Mask& m, const fs::path& path) {
  Volume3 v(m.dims(), 0.0, m.voxel_size());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i] ? 1.0 : 0.0;
  save_volume(v, path);
}

inline Mask load_mask(const fs::path& path) {
  const auto v = load_volume(path);
  Mask m(v.dims(), 0, v.voxel_size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0.0;
  return m;
}

/// Parses `b gx gy gz` rows; `#` starts a comment.
inline GradientTable parse_gradients(std::istream& in, const std::string& source = "<stream>") {
  std::vector<GradientEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::vector<double> fields;
    std::string tok;
    while (row >> tok) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidData, source + ":" + std::to_string(lineno) + ": not a number: " + tok);
      }
    }
    if (fields.empty()) continue;
    if (fields.size() != 4)
      throw Error(ErrorKind::CountMismatch, source + ":" + std::to_string(lineno) + ": expected b and 3 direction "
                                                "components, found " + std::to_string(fields.size()) + " values");
    entries.push_back({fields[0], {fields[1], fields[2], fields[3]}});
  }
  try {
    return GradientTable(std::move(entries));
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.what());
  }
}

inline GradientTable load_gradients(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  return parse_gradients(in, path.string());
}

inline void save_gradients(const GradientTable& table, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "# b gx gy gz\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : table.entries()) out << e.b << ' ' << e.g[0] << ' ' << e.g[1] << ' ' << e.g[2] << '\n';
}

}  // namespace dwipc
