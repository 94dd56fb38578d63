#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dwipc/filters/config.hpp"
#include "dwipc/parallel.hpp"
#include "dwipc/phantom.hpp"
#include "dwipc/volcore/io.hpp"

namespace dwipc::pipeline {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.0";

enum class CalibrationMode { Both, On, Off };

struct GradientSpec {
  std::size_t b0_count = 3;
  std::size_t directions = 30;
  double b_value = 1000.0;
  std::optional<std::filesystem::path> file;  // overrides the generated scheme
};

struct ExperimentConfig {
  phantom::PhantomSpec phantom = phantom::default_phantom();
  bool default_regions = true;
  GradientSpec gradients;
  phantom::NoiseSpec noise;
  phantom::BackgroundPhaseSpec background_phase;
  std::vector<filters::FilterConfig> filters{filters::TvConfig{}, filters::CfConfig{}, filters::MppcaConfig{}};
  CalibrationMode calibration = CalibrationMode::Both;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  std::size_t reproduce_seeds = 3;
  bool identity_calibration = false;  // negative control: calibrated variants skip the calibration

  GradientTable gradient_table() const {
    if (gradients.file) return load_gradients(*gradients.file);
    return single_shell_scheme(gradients.b0_count, gradients.directions, gradients.b_value);
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::Configuration, what); }

inline Vec3 vec3(const json& j, const char* key) {
  try {
    return j.at(key).get<Vec3>();
  } catch (const json::exception&) {
    config_error(std::string("expected a 3-vector at '") + key + "'");
  }
}

inline const char* pattern_name(phantom::NoisePattern p) {
  switch (p) {
    case phantom::NoisePattern::Constant: return "constant";
    case phantom::NoisePattern::LinearRamp: return "linear-ramp";
    case phantom::NoisePattern::GaussianBump: return "gaussian-bump";
  }
  return "constant";
}

inline phantom::NoisePattern parse_pattern(const std::string& s) {
  if (s == "constant") return phantom::NoisePattern::Constant;
  if (s == "linear-ramp") return phantom::NoisePattern::LinearRamp;
  if (s == "gaussian-bump") return phantom::NoisePattern::GaussianBump;
  config_error("unknown noise pattern '" + s + "' (constant, linear-ramp, gaussian-bump)");
}

inline const char* calibration_name(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::Both: return "both";
    case CalibrationMode::On: return "on";
    case CalibrationMode::Off: return "off";
  }
  return "both";
}

}  // namespace detail

/// Filter by CLI/config name: TV, CF or MPPCA (case sensitive), with default settings.
inline filters::FilterConfig filter_by_name(const std::string& name) {
  if (name == "TV") return filters::TvConfig{};
  if (name == "CF") return filters::CfConfig{};
  if (name == "MPPCA") return filters::MppcaConfig{};
  throw Error(ErrorKind::Configuration, "unknown filter '" + name + "' (expected one of TV, CF, MPPCA)");
}

inline json filter_to_json(const filters::FilterConfig& f) {
  if (const auto* tv = std::get_if<filters::TvConfig>(&f)) return {{"type", "TV"}, {"lambda", tv->lambda}, {"iters", tv->iters}};
  if (const auto* cf = std::get_if<filters::CfConfig>(&f)) return {{"type", "CF"}, {"iters", cf->iters}};
  const auto& mp = std::get<filters::MppcaConfig>(f);
  return {{"type", "MPPCA"}, {"block", mp.block}, {"stride", mp.stride}};
}

inline filters::FilterConfig filter_from_json(const json& j) {
  auto f = filter_by_name(j.at("type").get<std::string>());
  if (auto* tv = std::get_if<filters::TvConfig>(&f)) {
    tv->lambda = j.value("lambda", tv->lambda);
    tv->iters = j.value("iters", tv->iters);
  } else if (auto* cf = std::get_if<filters::CfConfig>(&f)) {
    cf->iters = j.value("iters", cf->iters);
  } else {
    auto& mp = std::get<filters::MppcaConfig>(f);
    if (j.contains("block")) mp.block = j.at("block").get<std::array<std::size_t, 3>>();
    mp.stride = j.value("stride", mp.stride);
  }
  try {
    filters::validate(f);
  } catch (const Error& e) {
    detail::config_error(e.what());
  }
  return f;
}

inline json region_to_json(const phantom::Region& r) {
  json j;
  if (r.shape == phantom::Shape::Box) {
    j["shape"] = "box";
    j["min"] = r.lo;
    j["max"] = r.hi;
  } else {
    j["shape"] = "sphere";
    j["center"] = r.center;
    j["radius"] = r.radius;
  }
  j["eigenvalues"] = r.eigenvalues;
  j["direction"] = r.direction;
  j["s0"] = r.s0;
  j["wm"] = r.wm;
  return j;
}

inline phantom::Region region_from_json(const json& j) {
  phantom::Region r;
  const auto shape = j.value("shape", std::string("box"));
  if (shape == "box") {
    r.shape = phantom::Shape::Box;
    r.lo = detail::vec3(j, "min");
    r.hi = detail::vec3(j, "max");
  } else if (shape == "sphere") {
    r.shape = phantom::Shape::Sphere;
    r.center = detail::vec3(j, "center");
    r.radius = j.at("radius").get<double>();
  } else {
    detail::config_error("unknown region shape '" + shape + "'");
  }
  r.eigenvalues = detail::vec3(j, "eigenvalues");
  if (j.contains("direction")) r.direction = detail::vec3(j, "direction");
  r.s0 = j.value("s0", 100.0);
  r.wm = j.value("wm", false);
  return r;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  const auto& d = c.phantom.dims;
  j["phantom"]["dims"] = {d.nx, d.ny, d.nz};
  j["phantom"]["voxel_size"] = c.phantom.voxel_size;
  j["phantom"]["regions"] = json::array();
  for (const auto& r : c.phantom.regions) j["phantom"]["regions"].push_back(region_to_json(r));
  if (c.gradients.file) {
    j["gradients"]["file"] = c.gradients.file->string();
  } else {
    j["gradients"]["b0_count"] = c.gradients.b0_count;
    j["gradients"]["directions"] = c.gradients.directions;
    j["gradients"]["b_value"] = c.gradients.b_value;
  }
  const auto& n = c.noise;
  j["noise"] = {{"sigma0", n.sigma0}, {"pattern", detail::pattern_name(n.pattern)}, {"axis", n.axis},
                {"slope", n.slope},   {"center", n.center},                          {"width", n.width},
                {"amplitude", n.amplitude}};
  j["background_phase"] = {{"amplitude", c.background_phase.amplitude},
                           {"frequency", c.background_phase.frequency},
                           {"ramp", c.background_phase.ramp}};
  j["filters"] = json::array();
  for (const auto& f : c.filters) j["filters"].push_back(filter_to_json(f));
  j["calibration"] = detail::calibration_name(c.calibration);
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["reproduce"]["seeds"] = c.reproduce_seeds;
  j["debug"]["identity_calibration"] = c.identity_calibration;
  return j;
}

inline ExperimentConfig from_json(const json& root) {
  // A manifest embeds the config it was produced from.
  const json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;
  ExperimentConfig c;
  try {
    if (j.contains("phantom")) {
      const auto& p = j.at("phantom");
      if (p.contains("dims")) {
        const auto d = p.at("dims").get<std::array<long long, 3>>();
        if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0) detail::config_error("phantom.dims must be positive");
        c.phantom.dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
      }
      if (p.contains("voxel_size")) c.phantom.voxel_size = p.at("voxel_size").get<VoxelSize>();
      if (p.contains("regions")) {
        c.default_regions = false;
        c.phantom.regions.clear();
        for (const auto& r : p.at("regions")) c.phantom.regions.push_back(region_from_json(r));
      } else {
        const auto vs = c.phantom.voxel_size;
        c.phantom = phantom::default_phantom(c.phantom.dims);
        c.phantom.voxel_size = vs;
      }
    }
    if (j.contains("gradients")) {
      const auto& g = j.at("gradients");
      if (g.contains("file")) {
        c.gradients.file = g.at("file").get<std::string>();
        if (!std::filesystem::exists(*c.gradients.file))
          detail::config_error("gradient table not found: " + c.gradients.file->string());
      }
      c.gradients.b0_count = g.value("b0_count", c.gradients.b0_count);
      c.gradients.directions = g.value("directions", c.gradients.directions);
      c.gradients.b_value = g.value("b_value", c.gradients.b_value);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      c.noise.sigma0 = n.value("sigma0", c.noise.sigma0);
      if (n.contains("pattern")) c.noise.pattern = detail::parse_pattern(n.at("pattern").get<std::string>());
      c.noise.axis = n.value("axis", c.noise.axis);
      c.noise.slope = n.value("slope", c.noise.slope);
      if (n.contains("center")) c.noise.center = detail::vec3(n, "center");
      c.noise.width = n.value("width", c.noise.width);
      c.noise.amplitude = n.value("amplitude", c.noise.amplitude);
      if (c.noise.sigma0 < 0.0) detail::config_error("noise.sigma0 must be >= 0");
      if (c.noise.axis < 0 || c.noise.axis > 2) detail::config_error("noise.axis must be 0, 1 or 2");
    }
    if (j.contains("background_phase")) {
      const auto& b = j.at("background_phase");
      c.background_phase.amplitude = b.value("amplitude", c.background_phase.amplitude);
      if (b.contains("frequency")) c.background_phase.frequency = b.at("frequency").get<std::array<double, 2>>();
      if (b.contains("ramp")) c.background_phase.ramp = b.at("ramp").get<std::array<double, 2>>();
    }
    if (j.contains("filters")) {
      c.filters.clear();
      for (const auto& f : j.at("filters")) c.filters.push_back(filter_from_json(f));
    }
    if (c.filters.empty()) detail::config_error("at least one filter must be listed");
    if (j.contains("calibration")) {
      const auto m = j.at("calibration").get<std::string>();
      if (m == "both") c.calibration = CalibrationMode::Both;
      else if (m == "on") c.calibration = CalibrationMode::On;
      else if (m == "off") c.calibration = CalibrationMode::Off;
      else detail::config_error("calibration must be both, on or off");
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("reproduce")) c.reproduce_seeds = j.at("reproduce").value("seeds", c.reproduce_seeds);
    if (c.reproduce_seeds < 1) detail::config_error("reproduce.seeds must be >= 1");
    if (j.contains("debug")) c.identity_calibration = j.at("debug").value("identity_calibration", false);
  } catch (const json::exception& e) {
    detail::config_error(e.what());
  }
  if (c.output_dir.empty())
    if (const char* env = std::getenv("DWIPC_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (c.output_dir.empty()) detail::config_error("no output_dir in config and DWIPC_OUTPUT_DIR is unset");
  c.noise.seed = c.seed;
  return c;
}

/// Applies `a.b.c=value` to a JSON document. Numeric path segments index arrays.
/// The value is parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) detail::config_error("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = doc.contains("config") && doc.at("config").is_object() ? &doc["config"] : &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) detail::config_error("bad --set key '" + key + "'");
    const bool index = part.find_first_not_of("0123456789") == std::string::npos && node->is_array();
    json& child = index ? (*node)[std::stoul(part)] : (*node)[part];
    if (dot == std::string::npos) {
      child = value;
      return;
    }
    node = &child;
    start = dot + 1;
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Configuration, "cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                                    const std::vector<std::string>& overrides) {
  json doc = path ? read_json(*path) : json::object();
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dwipc::pipeline
