#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "dwipc/pipeline/commands.hpp"
#include "test_util.hpp"

using namespace dwipc;
using namespace dwipc::pipeline;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& out) {
  nlohmann::ordered_json j;
  j["phantom"]["dims"] = {24, 24, 6};
  j["gradients"] = {{"b0_count", 2}, {"directions", 12}, {"b_value", 1000}};
  j["filters"] = nlohmann::ordered_json::array({{{"type", "TV"}}});
  j["output_dir"] = out.string();
  j["reproduce"]["seeds"] = 1;
  return from_json(j);
}

std::size_t files_in(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DWIPC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  nlohmann::ordered_json j{{"output_dir", "/tmp/x"}};
  const auto c = from_json(j);
  EXPECT_EQ(c.phantom.dims, (Dims{64, 64, 8}));
  EXPECT_EQ(c.gradient_table().size(), 33u);
  EXPECT_EQ(c.filters.size(), 3u);
  EXPECT_EQ(c.phantom.regions.size(), 3u);
  const auto again = from_json(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, ManifestIsAcceptedAsConfig) {
  test::TempDir dir;
  const auto c = small_config(dir.path);
  const auto m = manifest_json(c, "simulate");
  EXPECT_EQ(to_json(from_json(m)), to_json(c));
}

TEST(Config, Overrides) {
  nlohmann::ordered_json doc{{"output_dir", "/tmp/x"}, {"filters", {{{"type", "TV"}, {"lambda", 2.0}}}}};
  apply_override(doc, "noise.sigma0=2.5");
  apply_override(doc, "filters.0.lambda=0.5");
  apply_override(doc, "calibration=on");
  const auto c = from_json(doc);
  EXPECT_EQ(c.noise.sigma0, 2.5);
  EXPECT_EQ(std::get<filters::TvConfig>(c.filters[0]).lambda, 0.5);
  EXPECT_EQ(c.calibration, CalibrationMode::On);
  EXPECT_THROW(apply_override(doc, "novalue"), Error);
}

TEST(Config, Errors) {
  const auto kind_of = [](const nlohmann::ordered_json& j) {
    try {
      from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of({{"output_dir", "/tmp/x"}, {"filters", {{{"type", "Wiener"}}}}}), ErrorKind::Configuration);
  EXPECT_EQ(kind_of({{"output_dir", "/tmp/x"}, {"filters", nlohmann::ordered_json::array()}}), ErrorKind::Configuration);
  EXPECT_EQ(kind_of({{"output_dir", "/tmp/x"}, {"noise", {{"pattern", "pink"}}}}), ErrorKind::Configuration);
  try {
    filter_by_name("BM3D");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("TV, CF, MPPCA"), std::string::npos);
  }
}

TEST(Config, OutputDirFromEnvironment) {
  ::setenv("DWIPC_OUTPUT_DIR", "/tmp/from_env", 1);
  EXPECT_EQ(from_json(nlohmann::ordered_json::object()).output_dir, fs::path("/tmp/from_env"));
  ::unsetenv("DWIPC_OUTPUT_DIR");
  EXPECT_THROW(from_json(nlohmann::ordered_json::object()), Error);
}

TEST(Naming, MethodDirectories) {
  EXPECT_EQ(method_name(filters::TvConfig{}, true), "TV-new");
  EXPECT_EQ(method_name(filters::MppcaConfig{}, false), "MPPCA");
  EXPECT_EQ(volume_name("vol", 7), "vol_0007");
}

TEST(Simulate, DefaultFileCounts) {
  test::TempDir dir;
  nlohmann::ordered_json j{{"output_dir", dir.path.string()}};
  const auto cfg = from_json(j);
  cmd_simulate(cfg);
  EXPECT_EQ(files_in(dir.path / "noisy", ".raw"), 66u);
  EXPECT_EQ(files_in(dir.path / "groundtruth" / "dwi", ".raw"), 33u);
  for (const char* f : {"sigma", "fa", "wm_mask", "background_mask", "tensors", "background_phase"})
    EXPECT_TRUE(fs::exists(dir.path / "groundtruth" / (std::string(f) + ".raw"))) << f;
  const auto m = test::read_json(dir.path / "manifest.json");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_FALSE(m["generator"].get<std::string>().empty());
}

TEST(Simulate, ZeroNoiseMatchesCleanSignal) {
  test::TempDir dir;
  auto cfg = small_config(dir.path);
  cfg.noise.sigma0 = 0.0;
  cmd_simulate(cfg);
  const auto grads = load_run_gradients(Layout{dir.path});
  const auto noisy = load_complex_series(dir.path / "noisy", grads);
  const auto clean = load_magnitude_series(dir.path / "groundtruth" / "dwi", grads);
  const auto bg = load_volume(dir.path / "groundtruth" / "background_phase");
  for (std::size_t k = 0; k < grads.size(); k += 5)
    for (std::size_t i = 0; i < bg.size(); ++i) {
      ASSERT_NEAR(noisy.volumes[k].re[i], clean.volumes[k][i] * std::cos(bg[i]), 1e-4);
      ASSERT_NEAR(noisy.volumes[k].im[i], clean.volumes[k][i] * std::sin(bg[i]), 1e-4);
    }
}

TEST(Simulate, SeedRepeatIsByteIdentical) {
  test::TempDir a, b;
  cmd_simulate(small_config(a.path));
  cmd_simulate(small_config(b.path));
  for (const auto& e : fs::directory_iterator(a.path / "noisy"))
    ASSERT_EQ(test::read_bytes(e.path()), test::read_bytes(b.path / "noisy" / e.path().filename()));
}

TEST(Pipeline, CorrectFitEvaluate) {
  test::TempDir dir;
  const auto cfg = small_config(dir.path);
  cmd_simulate(cfg);
  const auto outcomes = cmd_correct(cfg, filters::TvConfig{}, CalibrationMode::Both);
  ASSERT_EQ(outcomes.size(), 2u);
  EXPECT_TRUE(fs::is_directory(dir.path / "TV"));
  EXPECT_TRUE(fs::is_directory(dir.path / "TV-new"));
  for (const auto& o : outcomes) EXPECT_LT(o.max_modulus_error, 1e-9);
  EXPECT_TRUE(fs::exists(dir.path / "TV-new" / "timing.log"));
  EXPECT_EQ(files_in(dir.path / "TV-new" / "noisefloor", ".raw"), 14u);

  cmd_fit(cfg, std::nullopt, true);
  for (const char* m : {"MAG", "TV", "TV-new"}) {
    const auto fa = load_volume(dir.path / m / "fa");
    for (double v : fa) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
  const auto ev = cmd_evaluate(cfg);
  ASSERT_EQ(ev.methods.size(), 3u);
  EXPECT_EQ(ev.methods[0].label, "MAG");
  const auto mae = test::read_text(dir.path / "metrics" / "mae.csv");
  EXPECT_EQ(mae.rfind("label,index,value\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir.path / "renders" / "TV-new_fa.ppm"));
  EXPECT_TRUE(fs::exists(dir.path / "metrics" / "summary.json"));

  const auto before = test::read_bytes(dir.path / "metrics" / "mae.csv");
  cmd_evaluate(cfg);
  EXPECT_EQ(test::read_bytes(dir.path / "metrics" / "mae.csv"), before);
}

TEST(Pipeline, IdenticalEstimateGivesZeroRows) {
  test::TempDir dir;
  const auto cfg = small_config(dir.path);
  cmd_simulate(cfg);
  const auto grads = load_run_gradients(Layout{dir.path});
  save_series(load_magnitude_series(dir.path / "groundtruth" / "dwi", grads), dir.path / "TRUTH" / "dwi");
  const auto ev = cmd_evaluate(cfg);
  const auto* t = ev.find("TRUTH");
  ASSERT_NE(t, nullptr);
  for (const auto& [i, v] : t->mae.values) EXPECT_EQ(v, 0.0);
}

TEST(Pipeline, FitWithoutGradientsIsConfigurationError) {
  test::TempDir dir;
  const auto cfg = small_config(dir.path);
  try {
    cmd_fit(cfg, std::nullopt, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Configuration);
  }
}

TEST(Reproduce, AllVariantsReported) {
  test::TempDir dir;
  nlohmann::ordered_json j;
  j["phantom"]["dims"] = {24, 24, 6};
  j["gradients"] = {{"b0_count", 2}, {"directions", 12}};
  j["output_dir"] = dir.path.string();
  j["reproduce"]["seeds"] = 1;
  const auto cfg = from_json(j);
  const auto report = cmd_reproduce(cfg);
  std::size_t a1 = 0;
  for (const auto& c : report.criteria) a1 += c.id == "A1";
  EXPECT_EQ(a1, 3u);
  const auto mae = test::read_text(dir.path / "seed_1" / "metrics" / "mae.csv");
  for (const char* label : {"MAG,", "TV,", "TV-new,", "CF,", "CF-new,", "MPPCA,", "MPPCA-new,"})
    EXPECT_NE(mae.find(std::string("\n") + label), std::string::npos) << label;
  EXPECT_TRUE(test::read_json(dir.path / "report.json").contains("criteria"));
}

TEST(Reproduce, IdentityCalibrationFailsA1) {
  test::TempDir dir;
  auto cfg = small_config(dir.path);
  cfg.identity_calibration = true;
  const auto report = cmd_reproduce(cfg);
  for (const auto& c : report.criteria)
    if (c.id == "A1") EXPECT_EQ(c.status, "fail");
  EXPECT_FALSE(report.passed());
}

TEST(Reproduce, ZeroNoiseSkipsOrderingCriteria) {
  test::TempDir dir;
  auto cfg = small_config(dir.path);
  cfg.noise.sigma0 = 0.0;
  const auto report = cmd_reproduce(cfg);
  for (const auto& c : report.criteria)
    if (c.id == "A1" || c.id == "A2" || c.id == "A3") EXPECT_EQ(c.status, "skipped") << c.id;
}

TEST(Cli, ExitCodes) {
  test::TempDir dir;
  const std::string out = "--set output_dir=" + dir.path.string() + " phantom.dims=[24,24,6] gradients.directions=12";
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli(out + " correct --filter Wiener"), 2);
  EXPECT_EQ(run_cli("--config " + (dir.path / "missing.json").string() + " simulate"), 2);
  EXPECT_EQ(run_cli(out + " evaluate"), 3);
  EXPECT_EQ(run_cli(out + " simulate"), 0);
  EXPECT_EQ(run_cli(out + " correct --filter TV --calibrated on"), 0);
  EXPECT_TRUE(fs::is_directory(dir.path / "TV-new"));
  EXPECT_FALSE(fs::exists(dir.path / "TV"));
  EXPECT_EQ(run_cli(out + " fit --input TV-new"), 0);
  EXPECT_TRUE(fs::exists(dir.path / "TV-new" / "fa.raw"));
  fs::remove_all(dir.path / "groundtruth");
  EXPECT_EQ(run_cli(out + " evaluate"), 3);
}

TEST(Cli, StrictReproduceFailsOnSabotage) {
  test::TempDir dir;
  const std::string out = "--jobs 2 --set output_dir=" + dir.path.string() +
                          " phantom.dims=[24,24,6] gradients.directions=12 reproduce.seeds=1"
                          " 'filters=[{\"type\":\"TV\"}]' debug.identity_calibration=true";
  EXPECT_EQ(run_cli(out + " reproduce --strict"), 4);
}
