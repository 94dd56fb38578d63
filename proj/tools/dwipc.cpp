// dwipc: simulate, phase-correct, fit and evaluate complex DW series.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dwipc/pipeline/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kAcceptance = 4 };

int exit_code_for(dwipc::ErrorKind kind) {
  using dwipc::ErrorKind;
  switch (kind) {
    case ErrorKind::Configuration:
    case ErrorKind::InvalidArgument: return kUsage;
    default: return kData;
  }
}

dwipc::pipeline::CalibrationMode parse_mode(const std::string& s, dwipc::pipeline::CalibrationMode fallback) {
  using dwipc::pipeline::CalibrationMode;
  if (s.empty()) return fallback;
  if (s == "on" || s == "true") return CalibrationMode::On;
  if (s == "off" || s == "false") return CalibrationMode::Off;
  if (s == "both") return CalibrationMode::Both;
  throw dwipc::Error(dwipc::ErrorKind::Configuration, "--calibrated expects on, off or both");
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = dwipc::pipeline;

  CLI::App app{"Phase correction with quadrant calibration for complex diffusion MRI"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  unsigned jobs = 1;
  app.add_option("--config", config_path, "Experiment config (JSON); a run manifest also works");
  app.add_option("--set", overrides, "Override a config key, e.g. --set noise.sigma0=2.5")->take_all();
  app.add_option("--jobs", jobs, "Worker threads per stage (0 = all cores)")->default_val(1);

  auto* simulate = app.add_subcommand("simulate", "Generate phantom, noisy complex series and ground truth");

  auto* correct = app.add_subcommand("correct", "Phase-correct the noisy series with one filter");
  std::vector<std::string> filter_names;
  std::string calibrated;
  correct->add_option("--filter", filter_names, "TV, CF or MPPCA (default: every configured filter)");
  correct->add_option("--calibrated", calibrated, "on, off or both (default: config 'calibration')");

  auto* fit = app.add_subcommand("fit", "Fit tensors and FA for corrected series");
  std::optional<std::string> fit_input;
  bool fit_mag = false;
  fit->add_option("--input", fit_input, "Method directory to fit (default: all, plus MAG)");
  fit->add_flag("--mag", fit_mag, "Also fit the uncorrected magnitude baseline");

  auto* evaluate = app.add_subcommand("evaluate", "MAE/ME metrics, error maps and renders for every method");

  auto* reproduce = app.add_subcommand("reproduce", "Run the full comparison and write report.json");
  bool strict = false;
  reproduce->add_flag("--strict", strict, "Exit with status 4 when an acceptance criterion fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = pl::load_config(config_path ? std::optional<std::filesystem::path>(*config_path) : std::nullopt, overrides);
    const dwipc::Exec exec{jobs};

    if (*simulate) {
      pl::cmd_simulate(cfg, exec);
      std::cout << "simulated " << cfg.gradient_table().size() << " volumes into " << cfg.output_dir.string() << '\n';
    } else if (*correct) {
      std::vector<dwipc::filters::FilterConfig> selected;
      if (filter_names.empty()) selected = cfg.filters;
      for (const auto& name : filter_names) {
        auto f = pl::filter_by_name(name);
        // Prefer the configured settings for this filter type.
        for (const auto& c : cfg.filters)
          if (dwipc::filters::name_of(c) == name) f = c;
        selected.push_back(f);
      }
      const auto mode = parse_mode(calibrated, cfg.calibration);
      for (const auto& f : selected)
        for (const auto& o : pl::cmd_correct(cfg, f, mode, exec))
          std::cout << o.method << ": " << o.noise_floor_voxels << " noise-floor voxels, max modulus error "
                    << o.max_modulus_error << '\n';
    } else if (*fit) {
      pl::cmd_fit(cfg, fit_input ? std::optional<std::filesystem::path>(*fit_input) : std::nullopt, fit_mag, exec);
    } else if (*evaluate) {
      const auto ev = pl::cmd_evaluate(cfg, exec);
      for (const auto& m : ev.methods)
        std::printf("%-12s mean MAE %.6g  mean ME %+.6g\n", m.label.c_str(), m.mae.mean(), m.me.mean());
    } else if (*reproduce) {
      const auto report = pl::cmd_reproduce(cfg, exec);
      for (const auto& c : report.criteria)
        std::cout << c.id << (c.subject.empty() ? "" : " " + c.subject) << ": " << c.status << '\n';
      std::cout << "report: " << (cfg.output_dir / "report.json").string() << '\n';
      if (strict && !report.passed()) return kAcceptance;
    }
  } catch (const dwipc::Error& e) {
    std::cerr << "dwipc: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dwipc: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
