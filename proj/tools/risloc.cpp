#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "risloc/harness.hpp"

namespace {

using namespace risloc;

ScenarioConfig load_or_default(const std::string& path, std::uint64_t* seed, int* trials,
                               const std::vector<double>& power_dbm) {
  ScenarioConfig config;
  if (!path.empty()) {
    if (!std::filesystem::exists(path))
      throw CLI::ValidationError("config", "config file not found: " + path);
    config = load_config(path);
  }
  if (seed) config.seed = *seed;
  if (trials) config.trials = *trials;
  if (!power_dbm.empty()) config.power_dbm = power_dbm;
  config.validate();
  return config;
}

void print_angle(const char* label, const Angle2& a) {
  std::printf("%s az=%.6f deg, el=%.6f deg\n", label, a.az * 180.0 / M_PI, a.el * 180.0 / M_PI);
}

int run_simulate(const ScenarioConfig& config) {
  const SimulationDump dump = simulate_once(config);
  const double power_dbm = config.power_dbm.front();
  std::printf("single trial at %.1f dBm, seed %llu\n", power_dbm,
              static_cast<unsigned long long>(config.seed));
  std::printf("true position      [%.4f, %.4f, %.4f] m\n", config.ue_position.x(),
              config.ue_position.y(), config.ue_position.z());
  std::printf("true CFO           %.3f Hz\n", config.cfo_true_hz);
  for (int r = 0; r < config.num_ris(); ++r) {
    std::printf("RIS %d ", r + 1);
    print_angle("true AoD ", config.true_aod(r));
  }
  std::printf("estimated CFO      %.3f Hz (error %.3e Hz)\n", dump.estimate.cfo_hz,
              dump.estimate.cfo_hz - config.cfo_true_hz);
  for (int r = 0; r < config.num_ris(); ++r) {
    std::printf("RIS %d ", r + 1);
    print_angle("est. AoD ", dump.estimate.aods[r]);
  }
  std::printf("coarse position    [%.4f, %.4f, %.4f] m (error %.4e m, conditioning %.3e)\n",
              dump.coarse.position.x(), dump.coarse.position.y(), dump.coarse.position.z(),
              (dump.coarse.position - config.ue_position).norm(), dump.coarse.conditioning);
  if (dump.refined_valid)
    std::printf("refined position   [%.4f, %.4f, %.4f] m (error %.4e m)\n",
                dump.refined.position.x(), dump.refined.position.y(), dump.refined.position.z(),
                (dump.refined.position - config.ue_position).norm());
  std::printf("model residual     %.6e\n", dump.estimate.residual);
  std::printf("PEB                %.6e m\n", dump.bounds.peb_m);
  std::printf("CFO bound          %.6e Hz\n", dump.bounds.cfo_bound_hz);
  return 0;
}

int run_crb(const ScenarioConfig& config, const std::string& out_path) {
  std::string out = "hypothesis,power_dbm,peb_m,crb_cfo_hz";
  for (int r = 1; r <= config.num_ris(); ++r)
    out += ",crb_aod" + std::to_string(r) + "_az_deg,crb_aod" + std::to_string(r) + "_el_deg";
  out += "\n";
  std::mt19937_64 rng(config.seed);
  const RisSchedule schedule =
      build_schedule(config.num_ris(), config.num_transmissions, config.layout(),
                     BaseProfileKind::Random, rng, config.schedule.code_length_override);
  const double deg = 180.0 / M_PI;
  char buf[256];
  for (bool los : {true, false}) {
    for (double p : config.power_dbm) {
      const BoundsReport b = scenario_bounds(config, schedule, dbm_to_watt(p), los);
      std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g", los ? "los" : "nlos", p, b.peb_m,
                    b.cfo_bound_hz);
      out += buf;
      for (int r = 0; r < config.num_ris(); ++r) {
        std::snprintf(buf, sizeof(buf), ",%.12g,%.12g", b.aod_az_bound_rad[r] * deg,
                      b.aod_el_bound_rad[r] * deg);
        out += buf;
      }
      out += "\n";
    }
  }
  if (out_path.empty()) {
    std::fputs(out.c_str(), stdout);
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    f << out;
  }
  return 0;
}

int run_sweep_cmd(const ScenarioConfig& config, const std::string& experiment,
                  const std::string& out_path) {
  const SweepResult result = run_sweep(config, experiment_from_string(experiment));
  if (!std::isnan(result.calibrated_threshold))
    std::printf("calibrated threshold: %.12g\n", result.calibrated_threshold);
  if (out_path.empty())
    std::fputs(csv_text(result).c_str(), stdout);
  else
    emit_csv(result, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frugal RIS-aided 3-D localization and CFO synchronization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  bool trials_set = false;
  std::vector<double> power_dbm;

  app.add_option("--config", config_path, "scenario config file (JSON)");
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_option("--seed", seed, "run seed")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--trials", trials, "Monte-Carlo trials per sweep point")
      ->each([&](const std::string&) { trials_set = true; });
  app.add_option("--power-dbm", power_dbm, "transmit power list in dBm")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "run a single trial and dump the estimates");
  std::string experiment;
  auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo sweep and emit CSV");
  sweep->add_option("experiment", experiment,
                    "los_power | nlos_power_ml | nlos_power_lc | detect_power | kappa | "
                    "cfo_sensitivity")
      ->required();
  auto* crb = app.add_subcommand("crb", "emit bound reports for both hypotheses");
  auto* detect = app.add_subcommand("detect", "calibrate the detector and sweep it over power");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ScenarioConfig config = load_or_default(config_path, seed_set ? &seed : nullptr,
                                            trials_set ? &trials : nullptr, power_dbm);
    if (simulate->parsed()) return run_simulate(config);
    if (sweep->parsed()) return run_sweep_cmd(config, experiment, out_path);
    if (crb->parsed()) return run_crb(config, out_path);
    if (detect->parsed()) return run_sweep_cmd(config, "detect_power", out_path);
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
