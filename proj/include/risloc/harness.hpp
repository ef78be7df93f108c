#pragma once

#include <string>

#include "risloc/bounds.hpp"
#include "risloc/detection.hpp"
#include "risloc/localization.hpp"

// Monte-Carlo experiment driver. Each sweep point runs independently seeded
// trials (seed ^ trial index); gains, noise, multipath and base profiles are
// redrawn per trial unless the schedule is pinned. Bounds are evaluated per
// trial and RMS-averaged so the CRB columns match the RMSE aggregation.

namespace risloc {

enum class Experiment {
  LosPower,
  NlosPowerMl,
  NlosPowerLc,
  DetectPower,
  Kappa,
  CfoSensitivity,
};

Experiment experiment_from_string(const std::string& name);
std::string experiment_name(Experiment e);

struct SweepPoint {
  std::string sweep_var;
  double value = 0.0;
  double rmse_pos_m = 0.0;
  double crb_pos_m = 0.0;
  double rmse_cfo_hz = 0.0;
  double crb_cfo_hz = 0.0;
  std::vector<double> rmse_aod_az_deg;  // per RIS
  std::vector<double> crb_aod_az_deg;
  std::vector<double> rmse_aod_el_deg;
  std::vector<double> crb_aod_el_deg;
  double pfa = std::numeric_limits<double>::quiet_NaN();
  double pd = std::numeric_limits<double>::quiet_NaN();
  int trials = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  int fix_failures = 0;  // bearing intersections that fell back to the anchor centroid
};

struct SweepResult {
  Experiment experiment = Experiment::LosPower;
  int num_ris = 0;
  std::vector<SweepPoint> points;
  double calibrated_threshold = std::numeric_limits<double>::quiet_NaN();
};

SweepResult run_sweep(const ScenarioConfig& config, Experiment experiment);

// One row per sweep point; header fixed as
// sweep_var,value,rmse_pos_m,crb_pos_m,rmse_cfo_hz,crb_cfo_hz,
// rmse_aod{r}_az_deg,crb_aod{r}_az_deg,rmse_aod{r}_el_deg,crb_aod{r}_el_deg,
// pfa,pd,trials,seed. Values are written with 12 significant digits and
// undefined entries are left empty.
void emit_csv(const SweepResult& result, const std::string& path);
std::string csv_text(const SweepResult& result);

// Single-trial run for the `simulate` subcommand.
struct SimulationDump {
  Observation observation;
  ChannelEstimate estimate;
  PositionEstimate coarse;
  PositionEstimate refined;
  bool refined_valid = false;
  BoundsReport bounds;
};

SimulationDump simulate_once(const ScenarioConfig& config);

// Deterministic per-trial generator seed.
inline std::uint64_t trial_seed(std::uint64_t run_seed, int trial) {
  return run_seed ^ static_cast<std::uint64_t>(trial);
}

}  // namespace risloc
