#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "risloc/geometry.hpp"
#include "risloc/ris_coding.hpp"

// Run configuration. Default-constructed values reproduce the reference
// desk scenario: two 64x64 RISs at half-wavelength spacing, lambda = 1 cm,
// Ts = 10 us, M = 256, noise PSD -174 dBm/Hz with an 8 dB noise figure,
// BS at the origin, UE at [5, 2, 0.5] m, RIS panels at [10, -10, 0] and
// [0, 10, 0] m with z-rotations of 0 and pi.

namespace risloc {

enum class AodSearchMethod { Fft, Grid };
enum class EstimatorKind { Los, NlosMl, NlosLc };
enum class DetectorVariant { Ml, Lc };

struct GridSpec {
  double cfo_min_hz = 0.0;  // 0/0 selects the full +-1/(2 Ts) range
  double cfo_max_hz = 0.0;
  int cfo_points = 512;          // 1-D CFO search (LoS and LC estimators)
  int cfo_points_nlos_ml = 128;  // outer CFO loop of the NLoS ML estimator
  AodSearchMethod aod_method = AodSearchMethod::Fft;
  int aod_fft_size = 256;    // direction-cosine FFT bins per axis
  int aod_grid_points = 64;  // az/el points per axis for the direct grid
  bool refine = true;
  double refine_tol = 1e-8;
  int refine_max_iters = 150;
};

struct RisSpec {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

struct ScheduleConfig {
  int code_length_override = 0;  // 0 = minimal valid length
  BaseProfileKind base_kind = BaseProfileKind::Random;
  bool fixed_profiles = false;  // reuse the same base profiles across trials
};

struct DetectorConfig {
  std::optional<double> threshold;  // set = skip calibration
  double target_pd = 0.99;
  int calibration_trials = 500;
  double calibration_power_dbm = 30.0;
  DetectorVariant variant = DetectorVariant::Ml;
};

struct RicianConfig {
  double kappa_los = 1e12;       // kappa_0
  double kappa_bs_ris = 1e12;    // kappa_Br, shared across RISs
  double kappa_ris_ue = 1e12;    // kappa_Rr, shared across RISs
  std::vector<double> kappa_sweep{0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0};
};

struct ScenarioConfig {
  Vec3 bs_position = Vec3::Zero();
  Vec3 ue_position = Vec3(5.0, 2.0, 0.5);
  std::vector<RisSpec> ris{{Vec3(10.0, -10.0, 0.0), rot_z(0.0)},
                           {Vec3(0.0, 10.0, 0.0), rot_z(M_PI)}};
  int ris_rows = 64;
  int ris_cols = 64;
  double element_spacing_m = 0.005;

  double wavelength_m = 0.01;
  double sampling_time_s = 1e-5;
  int num_transmissions = 256;
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 8.0;
  // Overrides the dB-derived noise power when set; 0 gives noise-free runs.
  std::optional<double> noise_power_override_w;

  double cfo_true_hz = -40e3;
  std::vector<double> power_dbm{0, 5, 10, 15, 20, 25, 30, 35, 40};

  std::uint64_t seed = 1;
  int trials = 100;

  GridSpec grid;
  ScheduleConfig schedule;
  EstimatorKind estimator = EstimatorKind::Los;
  DetectorConfig detector;
  RicianConfig rician;
  std::vector<double> cfo_sweep_hz{0, 50, 100, 200};
  bool position_refinement = true;

  int num_ris() const { return static_cast<int>(ris.size()); }
  RisArrayLayout layout() const { return {ris_rows, ris_cols, element_spacing_m}; }
  // Noise power sigma^2 = N0 / Ts * nf, converted from the dB entries.
  double noise_power_w() const;
  // Known AoA from the BS at RIS r (0-based).
  Angle2 aoa(int r) const;
  // True AoD toward the UE from RIS r (0-based).
  Angle2 true_aod(int r) const;
  double cfo_range_max_hz() const { return 0.5 / sampling_time_s; }
  // FNV-1a hash of the canonical serialized form.
  std::uint64_t hash() const;

  void validate() const;  // throws std::invalid_argument on violations
};

double dbm_to_watt(double dbm);
double db_to_linear(double db);

// JSON (de)serialization. Unknown keys are rejected to catch typos.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& json_text);
std::string dump_config(const ScenarioConfig& config);

}  // namespace risloc
