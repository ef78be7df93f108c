#pragma once

#include "risloc/channel.hpp"

// Fisher information analysis. Channel-domain parameters are ordered
// [Re a_0, Im a_0, ..., Re a_R, Im a_R, nu, az_1, el_1, ..., az_R, el_R]
// (the a_0 pair only under the direct-path hypothesis); position-domain
// parameters replace the AoDs with the UE position, [gains..., nu, p].
// F_pos = J' F_ch J with J[m][n] = d(eta_ch[m]) / d(eta[n]).

namespace risloc {

struct TruthChannel {
  double cfo_hz = 0.0;
  PathGains gains;
  bool los = true;
};

struct FimChannel {
  Eigen::MatrixXd f;  // (4R+3) x (4R+3) under LoS, (4R+1) x (4R+1) without
  bool los = true;
  int num_ris = 0;
};

struct FimPosition {
  Eigen::MatrixXd f;  // (2R+6) or (2R+4) square
  bool los = true;
  int num_ris = 0;
};

struct BoundsReport {
  double peb_m = 0.0;
  double cfo_bound_hz = 0.0;
  std::vector<double> aod_az_bound_rad;
  std::vector<double> aod_el_bound_rad;
  double condition_number = 0.0;      // of the equilibrated positional FIM
  double smallest_eigenvalue = 0.0;   // same scaling
};

struct IdentifiabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Analytic channel-domain FIM (2/sigma^2) sum_m Re{dz_m dz_m^H} with the
// derivatives of the noise-free signal at the true parameters; AoDs are
// evaluated at the scenario geometry.
FimChannel fim_channel(const ScenarioConfig& scenario, const RisSchedule& schedule,
                       double power_w, const TruthChannel& truth);

// J with identity blocks for gains and CFO and the AoD-vs-position blocks of
// the scenario geometry. Throws when the UE sits on a RIS boresight
// (azimuth derivative singular) or coincides with a RIS.
Eigen::MatrixXd jacobian_channel_to_position(const ScenarioConfig& scenario, bool los);

// Positional FIM via the sandwich identity.
FimPosition fim_position(const ScenarioConfig& scenario, const RisSchedule& schedule,
                         double power_w, const TruthChannel& truth);

// Positional FIM from direct derivatives of the signal w.r.t. (gains, nu, p);
// equals the sandwich form up to roundoff and serves as its cross-check.
FimPosition fim_position_direct(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                double power_w, const TruthChannel& truth);

// PEB, CFO and per-AoD bounds. Throws IdentifiabilityError when the
// positional FIM is singular (e.g. a single RIS without the direct path).
BoundsReport bounds_report(const FimChannel& fim_ch, const FimPosition& fim_pos);

// Convenience: bounds for the scenario at the given power under the chosen
// hypothesis, using FSPL gain magnitudes with zero phases.
BoundsReport scenario_bounds(const ScenarioConfig& scenario, const RisSchedule& schedule,
                             double power_w, bool los);

}  // namespace risloc
