#pragma once

#include <optional>
#include <random>

#include "risloc/ris_coding.hpp"
#include "risloc/scenario.hpp"

// Received-signal synthesis. The noise-free observation over M transmissions
// is y = sqrt(P) (a0 b(nu) [LoS present] + sum_r a_r x_r(theta_r) .* b(nu)),
// where b(nu) is the CFO phase ramp and x_r is the coded per-RIS response.
// The multipath variant replaces the deterministic BS-UE, BS-RIS and RIS-UE
// links with Rician draws that converge to the clean model as the kappa
// factors grow.

namespace risloc {

struct PathGains {
  std::optional<cplx> los;  // alpha_0, absent in NLoS scenarios
  std::vector<cplx> ris;    // alpha_r, r = 1..R
};

struct RicianParams {
  double kappa_los = 1e12;
  double kappa_bs_ris = 1e12;
  double kappa_ris_ue = 1e12;
};

struct Observation {
  Eigen::VectorXcd y;
  double true_cfo_hz = 0.0;
  PathGains true_gains;
  bool los_present = true;
  std::optional<RicianParams> multipath;
  std::uint64_t scenario_hash = 0;
};

// CFO phase ramp [b]_m = exp(j 2 pi m Ts nu), m = 0..M-1.
Eigen::VectorXcd cfo_vector(double cfo_hz, int num_samples, double sampling_time_s);

// Free-space path gains: |a0| = lambda / (4 pi d_bs_ue),
// |a_r| = lambda^2 / (16 pi^2 d_bs_ris d_ris_ue), phases uniform on [0, 2pi).
PathGains fspl_gains(const ScenarioConfig& scenario, std::mt19937_64& rng);

// Per-block uncoded response of RIS r (1-based):
// [xbar_r]_k = (a(phi_r) .* P_r[:,k])' a(theta), length M/L.
Eigen::VectorXcd uncoded_response(const Angle2& theta, const ScenarioConfig& scenario,
                                  const RisSchedule& schedule, int r);

// Full coded response [x_r]_m = (a(phi_r) .* gamma_{r,m})' a(theta), length M.
Eigen::VectorXcd ris_response(const Angle2& theta, const ScenarioConfig& scenario,
                              const RisSchedule& schedule, int r);

// Noise-free signal for the given parameters (no noise, no metadata).
Eigen::VectorXcd noise_free_signal(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                   double power_w, double cfo_hz, const PathGains& gains,
                                   const std::vector<Angle2>& aods);

// Draw a CN(0, sigma2) sample: real and imaginary parts N(0, sigma2 / 2).
cplx complex_gaussian(double sigma2, std::mt19937_64& rng);

// Synthesize a received vector at the true UE position. With sigma2 = 0 the
// output is deterministic given the gains.
Observation synthesize(const ScenarioConfig& scenario, const RisSchedule& schedule,
                       double power_w, double cfo_hz, bool los_present,
                       const PathGains& gains, std::mt19937_64& rng);

// Rician multipath variant; diffuse components are drawn once per call
// (the channel is coherent across the M transmissions).
Observation synthesize_multipath(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                 double power_w, double cfo_hz, bool los_present,
                                 const PathGains& gains, const RicianParams& rician,
                                 std::mt19937_64& rng);

}  // namespace risloc
