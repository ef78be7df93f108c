#pragma once

#include <functional>

#include "risloc/channel.hpp"

// Channel-parameter estimators.
//
// All three estimators share the same primitives: a 1-D CFO line search on
// |b(nu)' y|^2 or the code-domain Frobenius objective, Hadamard decoding of
// the CFO-removed signal, a per-RIS AoD maximization of
// |y_r' xbar_r(theta)|^2 / |xbar_r(theta)|^2, and closed-form conditional
// gain estimation. Local refinement is a quasi-Newton descent with
// finite-difference gradients; it never returns a point worse than its
// start.
//
// The AoD coarse stage runs on a uniform grid in direction cosines
// (u = sin(el) (cos az, sin az)), evaluated with a zero-padded 2-D FFT.
// For half-wavelength element spacing the u-grid covers the forward
// hemisphere without holes at a fraction of the array beamwidth. A direct
// az/el grid is available as a reference path.

namespace risloc {

struct ChannelEstimate {
  double cfo_hz = 0.0;
  std::vector<Angle2> aods;  // one per RIS
  std::vector<cplx> gains;   // [alpha_0,] alpha_1 .. alpha_R
  bool los = false;          // hypothesis under which the estimate was made
  double residual = 0.0;     // squared-norm misfit of the fitted model
  bool degenerate = false;
};

struct AodEstimate {
  Angle2 angle;
  cplx gain{0.0, 0.0};
  double objective = 0.0;
  bool degenerate = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct RefineResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimize `f` from `x0` with per-dimension characteristic scales. Stops at
// gradient norm <= tol * (|f| + tol) in scaled coordinates or after
// max_iters. The result never has a larger objective value than f(x0).
RefineResult refine_local(const Objective& f, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& scales, double tol, int max_iters);

// Closed-form conditional path-gain estimate (A'A)^-1 A' y for the model
// matrix built from (nu, theta_1..theta_R), with a leading direct-path
// column when `los` is set. Throws on a rank-deficient model matrix.
Eigen::VectorXcd conditional_gains(const Eigen::VectorXcd& y, double cfo_hz,
                                   const std::vector<Angle2>& aods, bool los,
                                   const ScenarioConfig& scenario, const RisSchedule& schedule,
                                   double power_w);

// Model matrix A(chi_ch) = sqrt(P) [b(nu), x_1 .* b(nu), ..., x_R .* b(nu)]
// (the direct-path column only when `los`).
Eigen::MatrixXcd model_matrix(double cfo_hz, const std::vector<Angle2>& aods, bool los,
                              const ScenarioConfig& scenario, const RisSchedule& schedule,
                              double power_w);

// Squared-norm residual of the fitted model against y.
double model_residual(const Eigen::VectorXcd& y, const ChannelEstimate& estimate,
                      const ScenarioConfig& scenario, const RisSchedule& schedule,
                      double power_w);

// Periodogram CFO estimate: coarse argmax of |b(nu)' y|^2 over the grid
// range, refined locally when grid.refine is set.
double estimate_cfo_los(const Eigen::VectorXcd& y, const ScenarioConfig& scenario,
                        const GridSpec& grid);

// AoD objective |y_r' xbar_r(theta)|^2 / |xbar_r(theta)|^2 for a decoded
// per-block stream y_r.
double aod_objective(const Eigen::VectorXcd& y_r, const Angle2& theta,
                     const ScenarioConfig& scenario, const RisSchedule& schedule, int r);

// Per-RIS AoD estimate from the CFO-removed decoded stream y_r. `refine`
// follows grid.refine; the conditional gain uses the closed form
// xbar' y_r / (sqrt(P) |xbar|^2).
AodEstimate estimate_aod_per_ris(const Eigen::VectorXcd& y_r, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, int r, const GridSpec& grid,
                                 double power_w, bool refine = true);

// Estimator assuming a dominant direct path: CFO periodogram, CFO removal,
// Hadamard decode, per-RIS AoD estimation, conditional gains. `fixed_cfo`
// pins the CFO to the given value and skips its estimation (sensitivity
// studies); the same holds for the two estimators below.
ChannelEstimate estimate_los(const Observation& obs, const ScenarioConfig& scenario,
                             const RisSchedule& schedule, double power_w, const GridSpec& grid,
                             std::optional<double> fixed_cfo = std::nullopt);

// Blocked direct path, maximum-likelihood variant: per CFO candidate the
// signal is decoded and per-RIS AoDs estimated; the candidate minimizing the
// full residual wins, followed by a joint (nu, theta_1..theta_R) refinement.
ChannelEstimate estimate_nlos_ml(const Observation& obs, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w,
                                 const GridSpec& grid,
                                 std::optional<double> fixed_cfo = std::nullopt);

// Blocked direct path, low-complexity variant: 1-D CFO search on
// |C' D(nu)' Y|_F^2 with the unstructured per-block model, then decoding and
// per-RIS AoD estimation as in the dominant-path estimator.
ChannelEstimate estimate_nlos_lc(const Observation& obs, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w,
                                 const GridSpec& grid,
                                 std::optional<double> fixed_cfo = std::nullopt);

// Code-domain CFO objective |C' D(nu)' Y|_F^2 used by the low-complexity
// estimator (C excludes the constant row).
double lc_cfo_objective(const Eigen::MatrixXcd& reshaped, const RisSchedule& schedule,
                        double cfo_hz, double sampling_time_s);

// CFO removal y .* b(-nu) followed by reshape and per-path decode; entry r
// of the result is the stream of path r (0 = direct path).
std::vector<Eigen::VectorXcd> decode_at(const Eigen::VectorXcd& y, double cfo_hz,
                                        const ScenarioConfig& scenario,
                                        const RisSchedule& schedule);

// Ratio of the decoded power leaking into other code bins to the decoded
// power of the path itself, for a noise-free single-path signal at the given
// CFO; the worst pair over all distinct codes is reported. Zero at nu = 0.
double residual_interference(const ScenarioConfig& scenario, const RisSchedule& schedule,
                             double cfo_hz);

}  // namespace risloc
