#pragma once

#include "risloc/estimation.hpp"

// GLRT-based direct-path presence detection. Both hypotheses are fitted with
// their channel estimators; the statistic is half the residual gap and is
// compared with a threshold calibrated by Monte Carlo under the
// direct-path-present hypothesis.

namespace risloc {

struct DetectionResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool los_decision = false;  // true = direct path declared present
  ChannelEstimate estimate_los;
  ChannelEstimate estimate_nlos;

  const ChannelEstimate& chosen() const { return los_decision ? estimate_los : estimate_nlos; }
};

// Log-likelihood-ratio statistic (scaled by sigma^2):
// (1/2) (residual_nlos - residual_los), residuals recomputed from each
// estimate's fitted model on the same observation.
double glrt_statistic(const Eigen::VectorXcd& y, const ChannelEstimate& est_nlos,
                      const ChannelEstimate& est_los, const ScenarioConfig& scenario,
                      const RisSchedule& schedule, double power_w);

// Fit both hypotheses, compute the statistic, threshold it and return the
// estimate matching the decision.
DetectionResult detect_and_estimate(const Observation& obs, const ScenarioConfig& scenario,
                                    const RisSchedule& schedule, double power_w,
                                    const GridSpec& grid, double threshold,
                                    DetectorVariant variant);

struct ThresholdCalibration {
  double threshold = 0.0;
  std::vector<double> statistics;  // empirical distribution under H1
  bool target_reached = true;
};

// Monte Carlo under the direct-path hypothesis at the given power: the
// largest threshold whose detection probability still meets target_pd.
// When even the smallest statistic cannot reach the target the calibration
// is flagged and the best-effort value returned.
ThresholdCalibration calibrate_threshold(const ScenarioConfig& scenario, double power_w,
                                         const GridSpec& grid, int trials, double target_pd,
                                         DetectorVariant variant);

}  // namespace risloc
