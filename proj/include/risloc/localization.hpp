#pragma once

#include "risloc/estimation.hpp"

// Position estimation from per-RIS AoDs: least-squares intersection of the
// bearing lines anchored at the RIS centers, optionally refined on the
// raw-signal objective with the path gains profiled out.

namespace risloc {

struct BearingLine {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit norm
};

struct PositionEstimate {
  Vec3 position = Vec3::Zero();
  double cfo_hz = 0.0;
  bool refined = false;
  double conditioning = 0.0;  // smallest eigenvalue of sum(I - u u')
};

// p = (sum_r (I - u_r u_r'))^-1 sum_r (I - u_r u_r') a_r; minimizes the sum
// of squared point-to-line distances. Throws on (near-)parallel lines.
Vec3 intersect_lines(const std::vector<BearingLine>& lines, double* conditioning = nullptr);

// Bearing lines implied by a channel estimate for the given scenario.
std::vector<BearingLine> bearing_lines(const ChannelEstimate& estimate,
                                       const ScenarioConfig& scenario);

// Coarse position for a channel estimate (intersection only).
PositionEstimate coarse_position(const ChannelEstimate& estimate, const ScenarioConfig& scenario);

// Local minimization of the location-domain objective over (p, nu) starting
// from (p0, nu0); AoDs are tied to p through the scenario geometry and gains
// are profiled out in closed form. The raw-signal residual never increases
// relative to the start.
PositionEstimate refine_position(const Eigen::VectorXcd& y, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w, const Vec3& p0,
                                 double cfo0_hz, bool los, const GridSpec& grid);

}  // namespace risloc
