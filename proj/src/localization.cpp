#include "risloc/localization.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace risloc {

Vec3 intersect_lines(const std::vector<BearingLine>& lines, double* conditioning) {
  if (lines.size() < 2)
    throw std::invalid_argument("intersect_lines: at least two bearing lines are required");
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& line : lines) {
    const Mat3 proj = Mat3::Identity() - line.direction * line.direction.transpose();
    a += proj;
    b += proj * line.anchor;
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  const double smallest = eig.eigenvalues()(0);
  if (conditioning) *conditioning = smallest;
  if (smallest < 1e-9)
    throw std::runtime_error("intersect_lines: bearing lines are (near-)parallel, smallest eigenvalue " +
                             std::to_string(smallest));
  return a.ldlt().solve(b);
}

std::vector<BearingLine> bearing_lines(const ChannelEstimate& estimate,
                                       const ScenarioConfig& scenario) {
  std::vector<BearingLine> lines;
  for (int r = 0; r < static_cast<int>(estimate.aods.size()); ++r) {
    BearingLine line;
    line.anchor = scenario.ris[r].position;
    line.direction =
        direction_vector(estimate.aods[r], scenario.ris[r].rotation, scenario.wavelength_m);
    lines.push_back(line);
  }
  return lines;
}

PositionEstimate coarse_position(const ChannelEstimate& estimate, const ScenarioConfig& scenario) {
  PositionEstimate pe;
  pe.cfo_hz = estimate.cfo_hz;
  pe.position = intersect_lines(bearing_lines(estimate, scenario), &pe.conditioning);
  return pe;
}

PositionEstimate refine_position(const Eigen::VectorXcd& y, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w, const Vec3& p0,
                                 double cfo0_hz, bool los, const GridSpec& grid) {
  if (!p0.allFinite()) throw std::domain_error("refine_position: start position not finite");

  const auto objective = [&](const Eigen::VectorXd& x) -> double {
    const Vec3 p(x(0), x(1), x(2));
    std::vector<Angle2> aods;
    for (int r = 0; r < scenario.num_ris(); ++r) {
      const Vec3 diff = p - scenario.ris[r].position;
      if (diff.norm() < 1e-9) return std::numeric_limits<double>::infinity();
      aods.push_back(compute_aod(p, scenario.ris[r].position, scenario.ris[r].rotation));
    }
    const Eigen::MatrixXcd a = model_matrix(x(3), aods, los, scenario, schedule, power_w);
    const Eigen::VectorXcd gains = a.colPivHouseholderQr().solve(y);
    return (y - a * gains).squaredNorm();
  };

  Eigen::VectorXd x0(4), scales(4);
  x0 << p0.x(), p0.y(), p0.z(), cfo0_hz;
  scales << 0.01, 0.01, 0.01,
      1.0 / (2.0 * M_PI * scenario.num_transmissions * scenario.sampling_time_s);
  const RefineResult res =
      refine_local(objective, x0, scales, grid.refine_tol, grid.refine_max_iters);

  PositionEstimate pe;
  pe.position = Vec3(res.x(0), res.x(1), res.x(2));
  pe.cfo_hz = res.x(3);
  pe.refined = true;
  return pe;
}

}  // namespace risloc
