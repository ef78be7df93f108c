#include "risloc/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace risloc {

namespace {

// Columns of dz/deta_ch for the noise-free signal at the truth. The CFO
// column is j 2 pi m Ts z_m; gain columns are the (possibly coded) path
// responses times b(nu); AoD columns differentiate the steering vector.
Eigen::MatrixXcd channel_derivatives(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                     double power_w, const TruthChannel& truth) {
  const int m = scenario.num_transmissions;
  const int num_ris = schedule.num_ris();
  const bool los = truth.los && truth.gains.los.has_value();
  const int num_gains = num_ris + (los ? 1 : 0);
  const int dim = 2 * num_gains + 1 + 2 * num_ris;

  const double sqrt_p = std::sqrt(power_w);
  const Eigen::VectorXcd b = cfo_vector(truth.cfo_hz, m, scenario.sampling_time_s);
  const RisArrayLayout layout = scenario.layout();
  const cplx j1(0.0, 1.0);

  std::vector<Angle2> aods;
  for (int r = 0; r < num_ris; ++r) aods.push_back(scenario.true_aod(r));

  Eigen::MatrixXcd d(m, dim);
  int col = 0;

  std::vector<Eigen::VectorXcd> responses;  // x_r .* b
  if (los) responses.push_back(b);
  for (int r = 1; r <= num_ris; ++r)
    responses.push_back(ris_response(aods[r - 1], scenario, schedule, r).cwiseProduct(b));

  for (const auto& resp : responses) {
    d.col(col++) = sqrt_p * resp;        // d/d Re(alpha)
    d.col(col++) = j1 * sqrt_p * resp;   // d/d Im(alpha)
  }

  // z = sqrt(P) sum alpha_r (x_r .* b); each sample carries exp(j 2 pi m Ts nu)
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(m);
  {
    int idx = 0;
    if (los) z += *truth.gains.los * responses[idx++] * sqrt_p;
    for (int r = 1; r <= num_ris; ++r) z += truth.gains.ris[r - 1] * responses[idx++] * sqrt_p;
  }
  for (int i = 0; i < m; ++i)
    d(i, col) = j1 * (2.0 * M_PI * i * scenario.sampling_time_s) * z(i);
  ++col;

  for (int r = 1; r <= num_ris; ++r) {
    Eigen::VectorXcd da_az, da_el;
    steering_derivatives(aods[r - 1], layout, scenario.wavelength_m, da_az, da_el);
    const Eigen::VectorXcd a_phi =
        steering_vector(scenario.aoa(r - 1), layout, scenario.wavelength_m);
    const Eigen::MatrixXcd effective = a_phi.asDiagonal() * schedule.base_profiles[r - 1];
    const cplx gain = sqrt_p * truth.gains.ris[r - 1];
    d.col(col++) =
        gain * schedule.expand(r, effective.transpose() * da_az).cwiseProduct(b);
    d.col(col++) =
        gain * schedule.expand(r, effective.transpose() * da_el).cwiseProduct(b);
  }
  return d;
}

Eigen::MatrixXd fim_from_derivatives(const Eigen::MatrixXcd& d, double sigma2) {
  if (sigma2 <= 0.0) throw std::domain_error("fim: noise power must be positive");
  return (2.0 / sigma2) * (d.adjoint() * d).real();
}

}  // namespace

FimChannel fim_channel(const ScenarioConfig& scenario, const RisSchedule& schedule,
                       double power_w, const TruthChannel& truth) {
  FimChannel out;
  out.los = truth.los && truth.gains.los.has_value();
  out.num_ris = schedule.num_ris();
  out.f = fim_from_derivatives(channel_derivatives(scenario, schedule, power_w, truth),
                               scenario.noise_power_w());
  return out;
}

Eigen::MatrixXd jacobian_channel_to_position(const ScenarioConfig& scenario, bool los) {
  const int num_ris = scenario.num_ris();
  const int num_gains = num_ris + (los ? 1 : 0);
  const int rows = 2 * num_gains + 1 + 2 * num_ris;  // eta_ch
  const int cols = 2 * num_gains + 1 + 3;            // eta
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(rows, cols);
  j.topLeftCorner(2 * num_gains + 1, 2 * num_gains + 1).setIdentity();
  for (int r = 0; r < num_ris; ++r) {
    const Eigen::Matrix<double, 2, 3> block = aod_position_jacobian(
        scenario.ue_position, scenario.ris[r].position, scenario.ris[r].rotation);
    j.block<2, 3>(2 * num_gains + 1 + 2 * r, 2 * num_gains + 1) = block;
  }
  return j;
}

FimPosition fim_position(const ScenarioConfig& scenario, const RisSchedule& schedule,
                         double power_w, const TruthChannel& truth) {
  const FimChannel ch = fim_channel(scenario, schedule, power_w, truth);
  const Eigen::MatrixXd j = jacobian_channel_to_position(scenario, ch.los);
  FimPosition out;
  out.los = ch.los;
  out.num_ris = ch.num_ris;
  out.f = j.transpose() * ch.f * j;
  return out;
}

FimPosition fim_position_direct(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                double power_w, const TruthChannel& truth) {
  const Eigen::MatrixXcd d_ch = channel_derivatives(scenario, schedule, power_w, truth);
  const bool los = truth.los && truth.gains.los.has_value();
  const int num_ris = schedule.num_ris();
  const int num_gains = num_ris + (los ? 1 : 0);
  const int head = 2 * num_gains + 1;

  Eigen::MatrixXcd d(d_ch.rows(), head + 3);
  d.leftCols(head) = d_ch.leftCols(head);
  d.rightCols(3).setZero();
  for (int r = 0; r < num_ris; ++r) {
    const Eigen::Matrix<double, 2, 3> block = aod_position_jacobian(
        scenario.ue_position, scenario.ris[r].position, scenario.ris[r].rotation);
    for (int axis = 0; axis < 3; ++axis)
      d.col(head + axis) += d_ch.col(head + 2 * r) * block(0, axis) +
                            d_ch.col(head + 2 * r + 1) * block(1, axis);
  }

  FimPosition out;
  out.los = los;
  out.num_ris = num_ris;
  out.f = fim_from_derivatives(d, scenario.noise_power_w());
  return out;
}

BoundsReport bounds_report(const FimChannel& fim_ch, const FimPosition& fim_pos) {
  const int num_ris = fim_pos.num_ris;
  const int num_gains = num_ris + (fim_pos.los ? 1 : 0);
  const int head = 2 * num_gains + 1;
  const Eigen::MatrixXd& f = fim_pos.f;

  // Equilibrate before the singularity test: parameter units differ by many
  // orders of magnitude, so a raw eigenvalue ratio would misfire.
  const Eigen::VectorXd diag = f.diagonal();
  if ((diag.array() <= 0.0).any())
    throw IdentifiabilityError("bounds_report: positional FIM has a non-positive diagonal entry");
  const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = scale.asDiagonal() * f * scale.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 1e-10 * hi)
    throw IdentifiabilityError(
        "bounds_report: positional FIM is singular; the scenario does not identify the position");

  const Eigen::MatrixXd inv_scaled =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  const Eigen::MatrixXd inv = scale.asDiagonal() * inv_scaled * scale.asDiagonal();

  BoundsReport report;
  report.peb_m = std::sqrt(inv.block(head, head, 3, 3).trace());
  report.cfo_bound_hz = std::sqrt(inv(head - 1, head - 1));
  report.condition_number = hi / lo;
  report.smallest_eigenvalue = lo;

  // Per-AoD bounds live in the channel domain.
  const Eigen::MatrixXd ch_inv = fim_ch.f.inverse();
  for (int r = 0; r < num_ris; ++r) {
    report.aod_az_bound_rad.push_back(std::sqrt(ch_inv(head + 2 * r, head + 2 * r)));
    report.aod_el_bound_rad.push_back(std::sqrt(ch_inv(head + 2 * r + 1, head + 2 * r + 1)));
  }
  return report;
}

BoundsReport scenario_bounds(const ScenarioConfig& scenario, const RisSchedule& schedule,
                             double power_w, bool los) {
  TruthChannel truth;
  truth.cfo_hz = scenario.cfo_true_hz;
  truth.los = los;
  const double lambda = scenario.wavelength_m;
  const double d_bs_ue = (scenario.ue_position - scenario.bs_position).norm();
  if (los) truth.gains.los = cplx(lambda / (4.0 * M_PI * d_bs_ue), 0.0);
  for (int r = 0; r < scenario.num_ris(); ++r) {
    const double d_bs_ris = (scenario.ris[r].position - scenario.bs_position).norm();
    const double d_ris_ue = (scenario.ue_position - scenario.ris[r].position).norm();
    truth.gains.ris.push_back(
        cplx(lambda * lambda / (16.0 * M_PI * M_PI * d_bs_ris * d_ris_ue), 0.0));
  }
  return bounds_report(fim_channel(scenario, schedule, power_w, truth),
                       fim_position(scenario, schedule, power_w, truth));
}

}  // namespace risloc
