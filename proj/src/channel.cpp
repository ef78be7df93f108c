#include "risloc/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace risloc {

Eigen::VectorXcd cfo_vector(double cfo_hz, int num_samples, double sampling_time_s) {
  Eigen::VectorXcd b(num_samples);
  const double step = 2.0 * M_PI * sampling_time_s * cfo_hz;
  for (int m = 0; m < num_samples; ++m) b(m) = std::polar(1.0, step * m);
  return b;
}

PathGains fspl_gains(const ScenarioConfig& scenario, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  const double lambda = scenario.wavelength_m;
  const double d_bs_ue = (scenario.ue_position - scenario.bs_position).norm();
  if (d_bs_ue <= 0.0) throw std::domain_error("fspl_gains: BS and UE coincide");

  PathGains g;
  g.los = std::polar(lambda / (4.0 * M_PI * d_bs_ue), phase(rng));
  for (int r = 0; r < scenario.num_ris(); ++r) {
    const double d_bs_ris = (scenario.ris[r].position - scenario.bs_position).norm();
    const double d_ris_ue = (scenario.ue_position - scenario.ris[r].position).norm();
    if (d_bs_ris <= 0.0 || d_ris_ue <= 0.0)
      throw std::domain_error("fspl_gains: zero-length propagation path");
    const double mag = lambda * lambda / (16.0 * M_PI * M_PI * d_bs_ris * d_ris_ue);
    g.ris.push_back(std::polar(mag, phase(rng)));
  }
  return g;
}

Eigen::VectorXcd uncoded_response(const Angle2& theta, const ScenarioConfig& scenario,
                                  const RisSchedule& schedule, int r) {
  if (r < 1 || r > schedule.num_ris()) throw std::out_of_range("uncoded_response: RIS index");
  const RisArrayLayout layout = scenario.layout();
  const Eigen::VectorXcd a_theta = steering_vector(theta, layout, scenario.wavelength_m);
  const Eigen::VectorXcd a_phi = steering_vector(scenario.aoa(r - 1), layout, scenario.wavelength_m);
  const Eigen::VectorXcd weighted = a_phi.cwiseProduct(a_theta);
  return schedule.base_profiles[r - 1].transpose() * weighted;
}

Eigen::VectorXcd ris_response(const Angle2& theta, const ScenarioConfig& scenario,
                              const RisSchedule& schedule, int r) {
  return schedule.expand(r, uncoded_response(theta, scenario, schedule, r));
}

Eigen::VectorXcd noise_free_signal(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                   double power_w, double cfo_hz, const PathGains& gains,
                                   const std::vector<Angle2>& aods) {
  const int m = scenario.num_transmissions;
  const Eigen::VectorXcd b = cfo_vector(cfo_hz, m, scenario.sampling_time_s);
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(m);
  if (gains.los) z += *gains.los * b;
  for (int r = 1; r <= schedule.num_ris(); ++r)
    z += gains.ris[r - 1] * ris_response(aods[r - 1], scenario, schedule, r).cwiseProduct(b);
  return std::sqrt(power_w) * z;
}

cplx complex_gaussian(double sigma2, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(sigma2 / 2.0));
  return {n(rng), n(rng)};
}

namespace {

std::vector<Angle2> true_aods(const ScenarioConfig& scenario) {
  std::vector<Angle2> aods;
  for (int r = 0; r < scenario.num_ris(); ++r) aods.push_back(scenario.true_aod(r));
  return aods;
}

void add_noise(Eigen::VectorXcd& y, double sigma2, std::mt19937_64& rng) {
  if (sigma2 <= 0.0) return;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += complex_gaussian(sigma2, rng);
}

}  // namespace

Observation synthesize(const ScenarioConfig& scenario, const RisSchedule& schedule,
                       double power_w, double cfo_hz, bool los_present,
                       const PathGains& gains, std::mt19937_64& rng) {
  PathGains used = gains;
  if (!los_present) used.los.reset();

  Observation obs;
  obs.y = noise_free_signal(scenario, schedule, power_w, cfo_hz, used, true_aods(scenario));
  add_noise(obs.y, scenario.noise_power_w(), rng);
  obs.true_cfo_hz = cfo_hz;
  obs.true_gains = used;
  obs.los_present = los_present;
  obs.scenario_hash = scenario.hash();
  return obs;
}

Observation synthesize_multipath(const ScenarioConfig& scenario, const RisSchedule& schedule,
                                 double power_w, double cfo_hz, bool los_present,
                                 const PathGains& gains, const RicianParams& rician,
                                 std::mt19937_64& rng) {
  if (rician.kappa_los < 0.0 || rician.kappa_bs_ris < 0.0 || rician.kappa_ris_ue < 0.0)
    throw std::domain_error("synthesize_multipath: Rician factors must be nonnegative");

  const int m = scenario.num_transmissions;
  const int n = scenario.layout().size();
  const double sqrt_p = std::sqrt(power_w);
  const Eigen::VectorXcd b = cfo_vector(cfo_hz, m, scenario.sampling_time_s);
  const std::vector<Angle2> aods = true_aods(scenario);

  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(m);
  if (los_present && gains.los) {
    const double spec = std::sqrt(rician.kappa_los / (rician.kappa_los + 1.0));
    const double diff = std::sqrt(1.0 / (rician.kappa_los + 1.0));
    const cplx h = complex_gaussian(1.0, rng);
    y += sqrt_p * *gains.los * (spec + diff * h) * b;
  }

  const RisArrayLayout layout = scenario.layout();
  for (int r = 1; r <= schedule.num_ris(); ++r) {
    const double spec_b = std::sqrt(rician.kappa_bs_ris / (rician.kappa_bs_ris + 1.0));
    const double diff_b = std::sqrt(1.0 / (rician.kappa_bs_ris + 1.0));
    const double spec_r = std::sqrt(rician.kappa_ris_ue / (rician.kappa_ris_ue + 1.0));
    const double diff_r = std::sqrt(1.0 / (rician.kappa_ris_ue + 1.0));

    Eigen::VectorXcd h_bs(n), h_ue(n);
    for (int i = 0; i < n; ++i) h_bs(i) = complex_gaussian(1.0, rng);
    for (int i = 0; i < n; ++i) h_ue(i) = complex_gaussian(1.0, rng);

    const Eigen::VectorXcd a_phi = steering_vector(scenario.aoa(r - 1), layout, scenario.wavelength_m);
    const Eigen::VectorXcd a_theta = steering_vector(aods[r - 1], layout, scenario.wavelength_m);
    // Incident weighting (specular BS-RIS steering plus diffuse part) and
    // departing channel toward the UE; both held fixed across transmissions.
    const Eigen::VectorXcd incident = spec_b * a_phi + diff_b * h_bs;
    const Eigen::VectorXcd departing = spec_r * a_theta + diff_r * h_ue;
    const Eigen::VectorXcd weighted = incident.cwiseProduct(departing);

    const Eigen::VectorXcd per_block = schedule.base_profiles[r - 1].transpose() * weighted;
    y += sqrt_p * gains.ris[r - 1] * schedule.expand(r, per_block).cwiseProduct(b);
  }

  add_noise(y, scenario.noise_power_w(), rng);

  Observation obs;
  obs.y = std::move(y);
  obs.true_cfo_hz = cfo_hz;
  obs.true_gains = gains;
  if (!los_present) obs.true_gains.los.reset();
  obs.los_present = los_present;
  obs.multipath = rician;
  obs.scenario_hash = scenario.hash();
  return obs;
}

}  // namespace risloc
