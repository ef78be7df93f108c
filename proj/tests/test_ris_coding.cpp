#include <doctest.h>

#include <random>

#include "risloc/channel.hpp"
#include "risloc/estimation.hpp"

using namespace risloc;

namespace {

ScenarioConfig small_scenario() {
  ScenarioConfig c;
  c.ris_rows = 4;
  c.ris_cols = 4;
  c.num_transmissions = 32;
  c.noise_power_override_w = 0.0;
  return c;
}

}  // namespace

TEST_CASE("hadamard rows and minimal code length") {
  const Eigen::VectorXd c0 = hadamard_row(0, 4);
  const Eigen::VectorXd c1 = hadamard_row(1, 4);
  const Eigen::VectorXd c2 = hadamard_row(2, 4);
  CHECK(c0.isApprox(Eigen::Vector4d(1, 1, 1, 1)));
  CHECK(c1.isApprox(Eigen::Vector4d(1, -1, 1, -1)));
  CHECK(c2.isApprox(Eigen::Vector4d(1, 1, -1, -1)));

  CHECK(minimal_code_length(3, 256) == 4);   // two RISs plus the direct path
  CHECK(minimal_code_length(4, 256) == 4);   // three RISs still fit
  CHECK(minimal_code_length(5, 256) == 8);
  CHECK(minimal_code_length(3, 6) == 0);     // no power of two >= 3 divides 6
}

TEST_CASE("schedule: codes orthogonal, gammas unit modulus and block-coded") {
  std::mt19937_64 rng(1);
  const RisArrayLayout layout{4, 4, 0.005};
  const RisSchedule s = build_schedule(2, 256, layout, BaseProfileKind::Random, rng);
  CHECK(s.code_length == 4);
  CHECK(s.blocks == 64);
  for (size_t i = 0; i < s.codes.size(); ++i)
    for (size_t j = 0; j < s.codes.size(); ++j)
      CHECK(s.codes[i].dot(s.codes[j]) == doctest::Approx(i == j ? 4.0 : 0.0));

  for (int m : {0, 1, 5, 255}) {
    const Eigen::VectorXcd g = s.gamma(1, m);
    const int k = m / s.code_length, l = m % s.code_length;
    for (int n = 0; n < g.size(); ++n) {
      CHECK(std::abs(std::abs(g(n)) - 1.0) < 1e-12);
      CHECK(std::abs(g(n) - s.codes[1](l) * s.base_profiles[0](n, k)) < 1e-15);
    }
  }

  CHECK_THROWS_AS(build_schedule(2, 6, layout, BaseProfileKind::Random, rng),
                  std::invalid_argument);
}

TEST_CASE("reshape: column layout and round trip") {
  Eigen::VectorXcd y(8);
  for (int i = 0; i < 8; ++i) y(i) = cplx(i, 0);
  const Eigen::MatrixXcd m = reshape_observations(y, 4);
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 2);
  for (int l = 0; l < 4; ++l) {
    CHECK(m(l, 0) == cplx(l, 0));
    CHECK(m(l, 1) == cplx(l + 4, 0));
  }
  const Eigen::Map<const Eigen::VectorXcd> flat(m.data(), 8);
  CHECK((flat - y).norm() == 0.0);
  CHECK_THROWS_AS(reshape_observations(y, 3), std::invalid_argument);
}

TEST_CASE("decode separates paths exactly at zero CFO") {
  // Independent oracle: per-block element sums g_r(phi, theta, k).
  ScenarioConfig config = small_scenario();
  std::mt19937_64 rng(42);
  const RisSchedule s = build_schedule(2, config.num_transmissions, config.layout(),
                                       BaseProfileKind::Random, rng);
  PathGains gains;
  gains.los = cplx(0.8, -0.6);
  gains.ris = {cplx(0.3, 0.1), cplx(-0.2, 0.4)};
  const double power = 2.0;
  std::vector<Angle2> aods{config.true_aod(0), config.true_aod(1)};
  const Eigen::VectorXcd y = noise_free_signal(config, s, power, 0.0, gains, aods);

  const Eigen::MatrixXcd reshaped = reshape_observations(y, s.code_length);
  const Eigen::VectorXcd y0 = decode(reshaped, s.codes[0]);
  for (int k = 0; k < s.blocks; ++k)
    CHECK(std::abs(y0(k) - std::sqrt(power) * *gains.los) < 1e-12 * std::abs(*gains.los));

  const RisArrayLayout layout = config.layout();
  for (int r = 1; r <= 2; ++r) {
    const Eigen::VectorXcd yr = decode(reshaped, s.codes[r]);
    const Eigen::VectorXcd a_phi = steering_vector(config.aoa(r - 1), layout, config.wavelength_m);
    const Eigen::VectorXcd a_theta = steering_vector(aods[r - 1], layout, config.wavelength_m);
    for (int k = 0; k < s.blocks; ++k) {
      cplx g(0.0, 0.0);
      for (int n = 0; n < layout.size(); ++n)
        g += a_phi(n) * s.base_profiles[r - 1](n, k) * a_theta(n);
      const cplx expected = std::sqrt(power) * gains.ris[r - 1] * g;
      CHECK(std::abs(yr(k) - expected) <= 1e-12 * std::abs(expected));
    }
  }
}

TEST_CASE("decode of a single path with a foreign code is exactly zero") {
  ScenarioConfig config = small_scenario();
  std::mt19937_64 rng(9);
  const RisSchedule s = build_schedule(2, config.num_transmissions, config.layout(),
                                       BaseProfileKind::Random, rng);
  PathGains gains;
  gains.ris = {cplx(1.0, 0.0), cplx(0.0, 0.0)};
  const Eigen::VectorXcd y = noise_free_signal(config, s, 1.0, 0.0, gains,
                                               {config.true_aod(0), config.true_aod(1)});
  const Eigen::MatrixXcd reshaped = reshape_observations(y, s.code_length);
  CHECK(decode(reshaped, s.codes[0]).norm() < 1e-13 * y.norm());
  CHECK(decode(reshaped, s.codes[2]).norm() < 1e-13 * y.norm());
  CHECK(decode(reshaped, s.codes[1]).norm() > 0.0);
}

TEST_CASE("decoded noise variance is sigma2 / L") {
  std::mt19937_64 rng(77);
  const int code_length = 4, blocks = 4, draws = 10000;
  const Eigen::VectorXd code = hadamard_row(2, code_length);
  const double sigma2 = 0.7;
  double acc = 0.0;
  int count = 0;
  for (int d = 0; d < draws; ++d) {
    Eigen::VectorXcd n(code_length * blocks);
    for (int i = 0; i < n.size(); ++i) n(i) = complex_gaussian(sigma2, rng);
    const Eigen::VectorXcd dec = decode(reshape_observations(n, code_length), code);
    acc += dec.squaredNorm();
    count += static_cast<int>(dec.size());
  }
  const double measured = acc / count;
  CHECK(measured == doctest::Approx(sigma2 / code_length).epsilon(0.05));
}

TEST_CASE("energy conservation across the full code set") {
  std::mt19937_64 rng(13);
  const int code_length = 4, blocks = 8;
  Eigen::VectorXcd y(code_length * blocks);
  for (int i = 0; i < y.size(); ++i) y(i) = complex_gaussian(1.0, rng);
  const Eigen::MatrixXcd reshaped = reshape_observations(y, code_length);

  double subset = 0.0, full = 0.0;
  for (int row = 0; row < code_length; ++row) {
    const double p = decode(reshaped, hadamard_row(row, code_length)).squaredNorm();
    full += p;
    if (row < 3) subset += p;
  }
  CHECK(full == doctest::Approx(y.squaredNorm() / code_length).epsilon(1e-12));
  CHECK(subset <= full + 1e-12);
}

TEST_CASE("residual interference: zero at zero CFO, grows with offset") {
  ScenarioConfig config = small_scenario();
  std::mt19937_64 rng(4);
  const RisSchedule s = build_schedule(2, config.num_transmissions, config.layout(),
                                       BaseProfileKind::Random, rng);
  CHECK(residual_interference(config, s, 0.0) < 1e-25);
  CHECK(residual_interference(config, s, -40e3) > 0.0);

  // Numeric sweep: nondecreasing over [0, 1/(8 L Ts)].
  const double hi = 1.0 / (8.0 * s.code_length * config.sampling_time_s);
  double prev = -1.0;
  for (int i = 0; i <= 16; ++i) {
    const double nu = hi * i / 16.0;
    const double leak = residual_interference(config, s, nu);
    CHECK(leak >= prev - 1e-12);
    prev = leak;
  }
}
