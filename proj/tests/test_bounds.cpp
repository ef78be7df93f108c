#include <doctest.h>

#include <random>

#include "risloc/bounds.hpp"

using namespace risloc;

namespace {

ScenarioConfig random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-8.0, 8.0), zc(0.0, 2.0), angle(-M_PI, M_PI);
  ScenarioConfig c;
  c.ris_rows = 4;
  c.ris_cols = 4;
  c.num_transmissions = 32;
  c.ue_position = Vec3(coord(rng), coord(rng), zc(rng) + 0.1);
  c.ris[0].position = Vec3(coord(rng), coord(rng) - 12.0, zc(rng));
  c.ris[1].position = Vec3(coord(rng) + 12.0, coord(rng), zc(rng));
  c.ris[0].rotation = rot_z(angle(rng));
  c.ris[1].rotation = rot_z(angle(rng));
  return c;
}

TruthChannel random_truth(std::mt19937_64& rng, int num_ris, bool los) {
  std::uniform_real_distribution<double> re(-1.0, 1.0);
  TruthChannel t;
  t.cfo_hz = 5e4 * re(rng);
  t.los = los;
  if (los) t.gains.los = cplx(1e-4 * re(rng), 1e-4 * re(rng));
  for (int r = 0; r < num_ris; ++r) t.gains.ris.push_back(cplx(1e-6 * re(rng), 1e-6 * re(rng)));
  return t;
}

// Finite-difference oracle for the channel FIM: central differences of the
// noise-free signal with respect to every channel-domain parameter.
Eigen::MatrixXd fd_fim(const ScenarioConfig& c, const RisSchedule& s, double power,
                       const TruthChannel& truth) {
  const bool los = truth.los && truth.gains.los.has_value();
  const int num_ris = s.num_ris();
  const int num_gains = num_ris + (los ? 1 : 0);
  const int dim = 2 * num_gains + 1 + 2 * num_ris;
  const int m = c.num_transmissions;

  struct Params {
    PathGains gains;
    double cfo;
    std::vector<Angle2> aods;
  };
  Params base;
  base.gains = truth.gains;
  if (!los) base.gains.los.reset();
  base.cfo = truth.cfo_hz;
  for (int r = 0; r < num_ris; ++r) base.aods.push_back(c.true_aod(r));

  const auto signal = [&](const Params& p) {
    return noise_free_signal(c, s, power, p.cfo, p.gains, p.aods);
  };
  const auto perturb = [&](int idx, double h) {
    Params p = base;
    int col = 0;
    if (los) {
      if (idx == col++) p.gains.los = *p.gains.los + h;
      if (idx == col++) p.gains.los = *p.gains.los + cplx(0.0, h);
    }
    for (int r = 0; r < num_ris; ++r) {
      if (idx == col++) p.gains.ris[r] += h;
      if (idx == col++) p.gains.ris[r] += cplx(0.0, h);
    }
    if (idx == col++) p.cfo += h;
    for (int r = 0; r < num_ris; ++r) {
      if (idx == col++) p.aods[r].az += h;
      if (idx == col++) p.aods[r].el += h;
    }
    return p;
  };

  Eigen::MatrixXcd d(m, dim);
  for (int i = 0; i < dim; ++i) {
    double h = 1e-6;
    const int cfo_index = 2 * num_gains;
    if (i == cfo_index) h = 1e-3;                      // Hz scale
    if (i < 2 * num_gains) h = 1e-10;                  // gain scale
    d.col(i) = (signal(perturb(i, h)) - signal(perturb(i, -h))) / (2.0 * h);
  }
  return (2.0 / c.noise_power_w()) * (d.adjoint() * d).real();
}

}  // namespace

TEST_CASE("channel fim matches finite differences on random scenarios") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 6; ++i) {
    const bool los = (i % 2 == 0);
    ScenarioConfig c = random_scenario(rng);
    RisSchedule s = build_schedule(c.num_ris(), c.num_transmissions, c.layout(),
                                   BaseProfileKind::Random, rng);
    const TruthChannel truth = random_truth(rng, c.num_ris(), los);
    const double power = 1.0;
    const FimChannel fim = fim_channel(c, s, power, truth);
    const Eigen::MatrixXd oracle = fd_fim(c, s, power, truth);
    CHECK((fim.f - oracle).norm() <= 1e-5 * oracle.norm());

    // Symmetry and positive semidefiniteness.
    CHECK((fim.f - fim.f.transpose()).norm() < 1e-9 * fim.f.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim.f);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * fim.f.trace());
  }
}

TEST_CASE("fim scales linearly with power and inversely with noise") {
  std::mt19937_64 rng(23);
  ScenarioConfig c = random_scenario(rng);
  const RisSchedule s = build_schedule(c.num_ris(), c.num_transmissions, c.layout(),
                                       BaseProfileKind::Random, rng);
  const TruthChannel truth = random_truth(rng, c.num_ris(), true);
  const FimChannel base = fim_channel(c, s, 1.0, truth);
  const FimChannel x4 = fim_channel(c, s, 4.0, truth);
  CHECK((x4.f - 4.0 * base.f).norm() < 1e-9 * x4.f.norm());

  ScenarioConfig louder = c;
  louder.noise_power_override_w = 2.0 * c.noise_power_w();
  const FimChannel halved = fim_channel(louder, s, 1.0, truth);
  CHECK((halved.f - 0.5 * base.f).norm() < 1e-9 * base.f.norm());
}

TEST_CASE("jacobian: identity head block, fd match, dimensions") {
  ScenarioConfig c;  // reference geometry
  const Eigen::MatrixXd j = jacobian_channel_to_position(c, true);
  // eta_ch is 11-dimensional and eta 10-dimensional for two RISs with the
  // direct path, so the sandwich J' F J needs an 11 x 10 Jacobian.
  CHECK(j.rows() == 11);
  CHECK(j.cols() == 10);
  CHECK((j.topLeftCorner(7, 7) - Eigen::MatrixXd::Identity(7, 7)).norm() == 0.0);
  CHECK(j.topRightCorner(7, 3).norm() == 0.0);
  CHECK(j.bottomLeftCorner(4, 7).norm() == 0.0);

  const Eigen::MatrixXd jn = jacobian_channel_to_position(c, false);
  CHECK(jn.rows() == 9);
  CHECK(jn.cols() == 8);

  const double h = 1e-6;
  for (int r = 0; r < 2; ++r) {
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 up = c.ue_position, dn = c.ue_position;
      up(axis) += h;
      dn(axis) -= h;
      const Angle2 ap = compute_aod(up, c.ris[r].position, c.ris[r].rotation);
      const Angle2 am = compute_aod(dn, c.ris[r].position, c.ris[r].rotation);
      CHECK(j(7 + 2 * r, 7 + axis) ==
            doctest::Approx(wrap_angle(ap.az - am.az) / (2 * h)).epsilon(1e-5));
      CHECK(j(7 + 2 * r + 1, 7 + axis) ==
            doctest::Approx((ap.el - am.el) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("sandwich identity: direct positional fim equals J' F_ch J") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 4; ++i) {
    const bool los = (i % 2 == 0);
    ScenarioConfig c = random_scenario(rng);
    const RisSchedule s = build_schedule(c.num_ris(), c.num_transmissions, c.layout(),
                                         BaseProfileKind::Random, rng);
    const TruthChannel truth = random_truth(rng, c.num_ris(), los);
    const FimPosition sandwich = fim_position(c, s, 1.0, truth);
    const FimPosition direct = fim_position_direct(c, s, 1.0, truth);
    CHECK((sandwich.f - direct.f).norm() <= 1e-12 * sandwich.f.norm());
  }
}

TEST_CASE("peb scales as 1/sqrt(P)") {
  ScenarioConfig c;
  std::mt19937_64 rng(31);
  const RisSchedule s = build_schedule(c.num_ris(), c.num_transmissions, c.layout(),
                                       BaseProfileKind::Random, rng);
  const BoundsReport b1 = scenario_bounds(c, s, 1.0, true);
  const BoundsReport b4 = scenario_bounds(c, s, 4.0, true);
  CHECK(b4.peb_m == doctest::Approx(0.5 * b1.peb_m).epsilon(1e-9));
  CHECK(b4.cfo_bound_hz == doctest::Approx(0.5 * b1.cfo_bound_hz).epsilon(1e-9));
}

TEST_CASE("single ris without a direct path is unidentifiable") {
  ScenarioConfig c;
  c.ris.resize(1);
  std::mt19937_64 rng(37);
  const RisSchedule s = build_schedule(1, c.num_transmissions, c.layout(),
                                       BaseProfileKind::Random, rng);
  CHECK_THROWS_AS(scenario_bounds(c, s, 1.0, false), IdentifiabilityError);
  // With the direct path the same single-RIS setup stays unidentifiable for
  // the position too: one bearing cannot fix three coordinates.
  CHECK_THROWS_AS(scenario_bounds(c, s, 1.0, true), IdentifiabilityError);
}

TEST_CASE("a third ris never hurts the position bound") {
  ScenarioConfig two;
  std::mt19937_64 rng(41);
  const RisSchedule s2 = build_schedule(2, two.num_transmissions, two.layout(),
                                        BaseProfileKind::Random, rng);
  const double peb2 = scenario_bounds(two, s2, 1.0, false).peb_m;

  ScenarioConfig three = two;
  three.ris.push_back({Vec3(10.0, 10.0, 0.0), rot_z(-M_PI / 2)});
  std::mt19937_64 rng3(41);
  const RisSchedule s3 = build_schedule(3, three.num_transmissions, three.layout(),
                                        BaseProfileKind::Random, rng3);
  const double peb3 = scenario_bounds(three, s3, 1.0, false).peb_m;
  CHECK(peb3 <= peb2 * 1.0001);
}

TEST_CASE("direct-path and blocked-path position bounds are close") {
  ScenarioConfig c;
  std::mt19937_64 rng(43);
  const RisSchedule s = build_schedule(c.num_ris(), c.num_transmissions, c.layout(),
                                       BaseProfileKind::Random, rng);
  const double peb_los = scenario_bounds(c, s, 1.0, true).peb_m;
  const double peb_nlos = scenario_bounds(c, s, 1.0, false).peb_m;
  CHECK(std::abs(peb_los - peb_nlos) / peb_nlos < 0.10);
}
