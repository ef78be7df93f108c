#include <doctest.h>

#include <random>

#include "risloc/geometry.hpp"

using namespace risloc;

TEST_CASE("aod: axis-aligned and boresight cases") {
  const Angle2 a = compute_aod(Vec3(1, 0, 0), Vec3::Zero(), Mat3::Identity());
  CHECK(a.az == doctest::Approx(0.0));
  CHECK(a.el == doctest::Approx(M_PI / 2));

  const Angle2 b = compute_aod(Vec3(0, 0, 1), Vec3::Zero(), Mat3::Identity());
  CHECK(b.el == doctest::Approx(0.0));
  CHECK(b.az == 0.0);  // convention: azimuth fixed to 0 on boresight
}

TEST_CASE("aod: reference geometry, second panel") {
  // UE [5,2,0.5], RIS [0,10,0], rotation pi about z.
  const Angle2 a = compute_aod(Vec3(5, 2, 0.5), Vec3(0, 10, 0), rot_z(M_PI));
  CHECK(a.az == doctest::Approx(2.129395642138459).epsilon(1e-10));
  CHECK(a.el == doctest::Approx(1.517845974692678).epsilon(1e-10));
}

TEST_CASE("aod: coincident points rejected") {
  CHECK_THROWS_AS(compute_aod(Vec3(1, 2, 3), Vec3(1, 2, 3), Mat3::Identity()), std::domain_error);
}

TEST_CASE("aod: invariant under positive scaling of the offset") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-10.0, 10.0), scale(0.1, 50.0);
  for (int i = 0; i < 50; ++i) {
    const Vec3 ris(coord(rng), coord(rng), coord(rng));
    Vec3 offset(coord(rng), coord(rng), coord(rng));
    if (offset.norm() < 1e-3) continue;
    const Mat3 rot = rot_z(coord(rng));
    const Angle2 a = compute_aod(ris + offset, ris, rot);
    const Angle2 b = compute_aod(ris + scale(rng) * offset, ris, rot);
    CHECK(a.az == doctest::Approx(b.az).epsilon(1e-12));
    CHECK(a.el == doctest::Approx(b.el).epsilon(1e-12));
  }
}

TEST_CASE("wavenumber: boresight, endfire, oblique") {
  const Vec3 k0 = wavenumber(Angle2{0.7, 0.0}, 0.01);
  CHECK(k0.x() == doctest::Approx(0.0));
  CHECK(k0.y() == doctest::Approx(0.0));
  CHECK(k0.z() == doctest::Approx(200 * M_PI));

  const Vec3 k1 = wavenumber(Angle2{0.0, M_PI / 2}, 0.01);
  CHECK(k1.x() == doctest::Approx(200 * M_PI));
  CHECK(k1.y() == doctest::Approx(0.0).epsilon(1e-12));

  const Vec3 k2 = wavenumber(Angle2{M_PI / 4, M_PI / 4}, 0.01);
  CHECK(k2.x() == doctest::Approx(100 * M_PI));
  CHECK(k2.y() == doctest::Approx(100 * M_PI));
  CHECK(k2.z() == doctest::Approx(200 * M_PI * std::sqrt(2.0) / 2));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> az(-M_PI, M_PI), el(0.0, M_PI);
  for (int i = 0; i < 20; ++i)
    CHECK(wavenumber(Angle2{az(rng), el(rng)}, 0.01).norm() == doctest::Approx(200 * M_PI));
}

TEST_CASE("steering: single element, unit modulus, endfire phase") {
  const RisArrayLayout single{1, 1, 0.005};
  const Eigen::VectorXcd a = steering_vector(Angle2{0.3, 0.8}, single, 0.01);
  REQUIRE(a.size() == 1);
  CHECK(std::abs(a(0) - cplx(1.0, 0.0)) < 1e-14);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> az(-M_PI, M_PI), el(0.0, M_PI);
  const RisArrayLayout layout{4, 8, 0.005};
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXcd v = steering_vector(Angle2{az(rng), el(rng)}, layout, 0.01);
    for (int n = 0; n < v.size(); ++n) CHECK(std::abs(std::abs(v(n)) - 1.0) < 1e-12);
  }

  // Two elements, half-wavelength apart, endfire: opposite phases.
  const RisArrayLayout pair{1, 2, 0.005};
  const Eigen::VectorXcd e = steering_vector(Angle2{0.0, M_PI / 2}, pair, 0.01);
  CHECK(std::abs(e(1) / e(0) - cplx(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("direction vector: endfire and rotated") {
  const Vec3 u0 = direction_vector(Angle2{0.0, M_PI / 2}, Mat3::Identity(), 0.01);
  CHECK((u0 - Vec3(1, 0, 0)).norm() < 1e-12);
  const Vec3 u1 = direction_vector(Angle2{0.0, M_PI / 2}, rot_z(M_PI), 0.01);
  CHECK((u1 - Vec3(-1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("direction vector: round trip with aod over random geometries") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> coord(-20.0, 20.0), angle(-M_PI, M_PI);
  for (int i = 0; i < 100; ++i) {
    const Vec3 ris(coord(rng), coord(rng), coord(rng));
    const Vec3 ue(coord(rng), coord(rng), coord(rng));
    if ((ue - ris).norm() < 1e-2) continue;
    const Mat3 rot = rot_z(angle(rng));
    const Vec3 u = direction_vector(compute_aod(ue, ris, rot), rot, 0.01);
    const double cosine = u.dot((ue - ris).normalized());
    CHECK(cosine >= 1.0 - 1e-9);
  }

  // Reference geometry: direction from the second panel points at the UE.
  const Vec3 ue(5, 2, 0.5), ris(0, 10, 0);
  const Mat3 rot = rot_z(M_PI);
  const Vec3 u = direction_vector(compute_aod(ue, ris, rot), rot, 0.01);
  CHECK(u.dot((ue - ris).normalized()) > 1.0 - 1e-9);
}

TEST_CASE("rotation helpers") {
  CHECK(is_rotation(rot_z(0.37)));
  CHECK(is_rotation(Mat3::Identity()));
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 2.0;
  CHECK_FALSE(is_rotation(bad));
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;  // determinant -1
  CHECK_FALSE(is_rotation(reflect));
}

TEST_CASE("layout: row-major centered grid") {
  const RisArrayLayout layout{2, 3, 0.01};
  CHECK(layout.size() == 6);
  CHECK((layout.element_position(0) - Vec3(-0.01, -0.005, 0)).norm() < 1e-15);
  CHECK((layout.element_position(2) - Vec3(0.01, -0.005, 0)).norm() < 1e-15);
  CHECK((layout.element_position(3) - Vec3(-0.01, 0.005, 0)).norm() < 1e-15);
  Vec3 sum = Vec3::Zero();
  for (int n = 0; n < layout.size(); ++n) sum += layout.element_position(n);
  CHECK(sum.norm() < 1e-15);
}

TEST_CASE("aod position jacobian matches finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-15.0, 15.0), angle(-M_PI, M_PI);
  for (int i = 0; i < 30; ++i) {
    const Vec3 ris(coord(rng), coord(rng), coord(rng));
    const Vec3 ue(coord(rng), coord(rng), coord(rng));
    if ((ue - ris).norm() < 0.5) continue;
    const Mat3 rot = rot_z(angle(rng));
    const Angle2 base = compute_aod(ue, ris, rot);
    if (std::sin(base.el) < 1e-3) continue;
    const auto jac = aod_position_jacobian(ue, ris, rot);
    const double h = 1e-6;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 up = ue, dn = ue;
      up(axis) += h;
      dn(axis) -= h;
      const Angle2 ap = compute_aod(up, ris, rot);
      const Angle2 am = compute_aod(dn, ris, rot);
      CHECK(jac(0, axis) ==
            doctest::Approx(wrap_angle(ap.az - am.az) / (2 * h)).epsilon(1e-5));
      CHECK(jac(1, axis) == doctest::Approx((ap.el - am.el) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("steering derivatives match finite differences") {
  const RisArrayLayout layout{3, 4, 0.005};
  const Angle2 base{0.9, 1.1};
  Eigen::VectorXcd daz, del;
  steering_derivatives(base, layout, 0.01, daz, del);
  const double h = 1e-7;
  const Eigen::VectorXcd azp = steering_vector(Angle2{base.az + h, base.el}, layout, 0.01);
  const Eigen::VectorXcd azm = steering_vector(Angle2{base.az - h, base.el}, layout, 0.01);
  const Eigen::VectorXcd elp = steering_vector(Angle2{base.az, base.el + h}, layout, 0.01);
  const Eigen::VectorXcd elm = steering_vector(Angle2{base.az, base.el - h}, layout, 0.01);
  CHECK((daz - (azp - azm) / (2 * h)).norm() < 1e-6 * daz.norm());
  CHECK((del - (elp - elm) / (2 * h)).norm() < 1e-6 * del.norm());
}
