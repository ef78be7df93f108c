#include "risloc/geometry.hpp"

#include <cmath>

namespace risloc {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

Mat3 rot_z(double theta) {
  Mat3 r;
  const double c = std::cos(theta), s = std::sin(theta);
  r << c, -s, 0.0,
       s,  c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

bool is_rotation(const Mat3& rot, double tol) {
  const Mat3 gram = rot.transpose() * rot;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rot.determinant() - 1.0) <= 10.0 * tol;
}

Vec3 RisArrayLayout::element_position(int n) const {
  const int i = n / cols;  // row index, local y
  const int j = n % cols;  // column index, local x
  const double x = (j - 0.5 * (cols - 1)) * spacing;
  const double y = (i - 0.5 * (rows - 1)) * spacing;
  return Vec3(x, y, 0.0);
}

Angle2 compute_aod(const Vec3& ue, const Vec3& ris, const Mat3& rot) {
  const Vec3 diff = ue - ris;
  const double dist = diff.norm();
  if (dist <= 0.0 || !std::isfinite(dist))
    throw std::domain_error("compute_aod: UE coincides with the RIS");
  const Vec3 r = rot * diff;
  Angle2 out;
  if (r.x() == 0.0 && r.y() == 0.0)
    out.az = 0.0;  // boresight: azimuth undefined, fix 0
  else
    out.az = std::atan2(r.y(), r.x());
  double c = r.z() / dist;
  c = std::clamp(c, -1.0, 1.0);
  out.el = std::acos(c);
  return out;
}

Vec3 wavenumber(const Angle2& angle, double wavelength) {
  if (wavelength <= 0.0) throw std::domain_error("wavenumber: wavelength must be positive");
  const double k = 2.0 * M_PI / wavelength;
  const double se = std::sin(angle.el), ce = std::cos(angle.el);
  return k * Vec3(se * std::cos(angle.az), se * std::sin(angle.az), ce);
}

void wavenumber_derivatives(const Angle2& angle, double wavelength,
                            Vec3& d_az, Vec3& d_el) {
  const double k = 2.0 * M_PI / wavelength;
  const double se = std::sin(angle.el), ce = std::cos(angle.el);
  const double sa = std::sin(angle.az), ca = std::cos(angle.az);
  d_az = k * Vec3(-se * sa, se * ca, 0.0);
  d_el = k * Vec3(ce * ca, ce * sa, -se);
}

Eigen::VectorXcd steering_vector(const Angle2& angle, const RisArrayLayout& layout,
                                 double wavelength) {
  const Vec3 k = wavenumber(angle, wavelength);
  const int n = layout.size();
  Eigen::VectorXcd a(n);
  // The grid is separable: phase(n) = kx*x_j + ky*y_i, so build the two
  // 1-D phase ramps once instead of 4096 scalar exps.
  Eigen::VectorXcd px(layout.cols), py(layout.rows);
  for (int j = 0; j < layout.cols; ++j) {
    const double x = (j - 0.5 * (layout.cols - 1)) * layout.spacing;
    px(j) = std::polar(1.0, k.x() * x);
  }
  for (int i = 0; i < layout.rows; ++i) {
    const double y = (i - 0.5 * (layout.rows - 1)) * layout.spacing;
    py(i) = std::polar(1.0, k.y() * y);
  }
  for (int i = 0; i < layout.rows; ++i)
    for (int j = 0; j < layout.cols; ++j) a(i * layout.cols + j) = py(i) * px(j);
  return a;
}

void steering_derivatives(const Angle2& angle, const RisArrayLayout& layout,
                          double wavelength, Eigen::VectorXcd& d_az,
                          Eigen::VectorXcd& d_el) {
  Vec3 kaz, kel;
  wavenumber_derivatives(angle, wavelength, kaz, kel);
  const Eigen::VectorXcd a = steering_vector(angle, layout, wavelength);
  const int n = layout.size();
  d_az.resize(n);
  d_el.resize(n);
  const cplx j1(0.0, 1.0);
  for (int m = 0; m < n; ++m) {
    const Vec3 q = layout.element_position(m);
    d_az(m) = j1 * kaz.dot(q) * a(m);
    d_el(m) = j1 * kel.dot(q) * a(m);
  }
}

Vec3 direction_vector(const Angle2& angle, const Mat3& rot, double wavelength) {
  const Vec3 k = rot.transpose() * wavenumber(angle, wavelength);
  return k / k.norm();
}

Eigen::Matrix<double, 2, 3> aod_position_jacobian(const Vec3& ue, const Vec3& ris,
                                                  const Mat3& rot) {
  const Vec3 diff = ue - ris;
  const double dist = diff.norm();
  if (dist <= 0.0) throw std::domain_error("aod_position_jacobian: UE coincides with the RIS");
  const Vec3 r = rot * diff;
  const double rho2 = r.x() * r.x() + r.y() * r.y();
  if (rho2 <= 0.0)
    throw std::domain_error("aod_position_jacobian: sin(el) = 0, azimuth derivative singular");

  Eigen::Matrix<double, 2, 3> d_local;
  // azimuth = atan2(r2, r1)
  d_local.row(0) << -r.y() / rho2, r.x() / rho2, 0.0;
  // elevation = arccos(r3 / |r|)
  const double c = r.z() / dist;
  const double s = std::sqrt(std::max(1.0 - c * c, 0.0));
  const Vec3 del = (c / (dist * dist)) * r - Vec3(0, 0, 1) / dist;
  d_local.row(1) = del.transpose() / s;
  // r = rot * (p - ris)  =>  d r / d p = rot
  return d_local * rot;
}

}  // namespace risloc
