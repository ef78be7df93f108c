#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

// Geometry primitives: angles of departure, wavenumber and steering vectors
// for planar RIS panels, and the direction vectors used for triangulation.
//
// Conventions:
//  - azimuth in (-pi, pi], elevation in [0, pi], both radians
//  - a RIS panel spans its local x-y plane with boresight along local +z;
//    elements form a uniform rows x cols grid centered at the panel origin,
//    indexed row-major
//  - rotation matrices map global coordinates into the RIS-local frame

namespace risloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using cplx = std::complex<double>;

struct Angle2 {
  double az = 0.0;  // radians, (-pi, pi]
  double el = 0.0;  // radians, [0, pi]
};

// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

// Rotation by `theta` about the z-axis.
Mat3 rot_z(double theta);

// True iff R'R = I within `tol` and det(R) = +1.
bool is_rotation(const Mat3& rot, double tol = 1e-12);

struct RisArrayLayout {
  int rows = 0;
  int cols = 0;
  double spacing = 0.0;  // meters

  int size() const { return rows * cols; }
  // Position of element n (row-major) in the panel-local frame.
  Vec3 element_position(int n) const;
};

// AoD of `ue` as seen from a RIS at `ris` with orientation `rot`.
// az = atan2(r2, r1), el = arccos(r3 / |ue - ris|) with r = rot * (ue - ris).
// When sin(el) = 0 the azimuth is conventionally 0.
Angle2 compute_aod(const Vec3& ue, const Vec3& ris, const Mat3& rot);

// Wavenumber vector k(psi), |k| = 2*pi/lambda.
Vec3 wavenumber(const Angle2& angle, double wavelength);

// Partial derivatives of the wavenumber vector w.r.t. azimuth and elevation.
void wavenumber_derivatives(const Angle2& angle, double wavelength,
                            Vec3& d_az, Vec3& d_el);

// Steering vector [a]_n = exp(j k(psi)' q_n); every entry has unit modulus.
Eigen::VectorXcd steering_vector(const Angle2& angle, const RisArrayLayout& layout,
                                 double wavelength);

// Element-wise derivatives of the steering vector w.r.t. azimuth / elevation.
void steering_derivatives(const Angle2& angle, const RisArrayLayout& layout,
                          double wavelength, Eigen::VectorXcd& d_az,
                          Eigen::VectorXcd& d_el);

// Unit vector from the RIS toward a target with AoD `angle`, in the global
// frame: u = R' k(angle) / |R' k(angle)|.
Vec3 direction_vector(const Angle2& angle, const Mat3& rot, double wavelength);

// Jacobian d(az, el)/d(p) of the AoD w.r.t. the target position, 2x3.
// Throws when sin(el) = 0 (azimuth undefined there).
Eigen::Matrix<double, 2, 3> aod_position_jacobian(const Vec3& ue, const Vec3& ris,
                                                  const Mat3& rot);

}  // namespace risloc
