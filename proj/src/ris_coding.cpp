#include "risloc/ris_coding.hpp"

#include <cmath>
#include <stdexcept>

namespace risloc {

Eigen::VectorXcd RisSchedule::gamma(int r, int m) const {
  const int k = m / code_length;
  const int l = m % code_length;
  return codes[r](l) * base_profiles[r - 1].col(k);
}

Eigen::VectorXcd RisSchedule::expand(int r, const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd w(num_transmissions);
  for (int k = 0; k < blocks; ++k)
    for (int l = 0; l < code_length; ++l) w(k * code_length + l) = codes[r](l) * v(k);
  return w;
}

Eigen::VectorXd hadamard_row(int row, int n) {
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) {
    // Sylvester construction: sign = (-1)^popcount(row & i)
    const int bits = __builtin_popcount(static_cast<unsigned>(row) & static_cast<unsigned>(i));
    c(i) = (bits & 1) ? -1.0 : 1.0;
  }
  return c;
}

int minimal_code_length(int r_plus_one, int m) {
  int l = 1;
  while (l < r_plus_one) l *= 2;
  while (l <= m) {
    if (m % l == 0) return l;
    l *= 2;
  }
  return 0;
}

RisSchedule build_schedule(int num_ris, int num_transmissions, const RisArrayLayout& layout,
                           BaseProfileKind kind, std::mt19937_64& rng,
                           int code_length_override, const std::vector<Angle2>& aoa,
                           const std::vector<Angle2>& directional_target, double wavelength) {
  int code_length = code_length_override;
  if (code_length == 0) code_length = minimal_code_length(num_ris + 1, num_transmissions);
  if (code_length < num_ris + 1 || code_length <= 0 ||
      (code_length & (code_length - 1)) != 0 || num_transmissions % code_length != 0)
    throw std::invalid_argument("build_schedule: no valid code length divides M");

  RisSchedule s;
  s.code_length = code_length;
  s.num_transmissions = num_transmissions;
  s.blocks = num_transmissions / code_length;
  for (int r = 0; r <= num_ris; ++r) s.codes.push_back(hadamard_row(r, code_length));

  const int n = layout.size();
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  for (int r = 0; r < num_ris; ++r) {
    Eigen::MatrixXcd p(n, s.blocks);
    if (kind == BaseProfileKind::Random) {
      for (int k = 0; k < s.blocks; ++k)
        for (int i = 0; i < n; ++i) p(i, k) = std::polar(1.0, phase(rng));
    } else {
      if (aoa.size() != static_cast<size_t>(num_ris) ||
          directional_target.size() != static_cast<size_t>(num_ris) || wavelength <= 0.0)
        throw std::invalid_argument("build_schedule: directional profiles need AoA, target and wavelength");
      const Eigen::VectorXcd beam =
          (steering_vector(aoa[r], layout, wavelength).array() *
           steering_vector(directional_target[r], layout, wavelength).array())
              .conjugate();
      p = beam.replicate(1, s.blocks);
    }
    s.base_profiles.push_back(std::move(p));
  }
  return s;
}

Eigen::MatrixXcd reshape_observations(const Eigen::VectorXcd& y, int code_length) {
  const int m = static_cast<int>(y.size());
  if (code_length <= 0 || m % code_length != 0)
    throw std::invalid_argument("reshape_observations: code length must divide the sample count");
  return Eigen::Map<const Eigen::MatrixXcd>(y.data(), code_length, m / code_length);
}

Eigen::VectorXcd decode(const Eigen::MatrixXcd& reshaped, const Eigen::VectorXd& code) {
  if (reshaped.rows() != code.size())
    throw std::invalid_argument("decode: code length does not match the reshaped row count");
  return (reshaped.transpose() * code.cast<cplx>()) / static_cast<double>(code.size());
}

}  // namespace risloc
