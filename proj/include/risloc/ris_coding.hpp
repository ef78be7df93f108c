#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "risloc/geometry.hpp"

// Temporal coding of RIS phase profiles. Each RIS r gets a distinct
// non-constant row c_r of the Sylvester-ordered Hadamard matrix of length L
// (row 0, the constant row, is reserved for the direct path). Transmissions
// are grouped into blocks of L; within block k the profile of RIS r is the
// base column P_r[:,k] sign-modulated by c_r. Decoding a reshaped L x (M/L)
// observation with c_r isolates the contribution of path r when no residual
// CFO is present.

namespace risloc {

enum class BaseProfileKind { Random, Directional };

struct RisSchedule {
  int code_length = 0;        // L
  int num_transmissions = 0;  // M
  int blocks = 0;             // M / L

  // codes[r] for r = 0..R; codes[0] is the all-ones vector for the LoS path.
  std::vector<Eigen::VectorXd> codes;
  // Base phase profiles P_r, unit-modulus N x blocks, r = 1..R (index r-1).
  std::vector<Eigen::MatrixXcd> base_profiles;

  int num_ris() const { return static_cast<int>(base_profiles.size()); }
  // Full profile gamma_{r,m} = c_r[m mod L] * P_r[:, m div L], r is 1-based.
  Eigen::VectorXcd gamma(int r, int m) const;
  // Expand a per-block vector v (length M/L) into the full M-vector
  // w[k*L + l] = c_r[l] * v[k]. r = 0 selects the LoS code.
  Eigen::VectorXcd expand(int r, const Eigen::VectorXcd& v) const;
};

// Row `row` of the 2^ceil(log2(n))-point Sylvester Hadamard matrix, length n.
Eigen::VectorXd hadamard_row(int row, int n);

// Smallest power of two >= r_plus_one that divides m; 0 if none exists.
int minimal_code_length(int r_plus_one, int m);

// Build a schedule for R RISs over M transmissions with N elements each.
// code_length_override = 0 selects the minimal valid L. Random base profiles
// draw each element phase uniformly on [0, 2pi), redrawn per block column.
// Directional profiles apply the conjugate-phase beam a*(aoa) .* a*(target),
// identical across columns.
RisSchedule build_schedule(int num_ris, int num_transmissions, const RisArrayLayout& layout,
                           BaseProfileKind kind, std::mt19937_64& rng,
                           int code_length_override = 0,
                           const std::vector<Angle2>& aoa = {},
                           const std::vector<Angle2>& directional_target = {},
                           double wavelength = 0.0);

// Reshape y into an L x (M/L) matrix whose column k holds samples
// y_{kL} .. y_{kL+L-1}.
Eigen::MatrixXcd reshape_observations(const Eigen::VectorXcd& y, int code_length);

// Decoded per-path stream y_r = (1/L) Y' c_r.
Eigen::VectorXcd decode(const Eigen::MatrixXcd& reshaped, const Eigen::VectorXd& code);

}  // namespace risloc
