#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qst {

// Defaults for optional shell resampling. The order/regularization pair
// is configurable; these values are conservative rather than validated.
inline constexpr int kDefaultShOrder = 6;
inline constexpr double kDefaultShLambda = 0.006;

// Number of real even-order spherical-harmonic coefficients up to order_L.
int sh_coeff_count(int order_L);

// Real, symmetric (even-order) orthonormal SH basis evaluated at each
// direction; one row per direction, one column per (l, m).
Eigen::MatrixXd sh_basis(const std::vector<Eigen::Vector3d>& dirs, int order_L);

// Least-squares SH fit with a Laplace-Beltrami penalty lambda_reg,
// evaluated at target_directions. With lambda_reg = 0 any signal in the
// basis span is reproduced exactly.
std::vector<double> resample_shell_sh(const std::vector<double>& signals,
                                      const std::vector<Eigen::Vector3d>& directions,
                                      const std::vector<Eigen::Vector3d>& target_directions,
                                      int order_L, double lambda_reg);

}  // namespace qst
