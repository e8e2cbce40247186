#include "qst/sh.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qst/errors.hpp"

namespace qst {

namespace {

// Associated Legendre P_l^m(x), m >= 0, without the Condon-Shortley phase.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double sh_normalization(int l, int m) {
  double ratio = 1.0;  // (l-m)! / (l+m)!
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= static_cast<double>(k);
  return std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
}

}  // namespace

int sh_coeff_count(int order_L) {
  if (order_L < 0 || order_L % 2 != 0)
    throw std::invalid_argument("sh order must be even and non-negative");
  return (order_L + 1) * (order_L + 2) / 2;
}

Eigen::MatrixXd sh_basis(const std::vector<Eigen::Vector3d>& dirs, int order_L) {
  const int n_coef = sh_coeff_count(order_L);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(dirs.size()), n_coef);
  for (size_t i = 0; i < dirs.size(); ++i) {
    const Eigen::Vector3d g = dirs[i].normalized();
    const double ct = g.z();
    const double phi = std::atan2(g.y(), g.x());
    int col = 0;
    for (int l = 0; l <= order_L; l += 2) {
      for (int m = -l; m <= l; ++m) {
        const int am = std::abs(m);
        const double np = sh_normalization(l, am) * assoc_legendre(l, am, ct);
        double v;
        if (m == 0)
          v = np;
        else if (m > 0)
          v = std::numbers::sqrt2 * np * std::cos(m * phi);
        else
          v = std::numbers::sqrt2 * np * std::sin(am * phi);
        basis(static_cast<Eigen::Index>(i), col++) = v;
      }
    }
  }
  return basis;
}

std::vector<double> resample_shell_sh(const std::vector<double>& signals,
                                      const std::vector<Eigen::Vector3d>& directions,
                                      const std::vector<Eigen::Vector3d>& target_directions,
                                      int order_L, double lambda_reg) {
  if (signals.size() != directions.size())
    throw DataError("resample_shell_sh: " + std::to_string(signals.size()) +
                    " signals for " + std::to_string(directions.size()) + " directions");
  if (lambda_reg < 0.0) throw DataError("resample_shell_sh: negative regularization");
  for (double s : signals)
    if (!std::isfinite(s)) throw DataError("resample_shell_sh: non-finite signal");

  const int n_coef = sh_coeff_count(order_L);
  if (static_cast<int>(directions.size()) < n_coef)
    throw DataError("resample_shell_sh: " + std::to_string(directions.size()) +
                    " directions cannot determine " + std::to_string(n_coef) +
                    " coefficients at order " + std::to_string(order_L));

  const Eigen::MatrixXd basis = sh_basis(directions, order_L);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < n_coef)
    throw DataError("resample_shell_sh: rank-deficient design matrix (rank " +
                    std::to_string(qr.rank()) + " < " + std::to_string(n_coef) +
                    "); directions are too few or degenerate");

  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(signals.data(), static_cast<Eigen::Index>(signals.size()));

  Eigen::VectorXd coef;
  if (lambda_reg == 0.0) {
    coef = qr.solve(y);
  } else {
    // Laplace-Beltrami penalty: diag((l(l+1))^2) per coefficient.
    Eigen::VectorXd penalty(n_coef);
    int col = 0;
    for (int l = 0; l <= order_L; l += 2)
      for (int m = -l; m <= l; ++m, ++col)
        penalty(col) = static_cast<double>(l * (l + 1)) * static_cast<double>(l * (l + 1));
    Eigen::MatrixXd normal = basis.transpose() * basis;
    normal.diagonal() += lambda_reg * penalty;
    coef = normal.ldlt().solve(basis.transpose() * y);
  }

  const Eigen::MatrixXd target_basis = sh_basis(target_directions, order_L);
  const Eigen::VectorXd out = target_basis * coef;
  return {out.data(), out.data() + out.size()};
}

}  // namespace qst
