#include "qst/sphere.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qst::sphere {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::vector<Eigen::Vector3d> fibonacci_directions(int n) {
  if (n < 1) throw std::invalid_argument("fibonacci_directions: n < 1");
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

Rule uniform_rule(const std::vector<Eigen::Vector3d>& dirs) {
  if (dirs.empty()) throw std::invalid_argument("uniform_rule: empty direction set");
  Rule rule;
  rule.dirs = dirs;
  rule.weights.assign(dirs.size(), 4.0 * kPi / static_cast<double>(dirs.size()));
  return rule;
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (n < 2) throw std::invalid_argument("gauss_legendre: n < 2");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess, refined by Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double xl = 0.5 * (b - a);
    const double xm = 0.5 * (b + a);
    nodes[i] = xm - xl * x;
    nodes[n - 1 - i] = xm + xl * x;
    weights[i] = 2.0 * xl / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

Rule gauss_product_rule(int n_theta) {
  std::vector<double> ct, wt;
  gauss_legendre(n_theta, -1.0, 1.0, ct, wt);
  const int n_phi = 2 * n_theta;
  const double w_phi = 2.0 * kPi / n_phi;
  Rule rule;
  rule.dirs.reserve(static_cast<size_t>(n_theta) * n_phi);
  rule.weights.reserve(static_cast<size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double z = ct[i];
    const double st = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = w_phi * j;
      rule.dirs.emplace_back(st * std::cos(phi), st * std::sin(phi), z);
      rule.weights.push_back(wt[i] * w_phi);
    }
  }
  return rule;
}

double axial_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return kPi / 2.0;
  double c = std::abs(a.dot(b)) / (na * nb);
  c = std::min(1.0, c);
  return std::acos(c);
}

}  // namespace qst::sphere
