#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qst::sphere {

// Quadrature rule on the unit sphere. Weights sum to 4*pi.
struct Rule {
  std::vector<Eigen::Vector3d> dirs;
  std::vector<double> weights;

  int size() const { return static_cast<int>(dirs.size()); }
};

// Deterministic quasi-uniform point set (golden-angle spiral).
std::vector<Eigen::Vector3d> fibonacci_directions(int n);

// Equal weights 4*pi/N on a caller-supplied direction set. This is the
// default for acquisition-aligned direction averages.
Rule uniform_rule(const std::vector<Eigen::Vector3d>& dirs);

// Gauss-Legendre in cos(theta) times a trapezoid in phi (2*n_theta nodes).
// Spectrally accurate for smooth integrands; used for oracle-grade runs.
Rule gauss_product_rule(int n_theta);

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

// Smallest angle between two axes, identifying g with -g. Radians.
double axial_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace qst::sphere
