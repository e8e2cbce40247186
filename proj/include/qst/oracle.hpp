#pragma once

#include <Eigen/Dense>
#include <functional>

#include "qst/sphere.hpp"

namespace qst::oracle {

// Tensor-product quadrature controls for the full 3-D moment integral.
// q_max = 0 selects the automatic radial truncation: the q where the
// integrand's exponential factor reaches exp(-40) for the slowest-
// decaying direction.
struct QuadratureSpec {
  int radial_nodes = 128;   // Gauss-Legendre on [0, q_max]
  int sphere_theta = 24;    // product rule: sphere_theta x 2*sphere_theta nodes
  double q_max = 0.0;       // [1/mm]; 0 = automatic
  double tol = 1e-8;        // relative, for the refinement stop
  int max_refinements = 3;
};

struct BruteForceResult {
  double value = 0.0;
  double rel_error_estimate = 0.0;  // from node doubling + tail doubling
  int refinements = 0;
};

// Evaluates  int q^(n+2) exp(-(4 pi^2 tau q^2 D(g))^alpha(g)) dq dSigma
// over R^3 in spherical coordinates by tensor-product quadrature,
// refining (and doubling q_max) until the estimate changes by less than
// spec.tol relative. Throws NumericalError when the refinement cap is
// reached with the estimate still above tol.
BruteForceResult brute_force_moment(const std::function<double(const Eigen::Vector3d&)>& d_fn,
                                    const std::function<double(const Eigen::Vector3d&)>& alpha_fn,
                                    double tau, int n, const QuadratureSpec& spec = {});

}  // namespace qst::oracle
