#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qst/sphere.hpp"

namespace qst {

enum class Estimator { direct, expansion, analytic, dti };

std::string to_string(Estimator e);

// One scalar q-space moment M_n. Units mm^-(n+3): RTOP = M_0 [mm^-3],
// QMSD = M_2 [mm^-5], QMFD = M_4 [mm^-7].
struct MomentResult {
  int n = 0;
  double value = 0.0;
  Estimator estimator = Estimator::direct;
  double shell_b = std::numeric_limits<double>::quiet_NaN();  // set by shell-level callers
  int n_clamped = 0;   // attenuations pulled to the clamp window boundary
  int n_excluded = 0;  // attenuations outside (0, 1), dropped from the average
};

// tgamma with a loud failure on overflow or invalid argument. The
// moment exponent (n+3)/(2*alpha) overflows any double-width gamma once
// alpha approaches its lower bound, and a silent inf would poison maps.
double checked_tgamma(double x);

// Moment from a single shell of per-direction attenuations at |q| = q:
//   M_n = 2*pi * q^(n+3) * mean_i[ Gamma(nu_i)/alpha_i * (-log E_i)^(-nu_i) ],
// nu_i = (n+3)/(2*alpha_i). The mean times 4*pi realizes the unit-sphere
// surface integral under the evenly-distributed-directions assumption;
// the constant is pinned so the isotropic Gaussian case reproduces
// (4*pi*tau*D)^(-3/2) exactly.
MomentResult moment_direct(const std::vector<double>& shell_attenuations,
                           const std::vector<double>& alphas, double q, int n);

// Second-order series-expansion variant: the expectation of the
// direction average is expanded around <-log E> to second order, which
// tames the reciprocal log as E -> 1. Collapses to moment_direct when E
// and alpha are direction-constant.
MomentResult moment_expansion(const std::vector<double>& shell_attenuations,
                              const std::vector<double>& alphas, double q, int n);

// Surface-quadrature evaluation of the radially reduced moment integral:
//   M_n = C_n(tau) * sum_k w_k * Gamma(nu_k)/alpha_k * D_k^(-(n+3)/2),
// C_n(tau) = 2^(-n-4) * pi^(-n-3) * tau^(-(n+3)/2). Quadrature weights
// must sum to 4*pi.
MomentResult moment_analytic(const std::function<double(const Eigen::Vector3d&)>& d_fn,
                             const std::function<double(const Eigen::Vector3d&)>& alpha_fn,
                             double tau, int n, const sphere::Rule& rule);

enum class RtopConvention {
  paper,     // (3*pi*tau)^(-3/2) (lambda1*lambda2*lambda3)^(-1/2)
  gaussian,  // (4*pi*tau)^(-3/2) (lambda1*lambda2*lambda3)^(-1/2), the exact
             // Gaussian-EAP integral under b = 4*pi^2*tau*q^2
};

// RTOP directly from diffusion tensor eigenvalues. The two prefactor
// conventions disagree by (4/3)^(3/2); neither is silently corrected.
double rtop_dti(const std::array<double, 3>& eigenvalues, double tau,
                RtopConvention convention);

}  // namespace qst
