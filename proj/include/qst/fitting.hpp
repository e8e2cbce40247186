#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "qst/gradient.hpp"
#include "qst/signal_model.hpp"

namespace qst {

// Stopping contract for the damped least-squares fits. The gradient and
// step tolerances apply in an internally scaled parameter space (D is
// measured in units of 1e-3 mm^2/s there) so they mean the same thing
// for both parameters.
struct FitOptions {
  double d_min = kDMin;
  double d_max = kDMax;
  double alpha_min = kAlphaMin;
  double alpha_max = kAlphaMax;
  double gtol = 1e-8;   // projected-gradient infinity norm
  double xtol = 1e-10;  // relative step
  int max_iter = 200;
};

// One diffusion-weighted sample along a direction.
struct BSample {
  double b = 0.0;       // [s/mm^2]
  double signal = 0.0;  // same units as s0
};

struct InitGuess {
  StretchedParams params;
  bool degraded = false;  // fallback used, no usable sample pair
};

// Initial (D, alpha): alpha from the log(-log E) vs log(b) slope between
// the lowest and highest valid samples, D by inverting the lowest-b one.
InitGuess init_stretched(const std::vector<BSample>& samples, double s0,
                         const FitOptions& options = {});

struct DirectionFit {
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();
  StretchedParams params;
  double rss = 0.0;  // sum of squared residuals, signal units^2
  int n_iter = 0;
  bool converged = false;
  bool at_bound_d = false;
  bool at_bound_alpha = false;
  bool degraded_init = false;
  int n_samples = 0;  // samples surviving the attenuation window
};

// Bound-constrained least squares of S(b) = s0 * exp(-(b D)^alpha) for
// one direction. Only samples whose attenuation lies strictly inside the
// clamp window enter the cost. Throws DataError when fewer than two
// valid samples at distinct b remain.
DirectionFit fit_stretched_direction(const std::vector<BSample>& samples, double s0,
                                     const FitOptions& options = {},
                                     const Eigen::Vector3d& direction = Eigen::Vector3d::Zero());

struct StretchedVoxelFit {
  std::vector<DirectionFit> fits;  // one per bundle complete over the subset
  double s0 = 0.0;
  std::array<int, 3> voxel_index{0, 0, 0};
};

// Per-voxel fit across all bundles that are complete over shell_subset
// (indices into grouping; empty = all shells). Directions that cannot be
// fitted are returned with converged = false instead of aborting.
StretchedVoxelFit fit_stretched_voxel(const std::vector<double>& voxel_signals,
                                      const GradientScheme& scheme,
                                      const ShellGrouping& grouping,
                                      const DirectionBundleSet& bundles,
                                      const std::vector<int>& shell_subset = {},
                                      const FitOptions& options = {},
                                      std::optional<double> s0_override = {});

inline constexpr double kEigenvalueFloor = 1e-6;  // [mm^2/s]

struct TensorFit {
  std::array<double, 6> components{};   // Dxx, Dyy, Dzz, Dxy, Dxz, Dyz [mm^2/s]
  std::array<double, 3> eigenvalues{};  // sorted descending, >= kEigenvalueFloor
  bool converged = false;
  int n_iter = 0;
};

// Weighted log-linear tensor estimate refined by damped nonlinear least
// squares on S = s0 exp(-b g^T D g). measurement_subset selects the
// diffusion-weighted measurements to use (empty = all with b > 0).
TensorFit fit_dti(const std::vector<double>& voxel_signals, const GradientScheme& scheme,
                  const std::vector<int>& measurement_subset = {},
                  const FitOptions& options = {},
                  std::optional<double> s0_override = {});

}  // namespace qst
