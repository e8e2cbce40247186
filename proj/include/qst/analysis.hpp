#pragma once

#include <array>
#include <string>
#include <vector>

#include "qst/fitting.hpp"
#include "qst/gradient.hpp"
#include "qst/qmaps.hpp"
#include "qst/volume.hpp"

namespace qst {

// Sample Pearson correlation over voxels that are masked and finite in
// both maps. Throws on fewer than two usable voxels or zero variance.
double pearson(const Volume4D& map_a, const Volume4D& map_b, const Mask& mask = {});

// Stability sweep: refit with all shells up to each b_max, then compute
// the three measures under three configurations and report the mean
// absolute voxel-wise change between consecutive b_max values.
struct SweepResult {
  std::vector<double> b_max;                     // ascending, as realized shell centers
  std::vector<std::string> config_names;         // estimator configurations
  // [config][measure(0=rtop,1=qmsd,2=qmfd)][pair k-1 -> k]
  std::vector<std::array<std::vector<double>, 3>> changes;
  // mean |map| per b_max, same indexing; for relative comparisons
  std::vector<std::array<std::vector<double>, 3>> mean_abs;
  std::string pairing = "consecutive-pair";
  double b_eval = 0.0;
};

SweepResult bmax_sweep(const Volume4D& dwi, const GradientScheme& scheme,
                       const ShellGrouping& grouping, const DirectionBundleSet& bundles,
                       const std::vector<double>& b_max_list, double b_eval,
                       Estimator method = Estimator::direct, const FitOptions& options = {},
                       const Mask& mask = {}, int threads = 1);

std::string sweep_csv(const SweepResult& sweep);

}  // namespace qst
