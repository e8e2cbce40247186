#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qst/fitting.hpp"
#include "qst/volume.hpp"

namespace qst {

// Per-direction fit record flags.
inline constexpr uint8_t kFitConverged = 1;
inline constexpr uint8_t kFitAtBoundD = 2;
inline constexpr uint8_t kFitAtBoundAlpha = 4;
inline constexpr uint8_t kFitDegradedInit = 8;

struct FitRecord {
  double d = 0.0;
  double alpha = 0.0;
  double rss = 0.0;
  uint32_t n_iter = 0;
  uint8_t flags = 0;

  bool converged() const { return flags & kFitConverged; }
};

// Fitted stretched representation for a whole volume: one record per
// (voxel, bundle). Fitting dominates runtime, so this container is
// persisted and reused across map evaluations at different shells.
struct FitVolume {
  std::array<int64_t, 3> dims{0, 0, 0};
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  std::array<double, 16> affine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  double tau = 0.0;
  std::vector<double> shell_bvals;              // shell centers used by the fit
  std::vector<Eigen::Vector3d> bundle_dirs;     // canonical directions
  std::vector<uint8_t> has_fit;                 // per voxel
  std::vector<double> s0;                       // per voxel
  std::vector<FitRecord> records;               // voxel-major, bundle-minor

  int n_bundles() const { return static_cast<int>(bundle_dirs.size()); }
  int64_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }
  size_t record_index(int64_t voxel, int bundle) const {
    return static_cast<size_t>(voxel) * static_cast<size_t>(n_bundles()) +
           static_cast<size_t>(bundle);
  }
};

// Fits every masked voxel of a 4-D acquisition (parallel map over
// voxels; output independent of thread count). Voxels outside the mask
// get has_fit = 0.
FitVolume fit_stretched_volume(const Volume4D& dwi, const GradientScheme& scheme,
                               const ShellGrouping& grouping,
                               const DirectionBundleSet& bundles,
                               const std::vector<int>& shell_subset = {},
                               const FitOptions& options = {}, const Mask& mask = {},
                               int threads = 1);

// Binary container: little-endian, fixed magic/version, then dims and
// per-voxel records. Layout is documented in the reader.
void write_fit_volume(const FitVolume& fit, const std::string& path);
FitVolume read_fit_volume(const std::string& path);

}  // namespace qst
