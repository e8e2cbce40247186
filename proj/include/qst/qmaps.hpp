#pragma once

#include <optional>
#include <string>

#include "qst/fit_store.hpp"
#include "qst/gradient.hpp"
#include "qst/qspace.hpp"
#include "qst/volume.hpp"

#include "json.hpp"

namespace qst {

// Where the shell attenuations entering the estimators come from.
// `fitted` predicts E at the evaluation shell from each direction fit,
// which makes the measures consistent across shells by construction;
// `measured` takes the raw shell signals (with the fitted alphas).
enum class ESource { fitted, measured };

struct MapConfig {
  Estimator method = Estimator::direct;  // direct or expansion
  ESource source = ESource::fitted;
  bool unit_alpha = false;  // alpha == 1: the single-shell Gaussian baseline
  double shell_b = 0.0;     // evaluation shell b-value [s/mm^2]
  int resample_dirs = 0;    // > 0: SH-resample (E, alpha) onto this many directions
  int sh_order = 6;
  double sh_lambda = 0.006;
};

struct QMaps {
  Volume4D rtop;  // [mm^-3]
  Volume4D qmsd;  // [mm^-5]
  Volume4D qmfd;  // [mm^-7]
  nlohmann::json meta;  // estimator provenance, written as the JSON sidecar
};

// Scalar maps from a fitted volume. `dwi` is required in measured mode
// (and must match the scheme the fit was made from); grouping/bundles
// must describe the same acquisition. Voxels outside the mask are NaN.
QMaps compute_maps(const FitVolume& fits, const GradientScheme& scheme,
                   const ShellGrouping& grouping, const DirectionBundleSet& bundles,
                   const Volume4D* dwi, const MapConfig& config, const Mask& mask = {},
                   int threads = 1);

std::string map_config_label(const MapConfig& config);

}  // namespace qst
