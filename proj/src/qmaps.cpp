#include "qst/qmaps.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "qst/errors.hpp"
#include "qst/exports.hpp"
#include "qst/parallel.hpp"
#include "qst/sh.hpp"
#include "qst/signal_model.hpp"
#include "qst/sphere.hpp"
#include "qst/version.hpp"

namespace qst {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string map_config_label(const MapConfig& config) {
  std::string label = to_string(config.method);
  label += config.source == ESource::fitted ? "/fitted" : "/measured";
  if (config.unit_alpha) label += "/gaussian";
  return label;
}

QMaps compute_maps(const FitVolume& fits, const GradientScheme& scheme,
                   const ShellGrouping& grouping, const DirectionBundleSet& bundles,
                   const Volume4D* dwi, const MapConfig& config, const Mask& mask,
                   int threads) {
  if (config.method != Estimator::direct && config.method != Estimator::expansion)
    throw DataError("compute_maps: estimator must be direct or expansion");
  const int shell = grouping.find_shell(config.shell_b);
  if (shell < 0)
    throw DataError("compute_maps: b = " + std::to_string(config.shell_b) +
                    " is not a shell of this acquisition");
  const double shell_b = grouping.shell_b_centers[shell];
  const double q = q_from_b(shell_b, fits.tau);

  if (config.source == ESource::measured && dwi == nullptr)
    throw DataError("compute_maps: measured mode needs the acquisition data");
  if (dwi && (dwi->dims[0] != fits.dims[0] || dwi->dims[1] != fits.dims[1] ||
              dwi->dims[2] != fits.dims[2] || dwi->nv() != scheme.n_measurements()))
    throw DataError("compute_maps: acquisition dims do not match the fit volume");

  // Map each fit record back to its bundle (records cover the bundles
  // complete over the fit's shell subset, in bundle order).
  std::vector<int> record_bundle;
  {
    std::vector<int> subset_shells;
    for (double b : fits.shell_bvals) {
      const int s = grouping.find_shell(b);
      if (s < 0)
        throw DataError("compute_maps: fit shell b = " + std::to_string(b) +
                        " is missing from this acquisition");
      subset_shells.push_back(s);
    }
    for (size_t k = 0; k < bundles.bundles.size(); ++k) {
      bool complete = true;
      for (int s : subset_shells)
        if (bundles.bundles[k].member[s] < 0) complete = false;
      if (complete) record_bundle.push_back(static_cast<int>(k));
    }
    if (static_cast<int>(record_bundle.size()) != fits.n_bundles())
      throw DataError("compute_maps: bundle structure does not match the fit container (" +
                      std::to_string(record_bundle.size()) + " vs " +
                      std::to_string(fits.n_bundles()) + " bundles)");
    for (int r = 0; r < fits.n_bundles(); ++r) {
      const auto& stored = fits.bundle_dirs[static_cast<size_t>(r)];
      const auto& live = bundles.bundles[static_cast<size_t>(record_bundle[r])].canonical;
      if (sphere::axial_angle(stored, live) > 1e-6)
        throw DataError("compute_maps: bundle directions do not match the fit container");
    }
  }

  const auto [nx, ny, nz] = fits.dims;
  QMaps maps;
  maps.rtop = Volume4D::create(nx, ny, nz, 1, kNaN);
  maps.qmsd = Volume4D::create(nx, ny, nz, 1, kNaN);
  maps.qmfd = Volume4D::create(nx, ny, nz, 1, kNaN);
  for (auto* v : {&maps.rtop, &maps.qmsd, &maps.qmfd}) {
    v->voxel_size = fits.voxel_size;
    v->affine = fits.affine;
  }

  std::optional<std::vector<Eigen::Vector3d>> resample_targets;
  if (config.resample_dirs > 0)
    resample_targets = sphere::fibonacci_directions(config.resample_dirs);

  std::atomic<int64_t> n_masked{0};
  std::atomic<int64_t> n_clamped{0};
  std::atomic<int64_t> n_excluded{0};

  parallel_for(fits.n_voxels(), threads, [&](int64_t vi) {
    const int64_t x = vi % nx;
    const int64_t y = (vi / nx) % ny;
    const int64_t z = vi / (nx * ny);
    if (!mask(x, y, z) || !fits.has_fit[static_cast<size_t>(vi)]) return;
    n_masked.fetch_add(1, std::memory_order_relaxed);

    std::vector<double> e_vals, alphas;
    std::vector<Eigen::Vector3d> dirs;
    e_vals.reserve(static_cast<size_t>(fits.n_bundles()));
    for (int r = 0; r < fits.n_bundles(); ++r) {
      const FitRecord& rec = fits.records[fits.record_index(vi, r)];
      if (!rec.converged()) continue;  // unconverged directions are excluded
      double e;
      if (config.source == ESource::fitted) {
        e = predict_attenuation({rec.d, rec.alpha}, shell_b);
      } else {
        const int meas = bundles.bundles[static_cast<size_t>(record_bundle[r])].member[shell];
        const double s0 = fits.s0[static_cast<size_t>(vi)];
        e = dwi->at(x, y, z, meas) / s0;
      }
      e_vals.push_back(e);
      alphas.push_back(config.unit_alpha ? 1.0 : rec.alpha);
      dirs.push_back(fits.bundle_dirs[static_cast<size_t>(r)]);
    }
    if (e_vals.empty())
      throw NumericalError("compute_maps: no converged direction at voxel (" +
                           std::to_string(x) + ", " + std::to_string(y) + ", " +
                           std::to_string(z) + ")");

    if (resample_targets) {
      // Uniform re-gridding of both per-direction inputs. Attenuations
      // can leave (0,1) by ringing; the estimators clamp them.
      e_vals = resample_shell_sh(e_vals, dirs, *resample_targets, config.sh_order,
                                 config.sh_lambda);
      alphas = resample_shell_sh(alphas, dirs, *resample_targets, config.sh_order,
                                 config.sh_lambda);
      for (double& a : alphas) a = std::clamp(a, kAlphaMin, kAlphaMax);
    }

    double out[3];
    for (int k = 0; k < 3; ++k) {
      const MomentResult m = config.method == Estimator::direct
                                 ? moment_direct(e_vals, alphas, q, 2 * k)
                                 : moment_expansion(e_vals, alphas, q, 2 * k);
      out[k] = m.value;
      if (k == 0) {
        n_clamped.fetch_add(m.n_clamped, std::memory_order_relaxed);
        n_excluded.fetch_add(m.n_excluded, std::memory_order_relaxed);
      }
    }
    maps.rtop.at(x, y, z) = out[0];
    maps.qmsd.at(x, y, z) = out[1];
    maps.qmfd.at(x, y, z) = out[2];
  });

  if (n_masked.load() == 0) throw DataError("compute_maps: empty mask (no fitted voxel)");

  nlohmann::json meta;
  meta["tool"] = "qstretch";
  meta["version"] = kVersion;
  meta["estimator"] = to_string(config.method);
  meta["e_source"] = config.source == ESource::fitted ? "fitted" : "measured";
  meta["unit_alpha"] = config.unit_alpha;
  meta["shell_b"] = shell_b;
  meta["tau"] = fits.tau;
  meta["fit_shells"] = fits.shell_bvals;
  meta["n_bundles"] = fits.n_bundles();
  meta["n_voxels"] = n_masked.load();
  meta["n_clamped_attenuations"] = n_clamped.load();
  meta["n_excluded_attenuations"] = n_excluded.load();
  if (config.resample_dirs > 0) {
    meta["resample_dirs"] = config.resample_dirs;
    meta["sh_order"] = config.sh_order;
    meta["sh_lambda"] = config.sh_lambda;
  }
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(meta.dump())));
  meta["config_hash"] = hash;
  maps.meta = std::move(meta);
  return maps;
}

}  // namespace qst
