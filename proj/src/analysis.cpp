#include "qst/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "qst/errors.hpp"
#include "qst/exports.hpp"
#include "qst/sh.hpp"
#include "qst/fit_store.hpp"

namespace qst {

double pearson(const Volume4D& map_a, const Volume4D& map_b, const Mask& mask) {
  if (map_a.dims != map_b.dims) throw DataError("pearson: map dimensions differ");
  if (map_a.nv() != 1) throw DataError("pearson: expected scalar maps");

  double mean_a = 0.0, mean_b = 0.0;
  int64_t n = 0;
  for (int64_t z = 0; z < map_a.nz(); ++z)
    for (int64_t y = 0; y < map_a.ny(); ++y)
      for (int64_t x = 0; x < map_a.nx(); ++x) {
        if (!mask(x, y, z)) continue;
        const double a = map_a.at(x, y, z), b = map_b.at(x, y, z);
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        mean_a += a;
        mean_b += b;
        ++n;
      }
  if (n < 2) throw DataError("pearson: fewer than two usable voxels");
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (int64_t z = 0; z < map_a.nz(); ++z)
    for (int64_t y = 0; y < map_a.ny(); ++y)
      for (int64_t x = 0; x < map_a.nx(); ++x) {
        if (!mask(x, y, z)) continue;
        const double a = map_a.at(x, y, z), b = map_b.at(x, y, z);
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        saa += (a - mean_a) * (a - mean_a);
        sbb += (b - mean_b) * (b - mean_b);
        sab += (a - mean_a) * (b - mean_b);
      }
  if (saa == 0.0 || sbb == 0.0) throw DataError("pearson: zero variance in a map");
  return sab / std::sqrt(saa * sbb);
}

namespace {

double mean_abs_change(const Volume4D& a, const Volume4D& b, const Mask& mask) {
  double sum = 0.0;
  int64_t n = 0;
  for (int64_t z = 0; z < a.nz(); ++z)
    for (int64_t y = 0; y < a.ny(); ++y)
      for (int64_t x = 0; x < a.nx(); ++x) {
        if (!mask(x, y, z)) continue;
        const double va = a.at(x, y, z), vb = b.at(x, y, z);
        if (!std::isfinite(va) || !std::isfinite(vb)) continue;
        sum += std::abs(vb - va);
        ++n;
      }
  if (n == 0) throw DataError("bmax_sweep: no overlapping voxels between configurations");
  return sum / static_cast<double>(n);
}

double mean_abs(const Volume4D& a, const Mask& mask) {
  double sum = 0.0;
  int64_t n = 0;
  for (int64_t z = 0; z < a.nz(); ++z)
    for (int64_t y = 0; y < a.ny(); ++y)
      for (int64_t x = 0; x < a.nx(); ++x) {
        if (!mask(x, y, z)) continue;
        const double v = a.at(x, y, z);
        if (!std::isfinite(v)) continue;
        sum += std::abs(v);
        ++n;
      }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

SweepResult bmax_sweep(const Volume4D& dwi, const GradientScheme& scheme,
                       const ShellGrouping& grouping, const DirectionBundleSet& bundles,
                       const std::vector<double>& b_max_list, double b_eval,
                       Estimator method, const FitOptions& options, const Mask& mask,
                       int threads) {
  if (b_max_list.empty()) throw DataError("bmax_sweep: empty b_max list");
  std::vector<double> b_max = b_max_list;
  std::sort(b_max.begin(), b_max.end());

  SweepResult sweep;
  sweep.b_eval = b_eval;
  sweep.config_names = {"stretched-fixed-b", "stretched-bmax", "gaussian-single-shell"};
  sweep.changes.resize(3);
  sweep.mean_abs.resize(3);

  // maps[config][measure] for the previous b_max
  std::vector<std::array<Volume4D, 3>> prev(3), cur(3);

  for (size_t k = 0; k < b_max.size(); ++k) {
    std::vector<int> subset;
    for (int s = 0; s < grouping.n_shells(); ++s)
      if (grouping.shell_b_centers[s] <= b_max[k] + kDefaultBTolerance) subset.push_back(s);
    if (subset.size() < 2)
      throw DataError("bmax_sweep: b_max = " + std::to_string(b_max[k]) +
                      " leaves fewer than the two shells needed for the stretched fit");
    const double realized_bmax = grouping.shell_b_centers[static_cast<size_t>(subset.back())];
    sweep.b_max.push_back(realized_bmax);

    const FitVolume fit =
        fit_stretched_volume(dwi, scheme, grouping, bundles, subset, options, mask, threads);

    MapConfig cfg_fixed{method, ESource::fitted, false, b_eval, 0, kDefaultShOrder,
                        kDefaultShLambda};
    MapConfig cfg_bmax{method, ESource::fitted, false, realized_bmax, 0, kDefaultShOrder,
                       kDefaultShLambda};
    MapConfig cfg_gauss{Estimator::direct, ESource::measured, true, realized_bmax, 0,
                        kDefaultShOrder, kDefaultShLambda};
    const QMaps m_fixed = compute_maps(fit, scheme, grouping, bundles, &dwi, cfg_fixed, mask, threads);
    const QMaps m_bmax = compute_maps(fit, scheme, grouping, bundles, &dwi, cfg_bmax, mask, threads);
    const QMaps m_gauss = compute_maps(fit, scheme, grouping, bundles, &dwi, cfg_gauss, mask, threads);

    cur[0] = {m_fixed.rtop, m_fixed.qmsd, m_fixed.qmfd};
    cur[1] = {m_bmax.rtop, m_bmax.qmsd, m_bmax.qmfd};
    cur[2] = {m_gauss.rtop, m_gauss.qmsd, m_gauss.qmfd};

    for (int c = 0; c < 3; ++c)
      for (int m = 0; m < 3; ++m) {
        sweep.mean_abs[static_cast<size_t>(c)][static_cast<size_t>(m)].push_back(
            mean_abs(cur[static_cast<size_t>(c)][static_cast<size_t>(m)], mask));
        if (k > 0)
          sweep.changes[static_cast<size_t>(c)][static_cast<size_t>(m)].push_back(
              mean_abs_change(prev[static_cast<size_t>(c)][static_cast<size_t>(m)],
                              cur[static_cast<size_t>(c)][static_cast<size_t>(m)], mask));
      }
    prev = cur;
  }
  return sweep;
}

std::string sweep_csv(const SweepResult& sweep) {
  const char* measures[3] = {"rtop", "qmsd", "qmfd"};
  std::string csv = "config,measure,b_max_prev,b_max,mean_abs_change,mean_abs_at_bmax\n";
  for (size_t c = 0; c < sweep.config_names.size(); ++c)
    for (int m = 0; m < 3; ++m)
      for (size_t k = 0; k + 1 < sweep.b_max.size(); ++k) {
        csv += sweep.config_names[c] + "," + measures[m] + "," +
               format_double(sweep.b_max[k]) + "," + format_double(sweep.b_max[k + 1]) + "," +
               format_double(sweep.changes[c][static_cast<size_t>(m)][k]) + "," +
               format_double(sweep.mean_abs[c][static_cast<size_t>(m)][k + 1]) + "\n";
      }
  return csv;
}

}  // namespace qst
