#include "qst/fit_store.hpp"

#include <cstring>
#include <numeric>
#include <fstream>

#include "qst/errors.hpp"
#include "qst/parallel.hpp"

namespace qst {

namespace {

// File layout (all scalars little-endian):
//   char[8]  magic "QSTFIT1\0"
//   u32      endian sentinel 0x01020304
//   u32      nx, ny, nz, n_bundles, n_shells
//   f64      tau
//   f64[3]   voxel_size
//   f64[16]  affine (row-major)
//   f64[n_shells]       shell b centers
//   f64[3*n_bundles]    bundle directions
//   per voxel (x fastest): u8 has_fit, f64 s0,
//     then n_bundles x { f64 d, f64 alpha, f64 rss, u32 n_iter, u8 flags }
constexpr char kMagic[8] = {'Q', 'S', 'T', 'F', 'I', 'T', '1', '\0'};
constexpr uint32_t kSentinel = 0x01020304u;

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw DataError("cannot open " + path + " for writing");
  }
  template <typename T>
  void put(const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
};

struct Reader {
  std::ifstream in;
  std::string path;
  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw DataError("cannot open " + p);
  }
  template <typename T>
  T get() {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(path + ": truncated fit container");
    return v;
  }
};

}  // namespace

FitVolume fit_stretched_volume(const Volume4D& dwi, const GradientScheme& scheme,
                               const ShellGrouping& grouping,
                               const DirectionBundleSet& bundles,
                               const std::vector<int>& shell_subset,
                               const FitOptions& options, const Mask& mask, int threads) {
  if (dwi.nv() != scheme.n_measurements())
    throw DataError("fit volume: acquisition has " + std::to_string(dwi.nv()) +
                    " volumes but the gradient table lists " +
                    std::to_string(scheme.n_measurements()));

  std::vector<int> subset = shell_subset;
  if (subset.empty()) {
    subset.resize(grouping.n_shells());
    std::iota(subset.begin(), subset.end(), 0);
  }
  if (subset.size() < 2)
    throw DataError("fit volume: the stretched representation needs at least two shells, "
                    "got " + std::to_string(subset.size()));

  FitVolume fit;
  fit.dims = {dwi.dims[0], dwi.dims[1], dwi.dims[2]};
  fit.voxel_size = dwi.voxel_size;
  fit.affine = dwi.affine;
  fit.tau = scheme.tau;
  for (int s : subset) {
    if (s < 0 || s >= grouping.n_shells())
      throw DataError("fit volume: shell index out of range");
    fit.shell_bvals.push_back(grouping.shell_b_centers[s]);
  }
  for (const auto& bundle : bundles.bundles) {
    bool complete = true;
    for (int s : subset)
      if (bundle.member[s] < 0) complete = false;
    if (complete) fit.bundle_dirs.push_back(bundle.canonical);
  }
  if (fit.bundle_dirs.empty())
    throw DataError("fit volume: no direction bundle is complete over the shell subset");

  const int64_t n_vox = fit.n_voxels();
  fit.has_fit.assign(static_cast<size_t>(n_vox), 0);
  fit.s0.assign(static_cast<size_t>(n_vox), 0.0);
  fit.records.assign(static_cast<size_t>(n_vox) * fit.bundle_dirs.size(), FitRecord{});

  parallel_for(n_vox, threads, [&](int64_t vi) {
    const int64_t x = vi % fit.dims[0];
    const int64_t y = (vi / fit.dims[0]) % fit.dims[1];
    const int64_t z = vi / (fit.dims[0] * fit.dims[1]);
    if (!mask(x, y, z)) return;

    std::vector<double> signals(static_cast<size_t>(dwi.nv()));
    for (int64_t m = 0; m < dwi.nv(); ++m) signals[static_cast<size_t>(m)] = dwi.at(x, y, z, m);

    const StretchedVoxelFit voxel =
        fit_stretched_voxel(signals, scheme, grouping, bundles, subset, options);
    fit.has_fit[static_cast<size_t>(vi)] = 1;
    fit.s0[static_cast<size_t>(vi)] = voxel.s0;
    for (size_t k = 0; k < voxel.fits.size(); ++k) {
      const DirectionFit& df = voxel.fits[k];
      FitRecord rec;
      rec.d = df.params.d;
      rec.alpha = df.params.alpha;
      rec.rss = df.rss;
      rec.n_iter = static_cast<uint32_t>(df.n_iter);
      rec.flags = static_cast<uint8_t>((df.converged ? kFitConverged : 0) |
                                       (df.at_bound_d ? kFitAtBoundD : 0) |
                                       (df.at_bound_alpha ? kFitAtBoundAlpha : 0) |
                                       (df.degraded_init ? kFitDegradedInit : 0));
      fit.records[fit.record_index(vi, static_cast<int>(k))] = rec;
    }
  });
  return fit;
}

void write_fit_volume(const FitVolume& fit, const std::string& path) {
  Writer w(path);
  w.out.write(kMagic, 8);
  w.put(kSentinel);
  w.put(static_cast<uint32_t>(fit.dims[0]));
  w.put(static_cast<uint32_t>(fit.dims[1]));
  w.put(static_cast<uint32_t>(fit.dims[2]));
  w.put(static_cast<uint32_t>(fit.n_bundles()));
  w.put(static_cast<uint32_t>(fit.shell_bvals.size()));
  w.put(fit.tau);
  for (double v : fit.voxel_size) w.put(v);
  for (double v : fit.affine) w.put(v);
  for (double v : fit.shell_bvals) w.put(v);
  for (const auto& g : fit.bundle_dirs) {
    w.put(g.x());
    w.put(g.y());
    w.put(g.z());
  }
  for (int64_t vi = 0; vi < fit.n_voxels(); ++vi) {
    w.put(fit.has_fit[static_cast<size_t>(vi)]);
    w.put(fit.s0[static_cast<size_t>(vi)]);
    for (int k = 0; k < fit.n_bundles(); ++k) {
      const FitRecord& r = fit.records[fit.record_index(vi, k)];
      w.put(r.d);
      w.put(r.alpha);
      w.put(r.rss);
      w.put(r.n_iter);
      w.put(r.flags);
    }
  }
  if (!w.out) throw DataError("short write to " + path);
}

FitVolume read_fit_volume(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.in.read(magic, 8);
  if (!r.in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path + ": not a fit container (bad magic)");
  if (r.get<uint32_t>() != kSentinel)
    throw DataError(path + ": fit container endianness mismatch");

  FitVolume fit;
  const uint32_t nx = r.get<uint32_t>();
  const uint32_t ny = r.get<uint32_t>();
  const uint32_t nz = r.get<uint32_t>();
  const uint32_t n_bundles = r.get<uint32_t>();
  const uint32_t n_shells = r.get<uint32_t>();
  fit.dims = {nx, ny, nz};
  fit.tau = r.get<double>();
  for (auto& v : fit.voxel_size) v = r.get<double>();
  for (auto& v : fit.affine) v = r.get<double>();
  fit.shell_bvals.resize(n_shells);
  for (auto& v : fit.shell_bvals) v = r.get<double>();
  fit.bundle_dirs.resize(n_bundles);
  for (auto& g : fit.bundle_dirs) {
    const double x = r.get<double>();
    const double y = r.get<double>();
    const double z = r.get<double>();
    g = Eigen::Vector3d(x, y, z);
  }
  const int64_t n_vox = fit.n_voxels();
  fit.has_fit.resize(static_cast<size_t>(n_vox));
  fit.s0.resize(static_cast<size_t>(n_vox));
  fit.records.resize(static_cast<size_t>(n_vox) * n_bundles);
  for (int64_t vi = 0; vi < n_vox; ++vi) {
    fit.has_fit[static_cast<size_t>(vi)] = r.get<uint8_t>();
    fit.s0[static_cast<size_t>(vi)] = r.get<double>();
    for (uint32_t k = 0; k < n_bundles; ++k) {
      FitRecord rec;
      rec.d = r.get<double>();
      rec.alpha = r.get<double>();
      rec.rss = r.get<double>();
      rec.n_iter = r.get<uint32_t>();
      rec.flags = r.get<uint8_t>();
      fit.records[fit.record_index(vi, static_cast<int>(k))] = rec;
    }
  }
  return fit;
}

}  // namespace qst
