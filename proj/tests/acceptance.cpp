// Acceptance suite: end-to-end numerical criteria for the whole library,
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "qst/analysis.hpp"
#include "qst/fit_store.hpp"
#include "qst/fitting.hpp"
#include "qst/nifti.hpp"
#include "qst/oracle.hpp"
#include "qst/phantom.hpp"
#include "qst/qmaps.hpp"
#include "qst/qspace.hpp"
#include "qst/rng.hpp"
#include "qst/signal_model.hpp"
#include "qst/sphere.hpp"

using namespace qst;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTau = 0.048333;  // [s]

// Frozen independently at high precision:
//   M_n = 2 pi Gamma((n+3)/2) (4 pi^2 tau D)^(-(n+3)/2), tau = 0.048333,
//   D = 0.7e-3 mm^2/s.
constexpr double kRtopIso = 114070.28205133541;   // ~1.141e5 mm^-3
constexpr double kQmsdIso = 128103868.65070694;   // ~1.281e8 mm^-5
constexpr double kQmfdIso = 239773247220.40314;   // ~2.398e11 mm^-7

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double rel_err(double got, double want) { return std::abs(got / want - 1.0); }

double q_of(double b) { return std::sqrt(b / (4.0 * kPi * kPi * kTau)); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------
// 1. Gaussian closed form across all five estimator routes.

Outcome criterion_gaussian() {
  Outcome out;
  const double d = 0.7e-3;
  const double frozen[3] = {kRtopIso, kQmsdIso, kQmfdIso};
  const double b = 1000.0;
  const std::vector<double> e(64, std::exp(-b * d));
  const std::vector<double> alpha(64, 1.0);
  const auto d_fn = [&](const Eigen::Vector3d&) { return d; };
  const auto a_fn = [&](const Eigen::Vector3d&) { return 1.0; };
  const auto rule = sphere::uniform_rule(sphere::fibonacci_directions(64));

  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const int n = 2 * k;
    const double want = frozen[k];
    worst = std::max(worst, rel_err(moment_direct(e, alpha, q_of(b), n).value, want));
    worst = std::max(worst, rel_err(moment_expansion(e, alpha, q_of(b), n).value, want));
    worst = std::max(worst, rel_err(moment_analytic(d_fn, a_fn, kTau, n, rule).value, want));
    worst = std::max(worst,
                     rel_err(oracle::brute_force_moment(d_fn, a_fn, kTau, n).value, want));
  }
  worst = std::max(worst,
                   rel_err(rtop_dti({d, d, d}, kTau, RtopConvention::gaussian), kRtopIso));
  out.require(worst < 1e-6, "worst rel err " + fmt(worst) + " >= 1e-6");
  out.detail = "worst rel err " + fmt(worst) + " across direct/expansion/analytic/brute/dti";
  return out;
}

// ---------------------------------------------------------------------
// 2. Oracle equivalence on 20 seeded random anisotropic stretched fields.

Eigen::Matrix3d random_spd(uint64_t seed, uint64_t field) {
  Eigen::Vector3d lam;
  for (int i = 0; i < 3; ++i)
    lam[i] = 0.2e-3 + 1.8e-3 * rng::uniform_pos(seed, field, static_cast<uint64_t>(i));
  Eigen::Vector4d qv;
  for (int i = 0; i < 4; ++i) {
    double z1, z2;
    rng::gaussian_pair(seed, field, 50 + static_cast<uint64_t>(i), z1, z2);
    qv[i] = z1;
  }
  qv.normalize();
  const Eigen::Matrix3d rot = Eigen::Quaterniond(qv[0], qv[1], qv[2], qv[3]).toRotationMatrix();
  return rot * lam.asDiagonal() * rot.transpose();
}

Outcome criterion_oracle() {
  Outcome out;
  const uint64_t seed = 7321;
  const auto dirs = sphere::fibonacci_directions(256);
  const auto dense = sphere::gauss_product_rule(64);
  const double b = 3000.0;

  double worst_direct = 0.0, worst_analytic = 0.0;
  for (int f = 0; f < 20; ++f) {
    const Eigen::Matrix3d tensor = random_spd(seed, static_cast<uint64_t>(f));
    const double alpha = 0.5 + 0.5 * rng::uniform_pos(seed, static_cast<uint64_t>(f), 9);
    const auto d_fn = [&](const Eigen::Vector3d& g) { return g.dot(tensor * g); };
    const auto a_fn = [&](const Eigen::Vector3d&) { return alpha; };

    std::vector<double> e, al(dirs.size(), alpha);
    e.reserve(dirs.size());
    for (const auto& g : dirs) e.push_back(predict_attenuation({d_fn(g), alpha}, b));

    for (int n : {0, 2, 4}) {
      const double ref = oracle::brute_force_moment(d_fn, a_fn, kTau, n).value;
      worst_direct = std::max(worst_direct, rel_err(moment_direct(e, al, q_of(b), n).value, ref));
      worst_analytic =
          std::max(worst_analytic, rel_err(moment_analytic(d_fn, a_fn, kTau, n, dense).value, ref));
    }
  }
  out.require(worst_direct < 1e-2,
              "direct vs brute force " + fmt(worst_direct) + " >= 1%");
  out.require(worst_analytic < 1e-3,
              "analytic vs brute force " + fmt(worst_analytic) + " >= 0.1%");
  out.detail = "20 fields, n in {0,2,4}: direct " + fmt(worst_direct) + ", analytic " +
               fmt(worst_analytic);
  return out;
}

// ---------------------------------------------------------------------
// 3. Exact fit recovery on the 16x16x4 five-shell phantom, then the
//    Rician SNR = 39 error bounds.

PhantomSpec recovery_spec(double snr) {
  PhantomSpec spec;
  spec.dims = {16, 16, 4};
  spec.shells = {200.0, 1000.0, 1800.0, 2400.0, 3000.0};
  spec.dirs_per_shell = 33;
  spec.snr = snr;
  spec.seed = 424242;
  PhantomRegion left;
  left.box = {{0, 0, 0, 8, 16, 4}};
  left.tensor = Eigen::Matrix3d::Identity() * 0.7e-3;
  left.alpha = 0.8;
  PhantomRegion right;
  Eigen::Matrix3d rot;
  rot = Eigen::AngleAxisd(0.5, Eigen::Vector3d(1, 2, 1).normalized());
  right.tensor = rot * Eigen::Vector3d(1.7e-3, 0.3e-3, 0.3e-3).asDiagonal() * rot.transpose();
  right.alpha = 0.7;
  spec.regions = {left, right};
  return spec;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion_fit_recovery() {
  Outcome out;
  const int threads = 4;

  {  // noiseless: exact recovery per direction
    const PhantomSpec spec = recovery_spec(0.0);
    const Phantom ph = generate_phantom(spec, threads);
    const auto grouping = group_shells(ph.scheme);
    const auto bundles = match_directions(ph.scheme, grouping);
    const FitVolume fit =
        fit_stretched_volume(ph.dwi, ph.scheme, grouping, bundles, {}, {}, {}, threads);

    double worst_d = 0.0, worst_a = 0.0;
    for (int64_t vi = 0; vi < fit.n_voxels(); ++vi) {
      const int64_t x = vi % 16;
      const auto& region = spec.regions[x < 8 ? 0 : 1];
      for (int k = 0; k < fit.n_bundles(); ++k) {
        const FitRecord& rec = fit.records[fit.record_index(vi, k)];
        const Eigen::Vector3d& g = fit.bundle_dirs[static_cast<size_t>(k)];
        worst_d = std::max(worst_d, rel_err(rec.d, g.dot(region.tensor * g)));
        worst_a = std::max(worst_a, rel_err(rec.alpha, region.alpha));
      }
    }
    out.require(worst_d < 1e-6, "noiseless D err " + fmt(worst_d) + " >= 1e-6");
    out.require(worst_a < 1e-6, "noiseless alpha err " + fmt(worst_a) + " >= 1e-6");
    out.detail = "noiseless worst rel err D " + fmt(worst_d) + ", alpha " + fmt(worst_a);
  }

  {  // Rician SNR = 39
    const PhantomSpec spec = recovery_spec(39.0);
    const Phantom ph = generate_phantom(spec, threads);
    const auto grouping = group_shells(ph.scheme);
    const auto bundles = match_directions(ph.scheme, grouping);
    const FitVolume fit =
        fit_stretched_volume(ph.dwi, ph.scheme, grouping, bundles, {}, {}, {}, threads);

    std::vector<double> err_d, err_a;
    for (int64_t vi = 0; vi < fit.n_voxels(); ++vi) {
      const int64_t x = vi % 16;
      const auto& region = spec.regions[x < 8 ? 0 : 1];
      for (int k = 0; k < fit.n_bundles(); ++k) {
        const FitRecord& rec = fit.records[fit.record_index(vi, k)];
        if (!rec.converged()) continue;
        const Eigen::Vector3d& g = fit.bundle_dirs[static_cast<size_t>(k)];
        err_d.push_back(rel_err(rec.d, g.dot(region.tensor * g)));
        err_a.push_back(std::abs(rec.alpha - region.alpha));
      }
    }
    const double med_d = median(err_d), med_a = median(err_a);
    out.require(med_a <= 0.05, "median |alpha err| " + fmt(med_a) + " > 0.05");
    out.require(med_d <= 0.05, "median rel D err " + fmt(med_d) + " > 5%");
    out.detail += "; SNR39 median |alpha err| " + fmt(med_a) + ", rel D err " + fmt(med_d);
  }
  return out;
}

// ---------------------------------------------------------------------
// 4. b-value consistency of the fitted-E measures vs the single-shell
//    Gaussian baseline.

Outcome criterion_b_consistency() {
  Outcome out;
  PhantomSpec spec;
  spec.dims = {8, 8, 2};
  spec.shells = {1000.0, 2000.0, 3000.0, 4000.0, 5000.0};
  spec.dirs_per_shell = 33;
  PhantomRegion region;
  region.tensor = Eigen::Matrix3d::Identity() * 0.7e-3;
  region.alpha = 0.7;
  spec.regions = {region};

  const Phantom ph = generate_phantom(spec, 4);
  const auto grouping = group_shells(ph.scheme);
  const auto bundles = match_directions(ph.scheme, grouping);
  const FitVolume fit =
      fit_stretched_volume(ph.dwi, ph.scheme, grouping, bundles, {}, {}, {}, 4);

  std::vector<QMaps> stretched, gaussian;
  for (double b : {1000.0, 3000.0, 5000.0}) {
    MapConfig cfg;
    cfg.shell_b = b;
    stretched.push_back(compute_maps(fit, ph.scheme, grouping, bundles, nullptr, cfg, {}, 4));
    MapConfig gauss;
    gauss.shell_b = b;
    gauss.source = ESource::measured;
    gauss.unit_alpha = true;
    gaussian.push_back(
        compute_maps(fit, ph.scheme, grouping, bundles, &ph.dwi, gauss, {}, 4));
  }

  double worst_consistency = 0.0;
  double min_gauss_gap = 1e300;
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = i + 1; j < 3; ++j) {
      for (const auto& [lo, hi] :
           {std::pair{&stretched[i].rtop, &stretched[j].rtop},
            std::pair{&stretched[i].qmsd, &stretched[j].qmsd},
            std::pair{&stretched[i].qmfd, &stretched[j].qmfd}}) {
        for (size_t v = 0; v < lo->data.size(); ++v)
          worst_consistency = std::max(worst_consistency, rel_err(hi->data[v], lo->data[v]));
      }
      min_gauss_gap = std::min(
          min_gauss_gap, rel_err(gaussian[j].rtop.data[0], gaussian[i].rtop.data[0]));
    }
  out.require(worst_consistency < 1e-6,
              "fitted maps differ across shells by " + fmt(worst_consistency));
  out.require(min_gauss_gap > 0.10,
              "gaussian single-shell RTOP gap only " + fmt(min_gauss_gap));

  const SweepResult sweep = bmax_sweep(ph.dwi, ph.scheme, grouping, bundles,
                                       {3000.0, 4000.0, 5000.0}, 3000.0,
                                       Estimator::direct, {}, {}, 4);
  double worst_ratio = 0.0;
  for (int m = 0; m < 3; ++m)
    for (size_t k = 0; k < sweep.changes[0][static_cast<size_t>(m)].size(); ++k) {
      const double stretched_change = sweep.changes[0][static_cast<size_t>(m)][k];
      const double gaussian_change = sweep.changes[2][static_cast<size_t>(m)][k];
      worst_ratio = std::max(worst_ratio, stretched_change / gaussian_change);
    }
  out.require(worst_ratio < 0.01,
              "sweep change ratio stretched/gaussian " + fmt(worst_ratio) + " >= 0.01");
  out.detail = "cross-shell rel spread " + fmt(worst_consistency) + ", min gaussian gap " +
               fmt(min_gauss_gap) + ", sweep ratio " + fmt(worst_ratio);
  return out;
}

// ---------------------------------------------------------------------
// 5. Expansion vs direct: exact collapse and map-level correlation.

Outcome criterion_expansion() {
  Outcome out;
  double worst_collapse = 0.0;
  for (double alpha : {0.4, 0.7, 1.0})
    for (double e_val : {0.15, 0.5, 0.85})
      for (int n : {0, 2, 4}) {
        const std::vector<double> e(48, e_val), al(48, alpha);
        const double m1 = moment_direct(e, al, q_of(2400.0), n).value;
        const double m2 = moment_expansion(e, al, q_of(2400.0), n).value;
        worst_collapse = std::max(worst_collapse, rel_err(m2, m1));
      }
  out.require(worst_collapse < 1e-12,
              "zero-variance collapse off by " + fmt(worst_collapse));

  PhantomSpec spec;
  spec.dims = {8, 8, 2};
  spec.shells = {1000.0, 2000.0, 3000.0};
  spec.dirs_per_shell = 33;
  PhantomRegion a, b, c;
  Eigen::Matrix3d rot1, rot2;
  rot1 = Eigen::AngleAxisd(0.6, Eigen::Vector3d(1, 1, 0).normalized());
  rot2 = Eigen::AngleAxisd(1.2, Eigen::Vector3d(0, 1, 2).normalized());
  a.box = {{0, 0, 0, 8, 4, 2}};
  a.tensor = rot1 * Eigen::Vector3d(1.0e-3, 0.7e-3, 0.7e-3).asDiagonal() * rot1.transpose();
  a.alpha = 0.9;
  b.box = {{0, 4, 0, 8, 8, 1}};
  b.tensor = rot2 * Eigen::Vector3d(1.2e-3, 0.8e-3, 0.8e-3).asDiagonal() * rot2.transpose();
  b.alpha = 0.85;
  c.tensor = Eigen::Matrix3d::Identity() * 0.6e-3;
  c.alpha = 0.95;
  spec.regions = {a, b, c};

  const Phantom ph = generate_phantom(spec, 4);
  const auto grouping = group_shells(ph.scheme);
  const auto bundles = match_directions(ph.scheme, grouping);
  const FitVolume fit =
      fit_stretched_volume(ph.dwi, ph.scheme, grouping, bundles, {}, {}, {}, 4);
  MapConfig direct_cfg;
  direct_cfg.shell_b = 3000.0;
  MapConfig expansion_cfg = direct_cfg;
  expansion_cfg.method = Estimator::expansion;
  const QMaps m1 = compute_maps(fit, ph.scheme, grouping, bundles, nullptr, direct_cfg, {}, 4);
  const QMaps m2 =
      compute_maps(fit, ph.scheme, grouping, bundles, nullptr, expansion_cfg, {}, 4);
  const double rho = pearson(m1.rtop, m2.rtop);
  out.require(rho >= 0.99, "pearson(M1, M2) = " + fmt(rho) + " < 0.99");
  out.detail = "collapse " + fmt(worst_collapse) + ", RTOP correlation " + fmt(rho);
  return out;
}

// ---------------------------------------------------------------------
// 6. I/O round trip and byte-identical outputs across thread counts.

Outcome criterion_io_determinism() {
  Outcome out;
  const fs::path dir = fs::temp_directory_path() / "qst_acceptance";
  fs::create_directories(dir);

  {  // float64 identity
    Volume4D v = Volume4D::create(5, 4, 3, 2);
    v.set_voxel_size(2.5, 2.5, 2.5);
    for (size_t i = 0; i < v.data.size(); ++i)
      v.data[i] = std::sin(static_cast<double>(i)) * 1e7;
    write_nifti(v, (dir / "rt.nii").string(), NiftiDatatype::float64);
    const Volume4D r = read_nifti((dir / "rt.nii").string());
    out.require(r.dims == v.dims && r.data == v.data && r.affine == v.affine,
                "float64 round trip not exact");
  }

  {  // thread-count independence, through the full pipeline and the writer
    PhantomSpec spec;
    spec.dims = {6, 6, 2};
    spec.shells = {1000.0, 2000.0, 3000.0};
    spec.dirs_per_shell = 21;
    spec.snr = 39.0;  // noise exercises the seeded streams
    spec.seed = 99;
    PhantomRegion region;
    region.tensor = Eigen::Vector3d(1.4e-3, 0.6e-3, 0.6e-3).asDiagonal();
    region.alpha = 0.75;
    spec.regions = {region};

    std::vector<std::string> files;
    for (int threads : {1, 4}) {
      const Phantom ph = generate_phantom(spec, threads);
      const auto grouping = group_shells(ph.scheme);
      const auto bundles = match_directions(ph.scheme, grouping);
      const FitVolume fit =
          fit_stretched_volume(ph.dwi, ph.scheme, grouping, bundles, {}, {}, {}, threads);
      MapConfig cfg;
      cfg.shell_b = 3000.0;
      const QMaps maps =
          compute_maps(fit, ph.scheme, grouping, bundles, nullptr, cfg, {}, threads);
      const std::string path =
          (dir / ("rtop_t" + std::to_string(threads) + ".nii")).string();
      write_nifti(maps.rtop, path, NiftiDatatype::float32);
      files.push_back(path);
    }
    std::ifstream f1(files[0], std::ios::binary), f2(files[1], std::ios::binary);
    const std::vector<char> b1{std::istreambuf_iterator<char>(f1), {}};
    const std::vector<char> b2{std::istreambuf_iterator<char>(f2), {}};
    out.require(!b1.empty() && b1 == b2, "outputs differ across thread counts");
  }
  out.detail = "float64 identity and 1-vs-4-thread byte-identical maps";
  return out;
}

// ---------------------------------------------------------------------
// 7. Surface-reduced integral vs the full 3-D quadrature on isotropic
//    stretched fields.

Outcome criterion_radial_reduction() {
  Outcome out;
  const auto d_fn = [](const Eigen::Vector3d&) { return 0.7e-3; };
  const auto rule = sphere::gauss_product_rule(32);
  double worst = 0.0;
  for (double alpha : {0.5, 0.75, 1.0}) {
    const auto a_fn = [&](const Eigen::Vector3d&) { return alpha; };
    for (int n : {0, 2, 4}) {
      const double brute = oracle::brute_force_moment(d_fn, a_fn, kTau, n).value;
      const double analytic = moment_analytic(d_fn, a_fn, kTau, n, rule).value;
      worst = std::max(worst, rel_err(analytic, brute));
    }
  }
  out.require(worst < 1e-6, "worst rel err " + fmt(worst) + " >= 1e-6");
  out.detail = "worst rel err " + fmt(worst) + " over alpha in {0.5, 0.75, 1}";
  return out;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
  double time_limit_s;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1. gaussian-closed-form", criterion_gaussian, 1.0},
      {"2. oracle-equivalence", criterion_oracle, 60.0},
      {"3. fit-recovery", criterion_fit_recovery, 120.0},
      {"4. b-value-consistency", criterion_b_consistency, 120.0},
      {"5. expansion-vs-direct", criterion_expansion, 60.0},
      {"6. io-and-determinism", criterion_io_determinism, 60.0},
      {"7. radial-reduction", criterion_radial_reduction, 60.0},
  };

  int n_failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds > c.time_limit_s) {
      outcome.pass = false;
      outcome.detail += "; runtime " + fmt(seconds) + "s over the " +
                        fmt(c.time_limit_s) + "s limit";
    }
    std::printf("[%s] %-28s %6.2fs  %s\n", outcome.pass ? "PASS" : "FAIL", c.name, seconds,
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++n_failed;
  }
  if (n_failed) std::printf("%d criteria FAILED\n", n_failed);
  else std::printf("all %zu criteria passed\n", criteria.size());
  return n_failed ? 1 : 0;
}
