#include "qst/phantom.hpp"

#include <cmath>

#include "qst/errors.hpp"
#include "qst/parallel.hpp"
#include "qst/qspace.hpp"
#include "qst/rng.hpp"
#include "qst/signal_model.hpp"
#include "qst/sphere.hpp"

namespace qst {

namespace {

Eigen::Matrix3d tensor_from_json(const nlohmann::json& j) {
  Eigen::Matrix3d t;
  if (j.contains("components")) {
    const auto c = j.at("components").get<std::vector<double>>();
    if (c.size() != 6) throw DataError("phantom: tensor components must have 6 entries");
    t << c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2];
  } else if (j.contains("eigenvalues")) {
    const auto lam = j.at("eigenvalues").get<std::vector<double>>();
    if (lam.size() != 3) throw DataError("phantom: tensor eigenvalues must have 3 entries");
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    if (j.contains("euler_deg")) {
      const auto e = j.at("euler_deg").get<std::vector<double>>();
      if (e.size() != 3) throw DataError("phantom: euler_deg must have 3 entries");
      const double d2r = std::numbers::pi / 180.0;
      rot = (Eigen::AngleAxisd(e[0] * d2r, Eigen::Vector3d::UnitZ()) *
             Eigen::AngleAxisd(e[1] * d2r, Eigen::Vector3d::UnitY()) *
             Eigen::AngleAxisd(e[2] * d2r, Eigen::Vector3d::UnitZ()))
                .toRotationMatrix();
    }
    t = rot * Eigen::Vector3d(lam[0], lam[1], lam[2]).asDiagonal() * rot.transpose();
  } else {
    throw DataError("phantom: tensor needs 'components' or 'eigenvalues'");
  }
  return t;
}

void check_region(const PhantomRegion& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(r.tensor);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw DataError("phantom: region tensor is not positive definite");
  if (!(r.alpha > 0.0 && r.alpha <= 1.0))
    throw DataError("phantom: region alpha outside (0, 1]");
}

}  // namespace

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  PhantomSpec spec;
  if (j.contains("dims")) {
    const auto d = j.at("dims").get<std::vector<int64_t>>();
    if (d.size() != 3) throw DataError("phantom: dims must have 3 entries");
    spec.dims = {d[0], d[1], d[2]};
  }
  if (j.contains("voxel_size")) {
    const auto v = j.at("voxel_size").get<std::vector<double>>();
    if (v.size() != 3) throw DataError("phantom: voxel_size must have 3 entries");
    spec.voxel_size = {v[0], v[1], v[2]};
  }
  spec.s0 = j.value("s0", spec.s0);
  spec.tau = j.value("tau", spec.tau);
  if (j.contains("shells")) spec.shells = j.at("shells").get<std::vector<double>>();
  spec.dirs_per_shell = j.value("dirs_per_shell", spec.dirs_per_shell);
  spec.n_b0 = j.value("n_b0", spec.n_b0);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    const std::string type = n.value("type", "none");
    if (type == "rician") {
      spec.snr = n.at("snr").get<double>();
      if (!(spec.snr > 0.0)) throw DataError("phantom: rician SNR must be positive");
    } else if (type != "none") {
      throw DataError("phantom: unknown noise type '" + type + "'");
    }
  }
  spec.seed = j.value("seed", spec.seed);
  if (!j.contains("regions") || j.at("regions").empty())
    throw DataError("phantom: at least one region is required");
  for (const auto& rj : j.at("regions")) {
    PhantomRegion region;
    if (rj.contains("box")) {
      const auto b = rj.at("box").get<std::vector<int64_t>>();
      if (b.size() != 6) throw DataError("phantom: region box must have 6 entries");
      region.box = {b[0], b[1], b[2], b[3], b[4], b[5]};
    }
    region.tensor = tensor_from_json(rj.at("tensor"));
    region.alpha = rj.value("alpha", 1.0);
    spec.regions.push_back(region);
  }
  return spec;
}

GradientScheme phantom_scheme(const PhantomSpec& spec) {
  std::vector<double> shells = spec.shells;
  if (shells.empty())
    for (int k = 1; k <= 15; ++k) shells.push_back(200.0 * k);
  if (spec.dirs_per_shell < 1) throw DataError("phantom: dirs_per_shell < 1");
  if (spec.n_b0 < 0) throw DataError("phantom: n_b0 < 0");

  const auto table = sphere::fibonacci_directions(spec.dirs_per_shell);
  std::vector<Eigen::Vector3d> dirs;
  std::vector<double> bvals;
  for (int i = 0; i < spec.n_b0; ++i) {
    dirs.emplace_back(Eigen::Vector3d::Zero());
    bvals.push_back(0.0);
  }
  for (double b : shells)
    for (const auto& g : table) {
      dirs.push_back(g);
      bvals.push_back(b);
    }
  return make_scheme(std::move(dirs), std::move(bvals), spec.tau);
}

Phantom generate_phantom(const PhantomSpec& spec, int threads) {
  if (spec.regions.empty()) throw DataError("phantom: no regions");
  for (const auto& r : spec.regions) check_region(r);
  if (!(spec.s0 > 0.0)) throw DataError("phantom: s0 must be positive");

  Phantom ph;
  ph.scheme = phantom_scheme(spec);
  const int n_meas = ph.scheme.n_measurements();
  const auto [nx, ny, nz] = spec.dims;
  if (nx < 1 || ny < 1 || nz < 1) throw DataError("phantom: non-positive dims");

  ph.dwi = Volume4D::create(nx, ny, nz, n_meas);
  ph.dwi.set_voxel_size(spec.voxel_size[0], spec.voxel_size[1], spec.voxel_size[2]);
  ph.truth.tensor6 = Volume4D::create(nx, ny, nz, 6);
  ph.truth.alpha = Volume4D::create(nx, ny, nz, 1);
  ph.truth.m0 = Volume4D::create(nx, ny, nz, 1);
  ph.truth.m2 = Volume4D::create(nx, ny, nz, 1);
  ph.truth.m4 = Volume4D::create(nx, ny, nz, 1);
  for (auto* v : {&ph.truth.tensor6, &ph.truth.alpha, &ph.truth.m0, &ph.truth.m2, &ph.truth.m4})
    v->set_voxel_size(spec.voxel_size[0], spec.voxel_size[1], spec.voxel_size[2]);

  // Truth moments are constant within a region; evaluate once per region
  // with a dense rule.
  const sphere::Rule dense = sphere::gauss_product_rule(48);
  std::vector<std::array<double, 3>> region_moments(spec.regions.size());
  for (size_t r = 0; r < spec.regions.size(); ++r) {
    const auto& region = spec.regions[r];
    const auto d_fn = [&](const Eigen::Vector3d& g) { return g.dot(region.tensor * g); };
    const auto a_fn = [&](const Eigen::Vector3d&) { return region.alpha; };
    for (int k = 0; k < 3; ++k)
      region_moments[r][k] = moment_analytic(d_fn, a_fn, spec.tau, 2 * k, dense).value;
  }

  const int64_t n_vox = ph.dwi.n_voxels();
  const double sigma = spec.snr > 0.0 ? spec.s0 / spec.snr : 0.0;

  parallel_for(n_vox, threads, [&](int64_t vi) {
    const int64_t x = vi % nx;
    const int64_t y = (vi / nx) % ny;
    const int64_t z = vi / (nx * ny);

    int region_idx = -1;
    for (size_t r = 0; r < spec.regions.size(); ++r) {
      const auto& region = spec.regions[r];
      if (!region.box) {
        region_idx = static_cast<int>(r);
        break;
      }
      const auto& b = *region.box;
      if (x >= b[0] && x < b[3] && y >= b[1] && y < b[4] && z >= b[2] && z < b[5]) {
        region_idx = static_cast<int>(r);
        break;
      }
    }
    if (region_idx < 0)
      throw DataError("phantom: regions do not cover voxel (" + std::to_string(x) + ", " +
                      std::to_string(y) + ", " + std::to_string(z) + ")");
    const auto& region = spec.regions[static_cast<size_t>(region_idx)];

    for (int m = 0; m < n_meas; ++m) {
      const double b = ph.scheme.bvals[m];
      double s = spec.s0;
      if (b > 0.0) {
        const Eigen::Vector3d& g = ph.scheme.directions[m];
        const double d = g.dot(region.tensor * g);
        s = spec.s0 * predict_attenuation({d, region.alpha}, b);
      }
      if (sigma > 0.0) {
        double z1, z2;
        rng::gaussian_pair(spec.seed, static_cast<uint64_t>(vi), static_cast<uint64_t>(m),
                           z1, z2);
        s = std::hypot(s + sigma * z1, sigma * z2);
      }
      ph.dwi.at(x, y, z, m) = s;
    }

    const double t6[6] = {region.tensor(0, 0), region.tensor(1, 1), region.tensor(2, 2),
                          region.tensor(0, 1), region.tensor(0, 2), region.tensor(1, 2)};
    for (int k = 0; k < 6; ++k) ph.truth.tensor6.at(x, y, z, k) = t6[k];
    ph.truth.alpha.at(x, y, z) = region.alpha;
    ph.truth.m0.at(x, y, z) = region_moments[static_cast<size_t>(region_idx)][0];
    ph.truth.m2.at(x, y, z) = region_moments[static_cast<size_t>(region_idx)][1];
    ph.truth.m4.at(x, y, z) = region_moments[static_cast<size_t>(region_idx)][2];
  });

  return ph;
}

}  // namespace qst
