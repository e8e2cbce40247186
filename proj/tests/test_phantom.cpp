#include "qst/phantom.hpp"

#include <cmath>

#include "doctest.h"
#include "qst/errors.hpp"
#include "qst/fitting.hpp"
#include "qst/signal_model.hpp"

using namespace qst;

TEST_CASE("phantom spec parses from json") {
  const auto j = nlohmann::json::parse(R"({
    "dims": [4, 4, 2],
    "voxel_size": [2.0, 2.0, 2.0],
    "s0": 100.0,
    "tau": 0.048333,
    "shells": [1000, 2000, 3000],
    "dirs_per_shell": 12,
    "n_b0": 2,
    "noise": {"type": "rician", "snr": 39},
    "seed": 7,
    "regions": [
      {"box": [0, 0, 0, 2, 4, 2],
       "tensor": {"eigenvalues": [1.7e-3, 0.3e-3, 0.3e-3], "euler_deg": [30, 45, 0]},
       "alpha": 0.7},
      {"tensor": {"components": [7e-4, 7e-4, 7e-4, 0, 0, 0]}, "alpha": 1.0}
    ]
  })");
  const PhantomSpec spec = phantom_spec_from_json(j);
  CHECK(spec.dims == std::array<int64_t, 3>{4, 4, 2});
  CHECK(spec.s0 == 100.0);
  CHECK(spec.snr == 39.0);
  CHECK(spec.seed == 7);
  REQUIRE(spec.regions.size() == 2);
  CHECK(spec.regions[0].box.has_value());
  CHECK_FALSE(spec.regions[1].box.has_value());
  CHECK(spec.regions[1].tensor(0, 0) == 7e-4);

  const GradientScheme scheme = phantom_scheme(spec);
  CHECK(scheme.n_measurements() == 2 + 3 * 12);
  CHECK(scheme.bvals[0] == 0.0);
  CHECK(scheme.bvals[2] == 1000.0);
}

TEST_CASE("default protocol has 15 shells of 33 directions") {
  PhantomSpec spec;
  PhantomRegion region;
  spec.regions = {region};
  const GradientScheme scheme = phantom_scheme(spec);
  CHECK(scheme.n_measurements() == 1 + 15 * 33);
  CHECK(scheme.bvals.back() == 3000.0);
  CHECK(scheme.tau == 0.048333);
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec spec;
  spec.dims = {2, 2, 1};
  PhantomRegion region;
  SUBCASE("non-SPD tensor") {
    region.tensor = Eigen::Vector3d(1e-3, 1e-3, -1e-3).asDiagonal();
    spec.regions = {region};
    CHECK_THROWS_AS(generate_phantom(spec), DataError);
  }
  SUBCASE("alpha out of range") {
    region.alpha = 1.2;
    spec.regions = {region};
    CHECK_THROWS_AS(generate_phantom(spec), DataError);
  }
  SUBCASE("uncovered voxels") {
    region.box = {{0, 0, 0, 1, 2, 1}};
    spec.regions = {region};
    CHECK_THROWS_AS(generate_phantom(spec), DataError);
  }
}

TEST_CASE("noiseless phantom reproduces the forward model exactly") {
  PhantomSpec spec;
  spec.dims = {3, 2, 2};
  spec.shells = {1000.0, 3000.0};
  spec.dirs_per_shell = 8;
  spec.s0 = 50.0;
  PhantomRegion region;
  region.tensor = Eigen::Vector3d(1.5e-3, 0.5e-3, 0.5e-3).asDiagonal();
  region.alpha = 0.75;
  spec.regions = {region};
  const Phantom ph = generate_phantom(spec);

  for (int m = 0; m < ph.scheme.n_measurements(); ++m) {
    const double b = ph.scheme.bvals[m];
    double expected = spec.s0;
    if (b > 0.0) {
      const Eigen::Vector3d& g = ph.scheme.directions[m];
      expected = spec.s0 * predict_attenuation({g.dot(region.tensor * g), 0.75}, b);
    }
    CHECK(ph.dwi.at(0, 0, 0, m) == expected);
    CHECK(ph.dwi.at(2, 1, 1, m) == expected);
  }
}

TEST_CASE("phantom generation is deterministic and thread independent") {
  PhantomSpec spec;
  spec.dims = {5, 4, 3};
  spec.shells = {1000.0, 3000.0};
  spec.dirs_per_shell = 6;
  spec.snr = 20.0;
  spec.seed = 1234;
  PhantomRegion region;
  spec.regions = {region};

  const Phantom a = generate_phantom(spec, 1);
  const Phantom b = generate_phantom(spec, 4);
  CHECK(a.dwi.data == b.dwi.data);

  spec.seed = 1235;
  const Phantom c = generate_phantom(spec, 1);
  CHECK(a.dwi.data != c.dwi.data);
}

TEST_CASE("rician noise matches the high-SNR mean expansion") {
  PhantomSpec spec;
  spec.dims = {25, 25, 20};  // 12500 voxels
  spec.shells = {1000.0};
  spec.dirs_per_shell = 1;
  spec.n_b0 = 1;
  spec.snr = 39.0;
  spec.seed = 99;
  PhantomRegion region;
  spec.regions = {region};
  const Phantom ph = generate_phantom(spec, 4);

  double mean = 0.0;
  const int64_t n = ph.dwi.n_voxels();
  for (int64_t i = 0; i < n; ++i) mean += ph.dwi.data[static_cast<size_t>(i)];  // v = 0 block
  mean /= static_cast<double>(n);
  // E[sqrt((s+n1)^2+n2^2)] ~ s (1 + 1/(2 SNR^2)); MC std of the mean is
  // sigma/sqrt(N) ~ 2.3e-4, so assert within ~3.5 sigma.
  CHECK(mean == doctest::Approx(1.0003287310979619).epsilon(8e-4));
  CHECK(std::abs(mean - 1.0) > 1e-4);  // the bias is visible
}

TEST_CASE("two-region phantom has distinct truth moments") {
  PhantomSpec spec;
  spec.dims = {4, 2, 1};
  spec.shells = {1000.0, 3000.0};
  spec.dirs_per_shell = 6;
  PhantomRegion left;
  left.box = {{0, 0, 0, 2, 2, 1}};
  left.tensor = Eigen::Matrix3d::Identity() * 0.7e-3;
  left.alpha = 1.0;
  PhantomRegion right;
  right.tensor = Eigen::Vector3d(1.7e-3, 0.3e-3, 0.3e-3).asDiagonal();
  right.alpha = 0.7;
  spec.regions = {left, right};
  const Phantom ph = generate_phantom(spec);

  CHECK(ph.truth.m0.at(0, 0, 0) != ph.truth.m0.at(3, 0, 0));
  CHECK(ph.truth.m2.at(0, 0, 0) != ph.truth.m2.at(3, 0, 0));
  CHECK(ph.truth.alpha.at(0, 0, 0) == 1.0);
  CHECK(ph.truth.alpha.at(3, 0, 0) == 0.7);
  // isotropic alpha = 1 truth is the Gaussian closed form
  CHECK(ph.truth.m0.at(0, 0, 0) == doctest::Approx(114070.28205133541).epsilon(1e-9));
}

TEST_CASE("noiseless fits recover the per-direction truth") {
  PhantomSpec spec;
  spec.dims = {2, 1, 1};
  spec.shells = {200.0, 1000.0, 1800.0, 2400.0, 3000.0};
  spec.dirs_per_shell = 9;
  PhantomRegion region;
  region.tensor = Eigen::Vector3d(1.4e-3, 0.5e-3, 0.5e-3).asDiagonal();
  region.alpha = 0.8;
  spec.regions = {region};
  const Phantom ph = generate_phantom(spec);

  const auto grouping = group_shells(ph.scheme);
  const auto bundles = match_directions(ph.scheme, grouping);
  std::vector<double> signals;
  for (int m = 0; m < ph.scheme.n_measurements(); ++m) signals.push_back(ph.dwi.at(0, 0, 0, m));
  const auto voxel = fit_stretched_voxel(signals, ph.scheme, grouping, bundles);
  REQUIRE(voxel.fits.size() == 9);
  for (const auto& fit : voxel.fits) {
    const double d_true = fit.direction.dot(region.tensor * fit.direction);
    CHECK(fit.params.d == doctest::Approx(d_true).epsilon(1e-6));
    CHECK(fit.params.alpha == doctest::Approx(0.8).epsilon(1e-6));
  }
}
