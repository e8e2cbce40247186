#include "qst/analysis.hpp"

#include <cmath>

#include "doctest.h"
#include "qst/errors.hpp"
#include "qst/phantom.hpp"

using namespace qst;

namespace {

Volume4D map_of(std::vector<double> values) {
  Volume4D v = Volume4D::create(static_cast<int64_t>(values.size()), 1, 1, 1);
  v.data = std::move(values);
  return v;
}

}  // namespace

TEST_CASE("pearson basics") {
  const Volume4D a = map_of({1, 2, 3, 4});
  CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-14));

  Volume4D neg = map_of({-1, -2, -3, -4});
  for (auto& v : neg.data) v += 10.0;
  CHECK(pearson(a, neg) == doctest::Approx(-1.0).epsilon(1e-14));

  // frozen: 6.5 / sqrt(43.75)
  const Volume4D b = map_of({1, 2, 3, 5});
  CHECK(pearson(a, b) == doctest::Approx(0.98270762982399079).epsilon(1e-14));
  CHECK(pearson(b, a) == pearson(a, b));
}

TEST_CASE("pearson is invariant under positive affine transforms") {
  const Volume4D a = map_of({2.0, 5.0, 1.0, 7.0, 4.0});
  const Volume4D b = map_of({1.0, 4.5, 0.5, 6.0, 5.0});
  Volume4D b2 = b;
  for (auto& v : b2.data) v = 3.7 * v + 11.0;
  CHECK(pearson(a, b2) == doctest::Approx(pearson(a, b)).epsilon(1e-13));
}

TEST_CASE("pearson rejects degenerate inputs") {
  const Volume4D flat = map_of({2, 2, 2, 2});
  const Volume4D a = map_of({1, 2, 3, 4});
  CHECK_THROWS_AS(pearson(a, flat), DataError);
  const Volume4D one = map_of({1});
  CHECK_THROWS_AS(pearson(one, one), DataError);
  const Volume4D small = map_of({1, 2});
  CHECK_THROWS_AS(pearson(a, small), DataError);
}

TEST_CASE("pearson skips non-finite voxels") {
  Volume4D a = map_of({1, 2, 3, 4, 100});
  Volume4D b = map_of({1, 2, 3, 5, -100});
  a.data[4] = std::nan("");
  CHECK(pearson(a, b) == doctest::Approx(0.98270762982399079).epsilon(1e-13));
}

namespace {

PhantomSpec sweep_spec(double alpha) {
  PhantomSpec spec;
  spec.dims = {4, 4, 1};
  spec.shells = {1000.0, 2000.0, 3000.0, 4000.0, 5000.0};
  spec.dirs_per_shell = 12;
  PhantomRegion region;
  region.tensor = Eigen::Matrix3d::Identity() * 0.7e-3;
  region.alpha = alpha;
  spec.regions = {region};
  return spec;
}

}  // namespace

TEST_CASE("bmax sweep separates the stretched and Gaussian estimators") {
  const PhantomSpec spec = sweep_spec(0.7);
  const Phantom ph = generate_phantom(spec);
  const auto grouping = group_shells(ph.scheme);
  const auto bundles = match_directions(ph.scheme, grouping);

  const SweepResult sweep = bmax_sweep(ph.dwi, ph.scheme, grouping, bundles,
                                       {3000.0, 4000.0, 5000.0}, 3000.0);
  REQUIRE(sweep.b_max.size() == 3);
  REQUIRE(sweep.config_names.size() == 3);
  CHECK(sweep.pairing == "consecutive-pair");

  for (int m = 0; m < 3; ++m) {
    REQUIRE(sweep.changes[0][static_cast<size_t>(m)].size() == 2);
    for (size_t k = 0; k < 2; ++k) {
      const double stretched = sweep.changes[0][static_cast<size_t>(m)][k];
      const double gaussian = sweep.changes[2][static_cast<size_t>(m)][k];
      const double scale = sweep.mean_abs[0][static_cast<size_t>(m)][k + 1];
      CHECK(stretched / scale < 1e-6);  // exact fits, b-consistent measures
      CHECK(gaussian > 0.0);
      CHECK(stretched < 0.01 * gaussian);
    }
  }

  const std::string csv = sweep_csv(sweep);
  CHECK(csv.find("config,measure,b_max_prev,b_max,mean_abs_change,mean_abs_at_bmax\n") == 0);
  CHECK(csv.find("gaussian-single-shell,rtop,3000,4000,") != std::string::npos);
}

TEST_CASE("bmax sweep edge cases") {
  const PhantomSpec spec = sweep_spec(0.8);
  const Phantom ph = generate_phantom(spec);
  const auto grouping = group_shells(ph.scheme);
  const auto bundles = match_directions(ph.scheme, grouping);

  SUBCASE("single entry yields no change pairs") {
    const SweepResult sweep =
        bmax_sweep(ph.dwi, ph.scheme, grouping, bundles, {5000.0}, 3000.0);
    CHECK(sweep.b_max.size() == 1);
    CHECK(sweep.changes[0][0].empty());
  }
  SUBCASE("b_max below the two-shell minimum") {
    CHECK_THROWS_AS(bmax_sweep(ph.dwi, ph.scheme, grouping, bundles, {1000.0}, 3000.0),
                    DataError);
  }
  SUBCASE("empty list") {
    CHECK_THROWS_AS(bmax_sweep(ph.dwi, ph.scheme, grouping, bundles, {}, 3000.0), DataError);
  }
}
