#include "qst/oracle.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qst/errors.hpp"
#include "qst/qspace.hpp"

using namespace qst;

namespace {
constexpr double kTau = 0.048333;
const auto iso_d = [](const Eigen::Vector3d&) { return 0.7e-3; };
}  // namespace

TEST_CASE("brute force matches the Gaussian closed form") {
  const auto a1 = [](const Eigen::Vector3d&) { return 1.0; };
  const auto r = oracle::brute_force_moment(iso_d, a1, kTau, 0);
  CHECK(r.value == doctest::Approx(114070.28205133541).epsilon(1e-6));
  CHECK(r.rel_error_estimate < 1e-8);
  CHECK(r.refinements >= 1);
}

TEST_CASE("brute force agrees with the surface-reduced integral") {
  const auto rule = sphere::gauss_product_rule(24);
  for (double alpha : {0.5, 0.75, 1.0}) {
    const auto a_fn = [&](const Eigen::Vector3d&) { return alpha; };
    for (int n : {0, 2, 4}) {
      const double brute = oracle::brute_force_moment(iso_d, a_fn, kTau, n).value;
      const double analytic = moment_analytic(iso_d, a_fn, kTau, n, rule).value;
      CHECK(analytic == doctest::Approx(brute).epsilon(1e-6));
    }
  }
}

TEST_CASE("rotation invariance of the moment integral") {
  const Eigen::Vector3d lam(1.5e-3, 0.6e-3, 0.3e-3);
  Eigen::Matrix3d rot;
  rot = Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, 0).normalized());
  const Eigen::Matrix3d t0 = lam.asDiagonal();
  const Eigen::Matrix3d t1 = rot * t0 * rot.transpose();
  const auto a_fn = [](const Eigen::Vector3d&) { return 0.65; };
  for (int n : {0, 2}) {
    const double m0 = oracle::brute_force_moment(
        [&](const Eigen::Vector3d& g) { return g.dot(t0 * g); }, a_fn, kTau, n).value;
    const double m1 = oracle::brute_force_moment(
        [&](const Eigen::Vector3d& g) { return g.dot(t1 * g); }, a_fn, kTau, n).value;
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-7));
  }
}

TEST_CASE("refinement convergence under node doubling") {
  const auto a_fn = [](const Eigen::Vector3d&) { return 0.6; };
  oracle::QuadratureSpec coarse;
  coarse.radial_nodes = 64;
  coarse.sphere_theta = 12;
  oracle::QuadratureSpec fine;
  fine.radial_nodes = 128;
  fine.sphere_theta = 24;
  const double v0 = oracle::brute_force_moment(iso_d, a_fn, kTau, 2, coarse).value;
  const double v1 = oracle::brute_force_moment(iso_d, a_fn, kTau, 2, fine).value;
  CHECK(v1 == doctest::Approx(v0).epsilon(1e-8));
}

TEST_CASE("invalid fields and specs are rejected") {
  const auto a_fn = [](const Eigen::Vector3d&) { return 0.8; };
  CHECK_THROWS_AS(oracle::brute_force_moment([](const Eigen::Vector3d&) { return 0.0; },
                                             a_fn, kTau, 0),
                  NumericalError);
  oracle::QuadratureSpec bad;
  bad.radial_nodes = 1;
  CHECK_THROWS_AS(oracle::brute_force_moment(iso_d, a_fn, kTau, 0, bad),
                  std::invalid_argument);
  CHECK_THROWS_AS(oracle::brute_force_moment(iso_d, a_fn, 0.0, 0), std::invalid_argument);
}
