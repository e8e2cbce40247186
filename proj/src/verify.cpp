#include "qst/verify.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "qst/errors.hpp"
#include "qst/oracle.hpp"
#include "qst/qspace.hpp"
#include "qst/rng.hpp"
#include "qst/signal_model.hpp"
#include "qst/sphere.hpp"

namespace qst::verify {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTau = 0.048333;  // [s]

Check make_check(std::string name, double computed, double reference, double tol) {
  Check c;
  c.name = std::move(name);
  c.computed = computed;
  c.reference = reference;
  c.rel_err = std::abs(computed / reference - 1.0);
  c.tol = tol;
  c.pass = c.rel_err < tol;
  return c;
}

// Closed form for the isotropic Gaussian field E = exp(-4 pi^2 tau q^2 D):
// M_n = 2 pi Gamma((n+3)/2) (4 pi^2 tau D)^(-(n+3)/2).
double gaussian_closed_form(double d, int n) {
  const double a = 4.0 * kPi * kPi * kTau * d;
  return 2.0 * kPi * std::tgamma((n + 3) / 2.0) * std::pow(a, -(n + 3) / 2.0);
}

void gaussian_suite(std::vector<Check>& out) {
  const double d = 0.7e-3;
  const double b = 1000.0;
  const double q = std::sqrt(b / (4.0 * kPi * kPi * kTau));
  const int n_dirs = 64;
  const std::vector<double> e(n_dirs, std::exp(-b * d));
  const std::vector<double> alpha(n_dirs, 1.0);
  const auto d_fn = [&](const Eigen::Vector3d&) { return d; };
  const auto a_fn = [&](const Eigen::Vector3d&) { return 1.0; };
  const auto rule = sphere::uniform_rule(sphere::fibonacci_directions(n_dirs));

  for (int n : {0, 2, 4}) {
    const double ref = gaussian_closed_form(d, n);
    const std::string tag = "gaussian/n=" + std::to_string(n) + "/";
    out.push_back(make_check(tag + "direct", moment_direct(e, alpha, q, n).value, ref, 1e-6));
    out.push_back(
        make_check(tag + "expansion", moment_expansion(e, alpha, q, n).value, ref, 1e-6));
    out.push_back(
        make_check(tag + "analytic", moment_analytic(d_fn, a_fn, kTau, n, rule).value, ref, 1e-6));
    out.push_back(make_check(
        tag + "brute-force", oracle::brute_force_moment(d_fn, a_fn, kTau, n).value, ref, 1e-6));
  }
  out.push_back(make_check("gaussian/rtop-dti",
                           rtop_dti({d, d, d}, kTau, RtopConvention::gaussian),
                           gaussian_closed_form(d, 0), 1e-6));
}

Eigen::Matrix3d random_spd(uint64_t seed, uint64_t field) {
  const double lo = 0.2e-3, hi = 2e-3;
  Eigen::Vector3d lam;
  for (int i = 0; i < 3; ++i)
    lam[i] = lo + (hi - lo) * rng::uniform_pos(seed, field, static_cast<uint64_t>(i));
  Eigen::Vector4d qv;
  for (int i = 0; i < 4; ++i) {
    double z1, z2;
    rng::gaussian_pair(seed, field, 100 + static_cast<uint64_t>(i), z1, z2);
    qv[i] = z1;
  }
  qv.normalize();
  const Eigen::Quaterniond rot(qv[0], qv[1], qv[2], qv[3]);
  const Eigen::Matrix3d r = rot.toRotationMatrix();
  return r * lam.asDiagonal() * r.transpose();
}

void oracle_suite(std::vector<Check>& out, int n_fields) {
  const uint64_t seed = 20240915;
  const auto dirs256 = sphere::fibonacci_directions(256);
  const auto dense = sphere::gauss_product_rule(64);
  const double b = 3000.0;
  const double q = std::sqrt(b / (4.0 * kPi * kPi * kTau));

  double worst_direct[3] = {0, 0, 0};
  double worst_analytic[3] = {0, 0, 0};
  for (int f = 0; f < n_fields; ++f) {
    const Eigen::Matrix3d tensor = random_spd(seed, static_cast<uint64_t>(f));
    const double alpha = 0.5 + 0.5 * rng::uniform_pos(seed, static_cast<uint64_t>(f), 7);
    const auto d_fn = [&](const Eigen::Vector3d& g) { return g.dot(tensor * g); };
    const auto a_fn = [&](const Eigen::Vector3d&) { return alpha; };

    std::vector<double> e(dirs256.size()), al(dirs256.size(), alpha);
    for (size_t i = 0; i < dirs256.size(); ++i)
      e[i] = predict_attenuation({d_fn(dirs256[i]), alpha}, b);

    for (int k = 0; k < 3; ++k) {
      const int n = 2 * k;
      const double ref = oracle::brute_force_moment(d_fn, a_fn, kTau, n).value;
      const double md = moment_direct(e, al, q, n).value;
      const double ma = moment_analytic(d_fn, a_fn, kTau, n, dense).value;
      worst_direct[k] = std::max(worst_direct[k], std::abs(md / ref - 1.0));
      worst_analytic[k] = std::max(worst_analytic[k], std::abs(ma / ref - 1.0));
    }
  }
  for (int k = 0; k < 3; ++k) {
    const int n = 2 * k;
    Check c;
    c.name = "oracle/n=" + std::to_string(n) + "/direct-vs-brute(" +
             std::to_string(n_fields) + " fields)";
    c.computed = worst_direct[k];
    c.reference = 0.0;
    c.rel_err = worst_direct[k];
    c.tol = 1e-2;
    c.pass = c.rel_err < c.tol;
    out.push_back(c);
    c.name = "oracle/n=" + std::to_string(n) + "/analytic-vs-brute(" +
             std::to_string(n_fields) + " fields)";
    c.computed = worst_analytic[k];
    c.rel_err = worst_analytic[k];
    c.tol = 1e-3;
    c.pass = c.rel_err < c.tol;
    out.push_back(c);
  }
}

void consistency_suite(std::vector<Check>& out) {
  const double d = 0.7e-3;
  const auto d_fn = [&](const Eigen::Vector3d&) { return d; };
  const auto rule = sphere::gauss_product_rule(32);
  for (double alpha : {0.5, 0.75, 1.0}) {
    const auto a_fn = [&](const Eigen::Vector3d&) { return alpha; };
    for (int n : {0, 2, 4}) {
      const double brute = oracle::brute_force_moment(d_fn, a_fn, kTau, n).value;
      const double analytic = moment_analytic(d_fn, a_fn, kTau, n, rule).value;
      out.push_back(make_check("consistency/alpha=" + std::to_string(alpha) +
                                   "/n=" + std::to_string(n),
                               analytic, brute, 1e-6));
    }
  }
}

}  // namespace

std::vector<Check> run_suite(const std::string& suite, int n_fields) {
  std::vector<Check> out;
  if (suite == "gaussian" || suite == "all") gaussian_suite(out);
  if (suite == "oracle" || suite == "all") oracle_suite(out, n_fields);
  if (suite == "consistency" || suite == "all") consistency_suite(out);
  if (out.empty())
    throw DataError("verify: unknown suite '" + suite +
                    "' (expected gaussian, oracle, consistency or all)");
  return out;
}

std::string format_table(const std::vector<Check>& checks) {
  std::string table;
  char line[256];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof(line), "%-55s %13.6e %13.6e %9.2e %7.0e %s\n", c.name.c_str(),
                  c.computed, c.reference, c.rel_err, c.tol, c.pass ? "PASS" : "FAIL");
    table += line;
  }
  return table;
}

}  // namespace qst::verify
