#include "qst/oracle.hpp"

#include <cmath>
#include <numbers>

#include "qst/errors.hpp"

namespace qst::oracle {

namespace {

constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;
constexpr double kDecayTarget = 40.0;  // exp(-40) ~ 4e-18 at the cutoff

double evaluate(const std::function<double(const Eigen::Vector3d&)>& d_fn,
                const std::function<double(const Eigen::Vector3d&)>& alpha_fn,
                double tau, int n, int radial_nodes, int sphere_theta, double q_max) {
  const sphere::Rule rule = sphere::gauss_product_rule(sphere_theta);
  std::vector<double> q_nodes, q_weights;
  sphere::gauss_legendre(radial_nodes, 0.0, q_max, q_nodes, q_weights);

  std::vector<double> q_pow(q_nodes.size());
  for (size_t j = 0; j < q_nodes.size(); ++j)
    q_pow[j] = q_weights[j] * std::pow(q_nodes[j], n + 2);

  double total = 0.0;
  for (int k = 0; k < rule.size(); ++k) {
    const double d = d_fn(rule.dirs[k]);
    const double a = alpha_fn(rule.dirs[k]);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("brute_force_moment: non-positive diffusivity");
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("brute_force_moment: alpha outside (0, 1]");
    const double c = kFourPiSq * tau * d;
    double radial = 0.0;
    for (size_t j = 0; j < q_nodes.size(); ++j)
      radial += q_pow[j] * std::exp(-std::pow(c * q_nodes[j] * q_nodes[j], a));
    total += rule.weights[k] * radial;
  }
  return total;
}

}  // namespace

BruteForceResult brute_force_moment(const std::function<double(const Eigen::Vector3d&)>& d_fn,
                                    const std::function<double(const Eigen::Vector3d&)>& alpha_fn,
                                    double tau, int n, const QuadratureSpec& spec) {
  if (n < 0) throw std::invalid_argument("brute_force_moment: n < 0");
  if (tau <= 0.0) throw std::invalid_argument("brute_force_moment: tau <= 0");
  if (spec.radial_nodes < 2 || spec.sphere_theta < 2 || spec.tol <= 0.0)
    throw std::invalid_argument("brute_force_moment: invalid quadrature spec");

  double q_max = spec.q_max;
  if (q_max <= 0.0) {
    // Slowest decay governs the truncation; probe the field bounds on a
    // coarse direction sample.
    double inf_d = std::numeric_limits<double>::infinity();
    double inf_a = std::numeric_limits<double>::infinity();
    for (const auto& g : sphere::fibonacci_directions(128)) {
      inf_d = std::min(inf_d, d_fn(g));
      inf_a = std::min(inf_a, alpha_fn(g));
    }
    if (!(inf_d > 0.0) || !(inf_a > 0.0))
      throw NumericalError("brute_force_moment: field not bounded away from zero");
    q_max = std::sqrt(std::pow(kDecayTarget, 1.0 / inf_a) / (kFourPiSq * tau * inf_d));
  }

  int nr = spec.radial_nodes;
  int nt = spec.sphere_theta;
  double prev = evaluate(d_fn, alpha_fn, tau, n, nr, nt, q_max);
  double value = prev;
  double estimate = std::numeric_limits<double>::infinity();
  int rounds = 0;
  for (; rounds < spec.max_refinements; ++rounds) {
    nr *= 2;
    nt *= 2;
    value = evaluate(d_fn, alpha_fn, tau, n, nr, nt, q_max);
    estimate = std::abs(value - prev) / std::max(std::abs(value), 1e-300);
    // Tail check: double the radial domain at matching node density.
    const double tail = evaluate(d_fn, alpha_fn, tau, n, 2 * nr, nt, 2.0 * q_max);
    estimate = std::max(estimate, std::abs(tail - value) / std::max(std::abs(value), 1e-300));
    if (estimate < spec.tol) break;
    prev = value;
  }
  if (estimate >= spec.tol)
    throw NumericalError("brute_force_moment: refinement cap reached, error estimate " +
                         std::to_string(estimate) + " above tol " + std::to_string(spec.tol));

  BruteForceResult r;
  r.value = value;
  r.rel_error_estimate = estimate;
  r.refinements = rounds + 1;
  return r;
}

}  // namespace qst::oracle
