#include "qst/qspace.hpp"

#include <cmath>
#include <numbers>

#include "qst/errors.hpp"
#include "qst/signal_model.hpp"

namespace qst {

namespace {

constexpr double kPi = std::numbers::pi;

void check_moment_order(int n) {
  if (n < 0) throw std::invalid_argument("moment order n must be >= 0");
}

// Collects valid, clamped -log E values together with their alphas.
struct ShellTerms {
  std::vector<double> neg_log_e;
  std::vector<double> alpha;
  int n_clamped = 0;
  int n_excluded = 0;
};

ShellTerms prepare_shell(const std::vector<double>& e, const std::vector<double>& alphas) {
  if (e.size() != alphas.size())
    throw std::invalid_argument("shell attenuations and alphas differ in length");
  if (e.empty()) throw NumericalError("moment estimation: empty shell");
  ShellTerms t;
  t.neg_log_e.reserve(e.size());
  t.alpha.reserve(e.size());
  for (size_t i = 0; i < e.size(); ++i) {
    const double a = alphas[i];
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("moment estimation: alpha outside (0, 1]");
    if (!std::isfinite(e[i]) || e[i] <= 0.0 || e[i] >= 1.0) {
      ++t.n_excluded;
      continue;
    }
    if (!attenuation_in_window(e[i])) ++t.n_clamped;
    t.neg_log_e.push_back(-std::log(clamp_attenuation(e[i])));
    t.alpha.push_back(a);
  }
  if (t.neg_log_e.empty())
    throw NumericalError("moment estimation: no valid attenuation on the shell (" +
                         std::to_string(t.n_excluded) + " outside (0, 1))");
  return t;
}

void check_result(double value, const char* what) {
  if (!std::isfinite(value))
    throw NumericalError(std::string(what) + ": non-finite moment (gamma-weighted "
                         "terms overflowed; alpha too close to zero?)");
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::direct: return "direct";
    case Estimator::expansion: return "expansion";
    case Estimator::analytic: return "analytic";
    case Estimator::dti: return "dti";
  }
  return "unknown";
}

double checked_tgamma(double x) {
  if (!std::isfinite(x) || x <= 0.0)
    throw NumericalError("gamma: invalid argument " + std::to_string(x));
  const double g = std::tgamma(x);
  if (!std::isfinite(g))
    throw NumericalError("gamma: overflow at argument " + std::to_string(x));
  return g;
}

MomentResult moment_direct(const std::vector<double>& shell_attenuations,
                           const std::vector<double>& alphas, double q, int n) {
  check_moment_order(n);
  if (q <= 0.0) throw std::invalid_argument("moment_direct: q must be positive");
  const ShellTerms t = prepare_shell(shell_attenuations, alphas);

  double sum = 0.0;
  for (size_t i = 0; i < t.neg_log_e.size(); ++i) {
    const double a = t.alpha[i];
    const double nu = (n + 3) / (2.0 * a);
    sum += checked_tgamma(nu) / a * std::pow(t.neg_log_e[i], -nu);
  }
  const double mean = sum / static_cast<double>(t.neg_log_e.size());

  MomentResult r;
  r.n = n;
  r.estimator = Estimator::direct;
  r.value = 2.0 * kPi * std::pow(q, n + 3) * mean;
  r.n_clamped = t.n_clamped;
  r.n_excluded = t.n_excluded;
  check_result(r.value, "moment_direct");
  return r;
}

MomentResult moment_expansion(const std::vector<double>& shell_attenuations,
                              const std::vector<double>& alphas, double q, int n) {
  check_moment_order(n);
  if (q <= 0.0) throw std::invalid_argument("moment_expansion: q must be positive");
  const ShellTerms t = prepare_shell(shell_attenuations, alphas);

  const double m = n + 3;
  const size_t cnt = t.neg_log_e.size();
  double gamma_term = 0.0, nu_bar = 0.0, l_bar = 0.0, l2_bar = 0.0;
  double lin_alpha = 0.0, quad_alpha = 0.0;
  for (size_t i = 0; i < cnt; ++i) {
    const double a = t.alpha[i];
    const double l = t.neg_log_e[i];
    gamma_term += checked_tgamma(m / (2.0 * a)) / (8.0 * a * a * a);
    nu_bar += m / (2.0 * a);
    l_bar += l;
    l2_bar += l * l;
    lin_alpha += m + 2.0 * a;
    quad_alpha += 8.0 * a * a - 2.0 * m * a - m * m;
  }
  const double inv = 1.0 / static_cast<double>(cnt);
  gamma_term *= inv;
  nu_bar *= inv;
  l_bar *= inv;
  l2_bar *= inv;
  lin_alpha *= inv;
  quad_alpha *= inv;

  if (l_bar <= 0.0)
    throw NumericalError("moment_expansion: mean(-log E) <= 0");

  const double bracket = m * lin_alpha * l2_bar / (l_bar * l_bar) + quad_alpha;

  MomentResult r;
  r.n = n;
  r.estimator = Estimator::expansion;
  r.value = 2.0 * kPi * std::pow(q, m) * gamma_term * std::pow(l_bar, -nu_bar) * bracket;
  r.n_clamped = t.n_clamped;
  r.n_excluded = t.n_excluded;
  check_result(r.value, "moment_expansion");
  return r;
}

MomentResult moment_analytic(const std::function<double(const Eigen::Vector3d&)>& d_fn,
                             const std::function<double(const Eigen::Vector3d&)>& alpha_fn,
                             double tau, int n, const sphere::Rule& rule) {
  check_moment_order(n);
  if (tau <= 0.0) throw std::invalid_argument("moment_analytic: tau must be positive");
  if (rule.size() == 0) throw std::invalid_argument("moment_analytic: empty quadrature");

  const double c_tau = std::pow(2.0, -n - 4) * std::pow(kPi, -n - 3) *
                       std::pow(tau, -(n + 3) / 2.0);
  double sum = 0.0;
  for (int k = 0; k < rule.size(); ++k) {
    const double d = d_fn(rule.dirs[k]);
    const double a = alpha_fn(rule.dirs[k]);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("moment_analytic: non-positive diffusivity on the sphere");
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("moment_analytic: alpha outside (0, 1]");
    const double nu = (n + 3) / (2.0 * a);
    sum += rule.weights[k] * checked_tgamma(nu) / a * std::pow(d, -(n + 3) / 2.0);
  }

  MomentResult r;
  r.n = n;
  r.estimator = Estimator::analytic;
  r.value = c_tau * sum;
  check_result(r.value, "moment_analytic");
  return r;
}

double rtop_dti(const std::array<double, 3>& eigenvalues, double tau,
                RtopConvention convention) {
  if (tau <= 0.0) throw std::invalid_argument("rtop_dti: tau must be positive");
  double det = 1.0;
  for (double lam : eigenvalues) {
    if (lam < 1e-6)
      throw NumericalError("rtop_dti: eigenvalue " + std::to_string(lam) +
                           " below the 1e-6 mm^2/s floor");
    det *= lam;
  }
  const double factor = (convention == RtopConvention::paper) ? 3.0 : 4.0;
  return std::pow(factor * kPi * tau, -1.5) / std::sqrt(det);
}

}  // namespace qst
