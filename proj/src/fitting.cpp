#include "qst/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "qst/errors.hpp"

namespace qst {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Residuals and Jacobian at x; resize as needed.
using LMEval = std::function<void(const VectorXd&, VectorXd&, MatrixXd&)>;

struct LMOutcome {
  VectorXd x;
  double cost = 0.0;  // 1/2 ||r||^2
  int n_iter = 0;
  bool converged = false;
};

VectorXd projected_gradient(const VectorXd& x, const VectorXd& g, const VectorXd& lo,
                            const VectorXd& hi) {
  VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] <= lo[i])
      pg[i] = std::min(g[i], 0.0);
    else if (x[i] >= hi[i])
      pg[i] = std::max(g[i], 0.0);
  }
  return pg;
}

// Damped least squares with Marquardt diagonal scaling and projection
// onto the box. Stops on the projected-gradient or relative-step
// tolerance; hitting max_iter leaves converged = false.
LMOutcome bounded_lm(const LMEval& eval, VectorXd x, const VectorXd& lo, const VectorXd& hi,
                     double gtol, double xtol, int max_iter) {
  x = x.cwiseMax(lo).cwiseMin(hi);
  VectorXd r;
  MatrixXd jac;
  eval(x, r, jac);
  double cost = 0.5 * r.squaredNorm();
  MatrixXd hess = jac.transpose() * jac;
  VectorXd grad = jac.transpose() * r;

  double mu = 1e-3 * std::max(hess.diagonal().maxCoeff(), 1e-30);
  double nu = 2.0;

  LMOutcome out;
  for (out.n_iter = 0; out.n_iter < max_iter; ++out.n_iter) {
    if (projected_gradient(x, grad, lo, hi).lpNorm<Eigen::Infinity>() < gtol) {
      out.converged = true;
      break;
    }
    MatrixXd damped = hess;
    damped.diagonal() += mu * hess.diagonal().cwiseMax(1e-30);
    const VectorXd delta = damped.ldlt().solve(-grad);
    const VectorXd x_new = (x + delta).cwiseMax(lo).cwiseMin(hi);
    const VectorXd step = x_new - x;

    VectorXd r_new;
    MatrixXd jac_new;
    eval(x_new, r_new, jac_new);
    const double cost_new = 0.5 * r_new.squaredNorm();

    if (cost_new < cost) {
      const double predicted = -grad.dot(step) - 0.5 * step.dot(hess * step);
      const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : 1.0;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      const double step_norm = step.norm();
      x = x_new;
      r.swap(r_new);
      jac.swap(jac_new);
      cost = cost_new;
      hess = jac.transpose() * jac;
      grad = jac.transpose() * r;
      if (step_norm <= xtol * (x.norm() + xtol)) {
        ++out.n_iter;
        out.converged = true;
        break;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e18) {  // numerically stalled; the gradient check decides
        out.converged =
            projected_gradient(x, grad, lo, hi).lpNorm<Eigen::Infinity>() < gtol;
        break;
      }
    }
  }
  out.x = x;
  out.cost = cost;
  return out;
}

// Internal D scale: brings the two stretched parameters to comparable
// magnitude so the shared tolerances are meaningful.
constexpr double kDScale = 1e-3;

struct ValidSample {
  double b;
  double e;  // attenuation S/s0, inside the clamp window
};

std::vector<ValidSample> windowed_samples(const std::vector<BSample>& samples, double s0) {
  std::vector<ValidSample> out;
  for (const auto& s : samples) {
    if (!std::isfinite(s.signal) || !std::isfinite(s.b))
      throw DataError("stretched fit: non-finite sample");
    if (s.b <= 0.0) continue;
    const double e = s.signal / s0;
    if (attenuation_in_window(e)) out.push_back({s.b, e});
  }
  return out;
}

int count_distinct_b(const std::vector<ValidSample>& samples) {
  std::set<double> bs;
  for (const auto& s : samples) bs.insert(s.b);
  return static_cast<int>(bs.size());
}

}  // namespace

InitGuess init_stretched(const std::vector<BSample>& samples, double s0,
                         const FitOptions& options) {
  if (s0 <= 0.0) throw DataError("init_stretched: s0 must be positive");
  const auto valid = windowed_samples(samples, s0);

  InitGuess guess;
  if (valid.size() < 2 || count_distinct_b(valid) < 2) {
    guess.params = {0.7e-3, 0.8};
    guess.degraded = true;
    return guess;
  }

  const auto [lo_it, hi_it] = std::minmax_element(
      valid.begin(), valid.end(), [](const auto& a, const auto& b) { return a.b < b.b; });
  const double l_lo = std::log(-std::log(lo_it->e));
  const double l_hi = std::log(-std::log(hi_it->e));
  double alpha0 = (l_hi - l_lo) / (std::log(hi_it->b) - std::log(lo_it->b));
  alpha0 = std::clamp(alpha0, 0.3, 1.0);
  double d0 = invert_diffusivity_b(lo_it->e, alpha0, lo_it->b);
  d0 = std::clamp(d0, options.d_min, options.d_max);
  guess.params = {d0, alpha0};
  return guess;
}

DirectionFit fit_stretched_direction(const std::vector<BSample>& samples, double s0,
                                     const FitOptions& options,
                                     const Eigen::Vector3d& direction) {
  if (s0 <= 0.0) throw DataError("stretched fit: s0 must be positive");
  const auto valid = windowed_samples(samples, s0);
  if (valid.size() < 2 || count_distinct_b(valid) < 2)
    throw DataError("stretched fit: underdetermined, " + std::to_string(valid.size()) +
                    " usable samples (need >= 2 at distinct b)");

  const InitGuess init = init_stretched(samples, s0, options);

  // Scaled parameters u = (D / kDScale, alpha); residuals on E = S/s0.
  const auto eval = [&](const VectorXd& u, VectorXd& r, MatrixXd& jac) {
    const double d = u[0] * kDScale;
    const double a = u[1];
    r.resize(static_cast<Eigen::Index>(valid.size()));
    jac.resize(static_cast<Eigen::Index>(valid.size()), 2);
    for (size_t j = 0; j < valid.size(); ++j) {
      const double bd = valid[j].b * d;
      const double p = std::pow(bd, a);
      const double m = std::exp(-p);
      r[static_cast<Eigen::Index>(j)] = valid[j].e - m;
      // dm/dD = -m a p / D, dm/dalpha = -m p log(bD); residual = e - m.
      jac(static_cast<Eigen::Index>(j), 0) = m * a * p / d * kDScale;
      jac(static_cast<Eigen::Index>(j), 1) = m * p * std::log(bd);
    }
  };

  VectorXd u0(2), lo(2), hi(2);
  u0 << init.params.d / kDScale, init.params.alpha;
  lo << options.d_min / kDScale, options.alpha_min;
  hi << options.d_max / kDScale, options.alpha_max;
  const LMOutcome lm =
      bounded_lm(eval, u0, lo, hi, options.gtol, options.xtol, options.max_iter);

  DirectionFit fit;
  fit.direction = direction;
  fit.params = {lm.x[0] * kDScale, lm.x[1]};
  fit.rss = 2.0 * lm.cost * s0 * s0;  // back to signal units
  fit.n_iter = lm.n_iter;
  fit.converged = lm.converged;
  fit.at_bound_d = lm.x[0] <= lo[0] || lm.x[0] >= hi[0];
  fit.at_bound_alpha = lm.x[1] <= lo[1] || lm.x[1] >= hi[1];
  fit.degraded_init = init.degraded;
  fit.n_samples = static_cast<int>(valid.size());
  return fit;
}

StretchedVoxelFit fit_stretched_voxel(const std::vector<double>& voxel_signals,
                                      const GradientScheme& scheme,
                                      const ShellGrouping& grouping,
                                      const DirectionBundleSet& bundles,
                                      const std::vector<int>& shell_subset,
                                      const FitOptions& options,
                                      std::optional<double> s0_override) {
  if (voxel_signals.size() != static_cast<size_t>(scheme.n_measurements()))
    throw DataError("voxel fit: " + std::to_string(voxel_signals.size()) +
                    " signals for " + std::to_string(scheme.n_measurements()) +
                    " measurements");

  std::vector<int> subset = shell_subset;
  if (subset.empty()) {
    subset.resize(grouping.n_shells());
    std::iota(subset.begin(), subset.end(), 0);
  }
  for (int s : subset)
    if (s < 0 || s >= grouping.n_shells())
      throw DataError("voxel fit: shell index " + std::to_string(s) + " out of range");

  double s0;
  if (s0_override) {
    s0 = *s0_override;
  } else {
    if (grouping.b0_indices.empty())
      throw DataError("voxel fit: no b0 measurement and no explicit s0");
    s0 = 0.0;
    for (int i : grouping.b0_indices) s0 += voxel_signals[i];
    s0 /= static_cast<double>(grouping.b0_indices.size());
  }
  if (!(s0 > 0.0)) throw DataError("voxel fit: baseline s0 <= 0");

  StretchedVoxelFit voxel;
  voxel.s0 = s0;
  for (const auto& bundle : bundles.bundles) {
    bool complete = true;
    for (int s : subset)
      if (bundle.member[s] < 0) complete = false;
    if (!complete) continue;

    std::vector<BSample> samples;
    samples.reserve(subset.size());
    for (int s : subset) {
      const int idx = bundle.member[s];
      samples.push_back({scheme.bvals[idx], voxel_signals[idx]});
    }
    const auto valid = windowed_samples(samples, s0);
    if (valid.size() < 2 || count_distinct_b(valid) < 2) {
      DirectionFit failed;
      failed.direction = bundle.canonical;
      failed.params = {0.7e-3, 0.8};
      failed.converged = false;
      failed.degraded_init = true;
      failed.n_samples = static_cast<int>(valid.size());
      voxel.fits.push_back(failed);
      continue;
    }
    voxel.fits.push_back(fit_stretched_direction(samples, s0, options, bundle.canonical));
  }
  if (voxel.fits.empty())
    throw DataError("voxel fit: no bundle is complete over the chosen shell subset");
  return voxel;
}

TensorFit fit_dti(const std::vector<double>& voxel_signals, const GradientScheme& scheme,
                  const std::vector<int>& measurement_subset, const FitOptions& options,
                  std::optional<double> s0_override) {
  if (voxel_signals.size() != static_cast<size_t>(scheme.n_measurements()))
    throw DataError("dti fit: signal count does not match the scheme");

  std::vector<int> dw = measurement_subset;
  if (dw.empty()) {
    for (int i = 0; i < scheme.n_measurements(); ++i)
      if (scheme.bvals[i] > 0.0) dw.push_back(i);
  }
  for (int i : dw)
    if (i < 0 || i >= scheme.n_measurements() || scheme.bvals[i] <= 0.0)
      throw DataError("dti fit: invalid measurement index in subset");

  double s0;
  if (s0_override) {
    s0 = *s0_override;
  } else {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < scheme.n_measurements(); ++i)
      if (scheme.bvals[i] == 0.0) {
        sum += voxel_signals[i];
        ++n;
      }
    if (n == 0) throw DataError("dti fit: no b0 measurement and no explicit s0");
    s0 = sum / n;
  }
  if (!(s0 > 0.0)) throw DataError("dti fit: baseline s0 <= 0");

  const int m = static_cast<int>(dw.size());
  if (m < 6)
    throw DataError("dti fit: " + std::to_string(m) + " diffusion-weighted samples (need >= 6)");

  // Design rows are b * (gx^2, gy^2, gz^2, 2 gx gy, 2 gx gz, 2 gy gz).
  MatrixXd design(m, 6);
  VectorXd log_atten(m), weights(m), atten(m);
  for (int j = 0; j < m; ++j) {
    const int idx = dw[j];
    const Eigen::Vector3d& g = scheme.directions[idx];
    const double b = scheme.bvals[idx];
    design.row(j) << g.x() * g.x(), g.y() * g.y(), g.z() * g.z(), 2.0 * g.x() * g.y(),
        2.0 * g.x() * g.z(), 2.0 * g.y() * g.z();
    design.row(j) *= b;
    const double e = std::clamp(voxel_signals[idx] / s0, 1e-10, 1e10);
    atten[j] = e;
    log_atten[j] = -std::log(e);
    const double w = std::clamp(e, 1e-10, 1.0);
    weights[j] = w * w;
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < 6)
    throw DataError("dti fit: rank-deficient design (rank " + std::to_string(qr.rank()) +
                    " < 6); need six non-collinear directions");

  const MatrixXd wx = weights.asDiagonal() * design;
  const VectorXd theta0 =
      (design.transpose() * wx).ldlt().solve(wx.transpose() * log_atten);

  const auto eval = [&](const VectorXd& u, VectorXd& r, MatrixXd& jac) {
    const VectorXd theta = u * kDScale;
    r.resize(m);
    jac.resize(m, 6);
    for (int j = 0; j < m; ++j) {
      const double model = std::exp(-design.row(j).dot(theta));
      r[j] = atten[j] - model;
      jac.row(j) = design.row(j) * model * kDScale;
    }
  };

  VectorXd lo = VectorXd::Constant(6, -1e6);
  VectorXd hi = VectorXd::Constant(6, 1e6);
  const LMOutcome lm = bounded_lm(eval, theta0 / kDScale, lo, hi, options.gtol,
                                  options.xtol, options.max_iter);

  TensorFit fit;
  const VectorXd theta = lm.x * kDScale;
  for (int k = 0; k < 6; ++k) fit.components[k] = theta[k];
  fit.converged = lm.converged;
  fit.n_iter = lm.n_iter;

  Eigen::Matrix3d tensor;
  tensor << theta[0], theta[3], theta[4], theta[3], theta[1], theta[5], theta[4], theta[5],
      theta[2];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(tensor);
  Eigen::Vector3d lam = eig.eigenvalues();  // ascending
  fit.eigenvalues = {std::max(lam[2], kEigenvalueFloor), std::max(lam[1], kEigenvalueFloor),
                     std::max(lam[0], kEigenvalueFloor)};
  return fit;
}

}  // namespace qst
