#include "qst/signal_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qst/errors.hpp"

namespace qst {

bool attenuation_in_window(double e) {
  return std::isfinite(e) && e > kAttenuationEps && e < 1.0 - kAttenuationEps;
}

double clamp_attenuation(double e) {
  if (!std::isfinite(e) || e <= 0.0 || e >= 1.0) {
    throw NumericalError("invalid attenuation E = " + std::to_string(e) +
                         ", expected E in (0, 1)");
  }
  return std::min(std::max(e, kAttenuationEps), 1.0 - kAttenuationEps);
}

double predict_attenuation(const StretchedParams& params, double b) {
  if (b < 0.0) throw std::invalid_argument("predict_attenuation: b < 0");
  if (b == 0.0) return 1.0;
  return std::exp(-std::pow(b * params.d, params.alpha));
}

double invert_diffusivity_b(double e, double alpha, double b) {
  if (b <= 0.0) throw std::invalid_argument("invert_diffusivity: b <= 0");
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("invert_diffusivity: alpha outside (0, 1]");
  const double ec = clamp_attenuation(e);
  return std::pow(-std::log(ec), 1.0 / alpha) / b;
}

double invert_diffusivity(double e, double alpha, double q, double tau) {
  if (q <= 0.0) throw std::invalid_argument("invert_diffusivity: q <= 0");
  if (tau <= 0.0) throw std::invalid_argument("invert_diffusivity: tau <= 0");
  const double b = 4.0 * std::numbers::pi * std::numbers::pi * tau * q * q;
  return invert_diffusivity_b(e, alpha, b);
}

}  // namespace qst
