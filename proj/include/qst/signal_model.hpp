#pragma once

namespace qst {

// Stretched-exponential (Kohlrausch) signal representation along one
// gradient direction: E(b) = exp(-(b*D)^alpha), alpha in (0, 1].
// alpha = 1 is the mono-exponential (Gaussian) special case.
struct StretchedParams {
  double d = 0.0;      // apparent diffusivity [mm^2/s], > 0
  double alpha = 1.0;  // stretching exponent, (0, 1]
};

// Attenuation clamp window half-width. Attenuations are pulled into
// [eps, 1 - eps] before any logarithm; the reciprocal of -log(E) blows
// up as E -> 1, so the window bounds it.
inline constexpr double kAttenuationEps = 1e-6;

// Diffusivity bounds used by the fitting stage [mm^2/s].
inline constexpr double kDMin = 1e-6;
inline constexpr double kDMax = 1e-2;

// Lower bound standing in for the open end of alpha's (0, 1] range.
inline constexpr double kAlphaMin = 1e-2;
inline constexpr double kAlphaMax = 1.0;

// True when E needs no clamping, i.e. eps < E < 1 - eps.
bool attenuation_in_window(double e);

// Pulls E into [eps, 1 - eps]. Throws NumericalError when E is outside
// (0, 1) or not finite.
double clamp_attenuation(double e);

// E = exp(-(b*D)^alpha). Requires b >= 0; E(0) = 1.
double predict_attenuation(const StretchedParams& params, double b);

// Inverse of predict_attenuation at fixed alpha and b-value:
// D = (-log E)^(1/alpha) / b. E is clamped first.
double invert_diffusivity_b(double e, double alpha, double b);

// Same, parameterized by q [1/mm] and diffusion time tau [s]
// (b = 4 pi^2 tau q^2).
double invert_diffusivity(double e, double alpha, double q, double tau);

}  // namespace qst
