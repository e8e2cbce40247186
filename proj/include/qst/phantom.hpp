#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qst/gradient.hpp"
#include "qst/volume.hpp"

#include "json.hpp"

namespace qst {

// One homogeneous region: a half-open voxel box [x0,x1)x[y0,y1)x[z0,z1),
// or a catch-all when box is absent. The first matching region wins.
struct PhantomRegion {
  std::optional<std::array<int64_t, 6>> box;
  Eigen::Matrix3d tensor = Eigen::Matrix3d::Identity() * 0.7e-3;  // [mm^2/s], SPD
  double alpha = 1.0;
};

struct PhantomSpec {
  std::array<int64_t, 3> dims{16, 16, 4};
  std::array<double, 3> voxel_size{2.5, 2.5, 2.5};
  double s0 = 1.0;
  double tau = 0.048333;                 // [s]
  std::vector<double> shells;            // empty = 200..3000 step 200
  int dirs_per_shell = 33;
  int n_b0 = 1;
  double snr = 0.0;                      // Rician SNR at b0; 0 = noiseless
  uint64_t seed = 0;
  std::vector<PhantomRegion> regions;    // must cover all voxels
};

PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

// Matched direction tables across shells (same table on every shell),
// b0 measurements first.
GradientScheme phantom_scheme(const PhantomSpec& spec);

// Ground truth per voxel: the tensor (6 components), alpha, and the
// q-space moments of the exact field evaluated by dense quadrature.
struct PhantomTruth {
  Volume4D tensor6;  // nv = 6: Dxx, Dyy, Dzz, Dxy, Dxz, Dyz
  Volume4D alpha;
  Volume4D m0, m2, m4;
};

struct Phantom {
  GradientScheme scheme;
  Volume4D dwi;
  PhantomTruth truth;
};

// S(q) = s0 exp(-(b g^T T g)^alpha) per measurement; optional Rician
// noise sqrt((S+n1)^2 + n2^2) with sigma = s0/SNR from per-voxel
// counter-based streams, so output is independent of the thread count.
Phantom generate_phantom(const PhantomSpec& spec, int threads = 1);

}  // namespace qst
