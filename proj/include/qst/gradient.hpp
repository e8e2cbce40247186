#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qst {

// Acquisition geometry: unit gradient directions, b-values [s/mm^2],
// derived q magnitudes [1/mm] and the effective diffusion time tau [s].
struct GradientScheme {
  std::vector<Eigen::Vector3d> directions;  // unit norm; zero only where b = 0
  std::vector<double> bvals;
  std::vector<double> q_mags;
  double tau = 0.0;
  std::vector<std::string> warnings;  // e.g. renormalized input vectors

  int n_measurements() const { return static_cast<int>(bvals.size()); }
};

double q_from_b(double b, double tau);
double b_from_q(double q, double tau);

// Validates fields and derives q_mags; throws DataError on violations.
GradientScheme make_scheme(std::vector<Eigen::Vector3d> directions,
                           std::vector<double> bvals, double tau);

// FSL-style text tables. bvals: N whitespace-separated scalars. bvecs:
// 3 rows of N (FSL) or N rows of 3, auto-detected by shape; the N = 3
// ambiguity resolves as 3xN. Non-unit nonzero vectors are renormalized
// with a warning.
GradientScheme parse_gradient_scheme(const std::string& bvals_text,
                                     const std::string& bvecs_text, double tau);

GradientScheme read_gradient_scheme(const std::string& bvals_path,
                                    const std::string& bvecs_path, double tau);

inline constexpr double kDefaultBTolerance = 25.0;   // [s/mm^2]
inline constexpr double kDefaultAngularTolDeg = 1.0;

// Shell structure: each measurement belongs to exactly one shell or to
// the b0 set; centers strictly increasing.
struct ShellGrouping {
  std::vector<double> shell_b_centers;
  std::vector<std::vector<int>> shell_members;
  std::vector<int> b0_indices;

  int n_shells() const { return static_cast<int>(shell_b_centers.size()); }
  // Index of the shell whose center matches b within tol, or -1.
  int find_shell(double b, double tol = kDefaultBTolerance) const;
};

// Measurements with b <= b_tolerance become b0; the rest cluster by
// single linkage on b (a gap > b_tolerance starts a new shell).
ShellGrouping group_shells(const GradientScheme& scheme,
                           double b_tolerance = kDefaultBTolerance);

// One bundle per canonical direction: the matching measurement index on
// each shell, or -1 where the shell has no direction within tolerance.
struct DirectionBundle {
  Eigen::Vector3d canonical;
  std::vector<int> member;  // per shell, -1 = absent

  bool complete() const {
    for (int m : member)
      if (m < 0) return false;
    return true;
  }
};

struct DirectionBundleSet {
  std::vector<DirectionBundle> bundles;
  int n_complete = 0;
};

// Greedy matching seeded from the first shell's directions; candidates
// match up to an antipodal sign flip (E(q) = E(-q)).
DirectionBundleSet match_directions(const GradientScheme& scheme,
                                    const ShellGrouping& grouping,
                                    double angular_tol_deg = kDefaultAngularTolDeg);

}  // namespace qst
