#include "qst/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "qst/errors.hpp"
#include "qst/sphere.hpp"

namespace qst {

namespace {

constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;
constexpr double kUnitNormTol = 1e-6;

std::vector<std::vector<double>> parse_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError("gradient table: cannot parse '" + tok + "' as a number");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

double q_from_b(double b, double tau) {
  if (tau <= 0.0) throw DataError("q_from_b: tau must be positive");
  if (b < 0.0) throw DataError("q_from_b: negative b-value");
  return std::sqrt(b / (kFourPiSq * tau));
}

double b_from_q(double q, double tau) {
  if (tau <= 0.0) throw DataError("b_from_q: tau must be positive");
  return kFourPiSq * tau * q * q;
}

GradientScheme make_scheme(std::vector<Eigen::Vector3d> directions,
                           std::vector<double> bvals, double tau) {
  if (tau <= 0.0) throw DataError("gradient scheme: tau must be positive, got " +
                                  std::to_string(tau));
  if (directions.size() != bvals.size())
    throw DataError("gradient scheme: " + std::to_string(bvals.size()) +
                    " b-values but " + std::to_string(directions.size()) +
                    " directions");
  if (bvals.empty()) throw DataError("gradient scheme: empty table");

  GradientScheme scheme;
  scheme.tau = tau;
  scheme.bvals = std::move(bvals);
  scheme.directions = std::move(directions);
  scheme.q_mags.resize(scheme.bvals.size());

  for (size_t i = 0; i < scheme.bvals.size(); ++i) {
    const double b = scheme.bvals[i];
    if (!std::isfinite(b)) throw DataError("gradient scheme: non-finite b-value");
    if (b < 0.0)
      throw DataError("gradient scheme: negative b-value at index " + std::to_string(i));
    Eigen::Vector3d& g = scheme.directions[i];
    if (!g.allFinite()) throw DataError("gradient scheme: non-finite direction");
    const double norm = g.norm();
    if (norm == 0.0) {
      if (b > 0.0)
        throw DataError("gradient scheme: zero direction with b = " + std::to_string(b) +
                        " at index " + std::to_string(i));
    } else if (std::abs(norm - 1.0) > kUnitNormTol) {
      g /= norm;
      scheme.warnings.push_back("renormalized direction " + std::to_string(i) +
                                " (norm was " + std::to_string(norm) + ")");
    }
    scheme.q_mags[i] = q_from_b(b, tau);
  }
  return scheme;
}

GradientScheme parse_gradient_scheme(const std::string& bvals_text,
                                     const std::string& bvecs_text, double tau) {
  auto bval_rows = parse_rows(bvals_text);
  std::vector<double> bvals;
  for (auto& row : bval_rows) bvals.insert(bvals.end(), row.begin(), row.end());
  if (bvals.empty()) throw DataError("bvals: no values found");
  const size_t n = bvals.size();

  auto rows = parse_rows(bvecs_text);
  if (rows.empty()) throw DataError("bvecs: no values found");
  for (const auto& row : rows)
    if (row.size() != rows[0].size())
      throw DataError("bvecs: ragged rows (" + std::to_string(row.size()) + " vs " +
                      std::to_string(rows[0].size()) + " entries)");

  std::vector<Eigen::Vector3d> dirs(n);
  if (rows.size() == 3 && rows[0].size() == n) {
    // FSL convention: 3 rows of N. Wins the N = 3 ambiguity.
    for (size_t i = 0; i < n; ++i)
      dirs[i] = Eigen::Vector3d(rows[0][i], rows[1][i], rows[2][i]);
  } else if (rows.size() == n && rows[0].size() == 3) {
    for (size_t i = 0; i < n; ++i)
      dirs[i] = Eigen::Vector3d(rows[i][0], rows[i][1], rows[i][2]);
  } else {
    throw DataError("bvecs: shape " + std::to_string(rows.size()) + "x" +
                    std::to_string(rows[0].size()) + " does not match " +
                    std::to_string(n) + " b-values");
  }
  return make_scheme(std::move(dirs), std::move(bvals), tau);
}

GradientScheme read_gradient_scheme(const std::string& bvals_path,
                                    const std::string& bvecs_path, double tau) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return parse_gradient_scheme(slurp(bvals_path), slurp(bvecs_path), tau);
}

int ShellGrouping::find_shell(double b, double tol) const {
  for (int s = 0; s < n_shells(); ++s)
    if (std::abs(shell_b_centers[s] - b) <= tol) return s;
  return -1;
}

ShellGrouping group_shells(const GradientScheme& scheme, double b_tolerance) {
  if (b_tolerance <= 0.0) throw DataError("group_shells: b_tolerance must be positive");

  ShellGrouping grouping;
  std::vector<int> dw;
  for (int i = 0; i < scheme.n_measurements(); ++i) {
    if (scheme.bvals[i] <= b_tolerance)
      grouping.b0_indices.push_back(i);
    else
      dw.push_back(i);
  }
  if (dw.empty()) return grouping;

  std::sort(dw.begin(), dw.end(), [&](int a, int b) {
    if (scheme.bvals[a] != scheme.bvals[b]) return scheme.bvals[a] < scheme.bvals[b];
    return a < b;  // stable under permutation of the input order
  });

  std::vector<std::vector<int>> clusters{{dw[0]}};
  for (size_t k = 1; k < dw.size(); ++k) {
    if (scheme.bvals[dw[k]] - scheme.bvals[dw[k - 1]] > b_tolerance)
      clusters.emplace_back();
    clusters.back().push_back(dw[k]);
  }

  for (auto& members : clusters) {
    double center = 0.0;
    for (int i : members) center += scheme.bvals[i];
    center /= static_cast<double>(members.size());
    for (int i : members) {
      if (std::abs(scheme.bvals[i] - center) > b_tolerance)
        throw DataError("group_shells: shell around b = " + std::to_string(center) +
                        " spreads beyond the tolerance of " +
                        std::to_string(b_tolerance) + "; adjust b_tolerance");
    }
    std::sort(members.begin(), members.end());
    grouping.shell_b_centers.push_back(center);
    grouping.shell_members.push_back(std::move(members));
  }
  return grouping;
}

DirectionBundleSet match_directions(const GradientScheme& scheme,
                                    const ShellGrouping& grouping,
                                    double angular_tol_deg) {
  if (grouping.n_shells() < 1)
    throw DataError("match_directions: no diffusion-weighted shells");
  const double tol_rad = angular_tol_deg * std::numbers::pi / 180.0;

  DirectionBundleSet set;
  for (int idx : grouping.shell_members[0]) {
    DirectionBundle bundle;
    bundle.canonical = scheme.directions[idx];
    bundle.member.assign(grouping.n_shells(), -1);
    bundle.member[0] = idx;
    set.bundles.push_back(std::move(bundle));
  }

  for (int s = 1; s < grouping.n_shells(); ++s) {
    std::vector<bool> used(grouping.shell_members[s].size(), false);
    for (auto& bundle : set.bundles) {
      double best = tol_rad;
      int best_k = -1;
      for (size_t k = 0; k < grouping.shell_members[s].size(); ++k) {
        if (used[k]) continue;
        const int idx = grouping.shell_members[s][k];
        const double ang = sphere::axial_angle(scheme.directions[idx], bundle.canonical);
        if (ang <= best) {
          best = ang;
          best_k = static_cast<int>(k);
        }
      }
      if (best_k >= 0) {
        used[best_k] = true;
        bundle.member[s] = grouping.shell_members[s][best_k];
      }
    }
  }

  set.n_complete = 0;
  for (const auto& b : set.bundles)
    if (b.complete()) ++set.n_complete;
  return set;
}

}  // namespace qst
