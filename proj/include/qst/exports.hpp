#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qst/volume.hpp"

namespace qst {

// Linear-interpolation percentile over finite values, p in [0, 100].
double percentile(std::vector<double> values, double p);

// 8-bit binary PGM (P5) of one slice of volume component v. window is
// (lo, hi); absent = auto (2nd..98th percentile of finite slice values).
// NaN renders as 0; rounding is half-up.
std::vector<uint8_t> export_slice_pgm(const Volume4D& vol, int axis, int64_t index,
                                      std::optional<std::pair<double, double>> window = {},
                                      int64_t v = 0);

void write_pgm(const std::vector<uint8_t>& bytes, const std::string& path);

// Per-region summary of one scalar map. Regions come from a label
// volume (each distinct nonzero value is a region); a null label volume
// gives a single region named "mask". Appends rows
//   region,measure,estimator,shell_b,mean,median,p05,p95
// for the masked finite voxels. Locale-independent formatting.
std::string summary_csv_header();
std::string summary_csv_rows(const Volume4D& map, const std::string& measure,
                             const std::string& estimator, double shell_b,
                             const Volume4D* region_labels, const Mask& mask);

// Shortest round-trip double formatting with '.' decimal separator.
std::string format_double(double v);

// FNV-1a 64-bit, used for provenance hashes in JSON sidecars.
uint64_t fnv1a64(const std::string& s);

}  // namespace qst
