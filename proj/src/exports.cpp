#include "qst/exports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "qst/errors.hpp"

namespace qst {

double percentile(std::vector<double> values, double p) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) throw DataError("percentile: no finite values");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * (static_cast<double>(values.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = static_cast<size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[std::min(hi, values.size() - 1)] * frac;
}

std::vector<uint8_t> export_slice_pgm(const Volume4D& vol, int axis, int64_t index,
                                      std::optional<std::pair<double, double>> window,
                                      int64_t v) {
  if (axis < 0 || axis > 2) throw DataError("export_slice_pgm: axis must be 0, 1 or 2");
  if (index < 0 || index >= vol.dims[axis])
    throw DataError("export_slice_pgm: slice index " + std::to_string(index) +
                    " out of range [0, " + std::to_string(vol.dims[axis]) + ")");
  if (v < 0 || v >= vol.dims[3]) throw DataError("export_slice_pgm: component out of range");

  const int a1 = (axis == 0) ? 1 : 0;
  const int a2 = (axis == 2) ? 1 : 2;
  const int64_t w = vol.dims[a1], h = vol.dims[a2];

  std::vector<double> slice(static_cast<size_t>(w * h));
  for (int64_t j = 0; j < h; ++j)
    for (int64_t i = 0; i < w; ++i) {
      int64_t c[3];
      c[axis] = index;
      c[a1] = i;
      c[a2] = j;
      slice[static_cast<size_t>(j * w + i)] = vol.at(c[0], c[1], c[2], v);
    }

  double lo, hi;
  if (window) {
    lo = window->first;
    hi = window->second;
    if (!(lo < hi)) throw DataError("export_slice_pgm: window lo must be < hi");
  } else {
    lo = percentile(slice, 2.0);
    hi = percentile(slice, 98.0);
    if (lo == hi) hi = lo + 1.0;  // constant slice
  }

  std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + slice.size());
  for (double val : slice) {
    uint8_t pix = 0;
    if (std::isfinite(val)) {
      const double t = std::clamp((val - lo) / (hi - lo), 0.0, 1.0);
      pix = static_cast<uint8_t>(std::min(255.0, std::floor(255.0 * t + 0.5)));
    }
    out.push_back(pix);
  }
  return out;
}

void write_pgm(const std::vector<uint8_t>& bytes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string summary_csv_header() { return "region,measure,estimator,shell_b,mean,median,p05,p95\n"; }

std::string summary_csv_rows(const Volume4D& map, const std::string& measure,
                             const std::string& estimator, double shell_b,
                             const Volume4D* region_labels, const Mask& mask) {
  if (map.nv() != 1) throw DataError("summary: expected a scalar map");
  if (region_labels && (region_labels->dims[0] != map.dims[0] ||
                        region_labels->dims[1] != map.dims[1] ||
                        region_labels->dims[2] != map.dims[2]))
    throw DataError("summary: region label dims do not match the map");

  std::map<std::string, std::vector<double>> regions;
  for (int64_t z = 0; z < map.nz(); ++z)
    for (int64_t y = 0; y < map.ny(); ++y)
      for (int64_t x = 0; x < map.nx(); ++x) {
        if (!mask(x, y, z)) continue;
        const double val = map.at(x, y, z);
        if (!std::isfinite(val)) continue;
        std::string name = "mask";
        if (region_labels) {
          const double label = region_labels->at(x, y, z);
          if (label == 0.0) continue;
          name = format_double(label);
        }
        regions[name].push_back(val);
      }

  std::string csv;
  for (auto& [name, vals] : regions) {
    double sum = 0.0;
    for (double v : vals) sum += v;
    csv += name + "," + measure + "," + estimator + "," + format_double(shell_b) + "," +
           format_double(sum / static_cast<double>(vals.size())) + "," +
           format_double(percentile(vals, 50.0)) + "," + format_double(percentile(vals, 5.0)) +
           "," + format_double(percentile(vals, 95.0)) + "\n";
  }
  return csv;
}

}  // namespace qst
