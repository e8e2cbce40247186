#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace qst {

// Dense 4-D scalar volume, x-fastest ordering. nv = 1 for scalar maps.
// The affine (row-major 4x4) is stored and passed through to outputs.
struct Volume4D {
  std::array<int64_t, 4> dims{0, 0, 0, 0};       // nx, ny, nz, nv
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};  // [mm]
  std::array<double, 16> affine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  std::vector<double> data;

  int64_t nx() const { return dims[0]; }
  int64_t ny() const { return dims[1]; }
  int64_t nz() const { return dims[2]; }
  int64_t nv() const { return dims[3]; }
  int64_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }

  size_t index(int64_t x, int64_t y, int64_t z, int64_t v = 0) const {
    return static_cast<size_t>(x + dims[0] * (y + dims[1] * (z + dims[2] * v)));
  }
  double& at(int64_t x, int64_t y, int64_t z, int64_t v = 0) { return data[index(x, y, z, v)]; }
  double at(int64_t x, int64_t y, int64_t z, int64_t v = 0) const { return data[index(x, y, z, v)]; }

  static Volume4D create(int64_t nx, int64_t ny, int64_t nz, int64_t nv, double fill = 0.0) {
    Volume4D v;
    v.dims = {nx, ny, nz, nv};
    v.data.assign(static_cast<size_t>(nx * ny * nz * nv), fill);
    v.affine = {v.voxel_size[0], 0, 0, 0, 0, v.voxel_size[1], 0, 0,
                0, 0, v.voxel_size[2], 0, 0, 0, 0, 1};
    return v;
  }

  void set_voxel_size(double sx, double sy, double sz) {
    voxel_size = {sx, sy, sz};
    affine = {sx, 0, 0, 0, 0, sy, 0, 0, 0, 0, sz, 0, 0, 0, 0, 1};
  }
};

// Voxel mask; empty accepts everything.
struct Mask {
  std::array<int64_t, 3> dims{0, 0, 0};
  std::vector<uint8_t> inside;

  bool empty() const { return inside.empty(); }
  bool operator()(int64_t x, int64_t y, int64_t z) const {
    if (empty()) return true;
    return inside[static_cast<size_t>(x + dims[0] * (y + dims[1] * z))] != 0;
  }
  static Mask from_volume(const Volume4D& v) {
    Mask m;
    m.dims = {v.dims[0], v.dims[1], v.dims[2]};
    m.inside.resize(static_cast<size_t>(v.n_voxels()));
    for (int64_t i = 0; i < v.n_voxels(); ++i)
      m.inside[static_cast<size_t>(i)] = v.data[static_cast<size_t>(i)] != 0.0 ? 1 : 0;
    return m;
  }
};

}  // namespace qst
