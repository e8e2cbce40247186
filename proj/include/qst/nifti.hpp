#pragma once

#include <string>

#include "qst/volume.hpp"

namespace qst {

enum class NiftiDatatype : int16_t {
  uint8 = 2,
  int16 = 4,
  int32 = 8,
  float32 = 16,
  float64 = 64,
};

// Single-file NIfTI-1 (.nii / .nii.gz), either endianness. Data is
// returned as float64 with scl_slope/scl_inter applied.
Volume4D read_nifti(const std::string& path);

// Writes .nii (gzip-compressed when the path ends in .gz). Only float32
// and float64 outputs are supported; the affine goes to the sform.
void write_nifti(const Volume4D& vol, const std::string& path,
                 NiftiDatatype datatype = NiftiDatatype::float32);

}  // namespace qst
