#include "qst/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "qst/errors.hpp"
#include "qst/version.hpp"

namespace qst {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
T byteswap(T v) {
  unsigned char* p = reinterpret_cast<unsigned char*>(&v);
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
  return v;
}

void swap_header(Nifti1Header& h) {
  h.sizeof_hdr = byteswap(h.sizeof_hdr);
  h.extents = byteswap(h.extents);
  h.session_error = byteswap(h.session_error);
  for (auto& d : h.dim) d = byteswap(d);
  h.intent_p1 = byteswap(h.intent_p1);
  h.intent_p2 = byteswap(h.intent_p2);
  h.intent_p3 = byteswap(h.intent_p3);
  h.intent_code = byteswap(h.intent_code);
  h.datatype = byteswap(h.datatype);
  h.bitpix = byteswap(h.bitpix);
  h.slice_start = byteswap(h.slice_start);
  for (auto& p : h.pixdim) p = byteswap(p);
  h.vox_offset = byteswap(h.vox_offset);
  h.scl_slope = byteswap(h.scl_slope);
  h.scl_inter = byteswap(h.scl_inter);
  h.slice_end = byteswap(h.slice_end);
  h.cal_max = byteswap(h.cal_max);
  h.cal_min = byteswap(h.cal_min);
  h.slice_duration = byteswap(h.slice_duration);
  h.toffset = byteswap(h.toffset);
  h.glmax = byteswap(h.glmax);
  h.glmin = byteswap(h.glmin);
  h.qform_code = byteswap(h.qform_code);
  h.sform_code = byteswap(h.sform_code);
  h.quatern_b = byteswap(h.quatern_b);
  h.quatern_c = byteswap(h.quatern_c);
  h.quatern_d = byteswap(h.quatern_d);
  h.qoffset_x = byteswap(h.qoffset_x);
  h.qoffset_y = byteswap(h.qoffset_y);
  h.qoffset_z = byteswap(h.qoffset_z);
  for (auto& v : h.srow_x) v = byteswap(v);
  for (auto& v : h.srow_y) v = byteswap(v);
  for (auto& v : h.srow_z) v = byteswap(v);
}

template <typename T>
void decode(const std::vector<char>& raw, bool swapped, std::vector<double>& out) {
  const size_t n = raw.size() / sizeof(T);
  out.resize(n);
  const T* src = reinterpret_cast<const T*>(raw.data());
  for (size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, src + i, sizeof(T));
    if (swapped) v = byteswap(v);
    out[i] = static_cast<double>(v);
  }
}

int bytes_per_element(int16_t datatype) {
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::uint8: return 1;
    case NiftiDatatype::int16: return 2;
    case NiftiDatatype::int32: return 4;
    case NiftiDatatype::float32: return 4;
    case NiftiDatatype::float64: return 8;
  }
  return 0;
}

}  // namespace

Volume4D read_nifti(const std::string& path) {
  // gzopen reads plain files transparently, so one code path covers both.
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open " + path);
  struct Closer {
    gzFile f;
    ~Closer() { gzclose(f); }
  } closer{f};

  Nifti1Header hdr;
  if (gzread(f, &hdr, sizeof(hdr)) != static_cast<int>(sizeof(hdr)))
    throw DataError(path + ": truncated NIfTI header");

  bool swapped = false;
  if (hdr.sizeof_hdr != 348) {
    swap_header(hdr);
    swapped = true;
    if (hdr.sizeof_hdr != 348)
      throw DataError(path + ": not a NIfTI-1 file (sizeof_hdr != 348)");
  }
  if (std::memcmp(hdr.magic, "n+1", 4) != 0) {
    if (std::memcmp(hdr.magic, "ni1", 4) == 0)
      throw DataError(path + ": two-file NIfTI (magic \"ni1\") is not supported");
    throw DataError(path + ": bad magic bytes '" +
                    std::string(hdr.magic, hdr.magic + 3) + "' (expected \"n+1\")");
  }

  const int ndim = hdr.dim[0];
  if (ndim < 1 || ndim > 7) throw DataError(path + ": invalid dim[0]");
  int64_t dims[4] = {1, 1, 1, 1};
  for (int i = 0; i < 4 && i < ndim; ++i) {
    dims[i] = hdr.dim[i + 1];
    if (dims[i] < 1) throw DataError(path + ": non-positive dimension");
  }
  for (int i = 4; i < ndim; ++i)
    if (hdr.dim[i + 1] > 1)
      throw DataError(path + ": more than 4 non-trivial dimensions");

  const int bpe = bytes_per_element(hdr.datatype);
  if (bpe == 0)
    throw DataError(path + ": unsupported datatype code " + std::to_string(hdr.datatype));

  const int64_t offset = static_cast<int64_t>(hdr.vox_offset);
  if (offset < 348) throw DataError(path + ": vox_offset before end of header");
  if (gzseek(f, offset, SEEK_SET) < 0) throw DataError(path + ": cannot seek to data");

  const int64_t n_elem = dims[0] * dims[1] * dims[2] * dims[3];
  std::vector<char> raw(static_cast<size_t>(n_elem) * bpe);
  int64_t got = 0;
  while (got < static_cast<int64_t>(raw.size())) {
    const int chunk = static_cast<int>(
        std::min<int64_t>(raw.size() - got, std::numeric_limits<int>::max() / 2));
    const int r = gzread(f, raw.data() + got, chunk);
    if (r <= 0) throw DataError(path + ": truncated data section");
    got += r;
  }

  Volume4D vol;
  vol.dims = {dims[0], dims[1], dims[2], dims[3]};
  vol.voxel_size = {hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3]};
  switch (static_cast<NiftiDatatype>(hdr.datatype)) {
    case NiftiDatatype::uint8: decode<uint8_t>(raw, false, vol.data); break;
    case NiftiDatatype::int16: decode<int16_t>(raw, swapped, vol.data); break;
    case NiftiDatatype::int32: decode<int32_t>(raw, swapped, vol.data); break;
    case NiftiDatatype::float32: decode<float>(raw, swapped, vol.data); break;
    case NiftiDatatype::float64: decode<double>(raw, swapped, vol.data); break;
  }

  // scl_slope = 0 means "no scaling" by convention.
  if (hdr.scl_slope != 0.0f && !(hdr.scl_slope == 1.0f && hdr.scl_inter == 0.0f)) {
    for (double& v : vol.data)
      v = v * static_cast<double>(hdr.scl_slope) + static_cast<double>(hdr.scl_inter);
  }

  if (hdr.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      vol.affine[0 * 4 + c] = hdr.srow_x[c];
      vol.affine[1 * 4 + c] = hdr.srow_y[c];
      vol.affine[2 * 4 + c] = hdr.srow_z[c];
      vol.affine[3 * 4 + c] = (c == 3) ? 1.0 : 0.0;
    }
  } else {
    vol.affine = {vol.voxel_size[0], 0, 0, 0, 0, vol.voxel_size[1], 0, 0,
                  0, 0, vol.voxel_size[2], 0, 0, 0, 0, 1};
  }
  return vol;
}

void write_nifti(const Volume4D& vol, const std::string& path, NiftiDatatype datatype) {
  if (datatype != NiftiDatatype::float32 && datatype != NiftiDatatype::float64)
    throw DataError("write_nifti: only float32/float64 outputs are supported");
  if (vol.data.size() != static_cast<size_t>(vol.dims[0] * vol.dims[1] * vol.dims[2] * vol.dims[3]))
    throw DataError("write_nifti: data length does not match dims");

  Nifti1Header hdr;
  std::memset(&hdr, 0, sizeof(hdr));
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  const bool is4d = vol.dims[3] > 1;
  hdr.dim[0] = is4d ? 4 : 3;
  hdr.dim[1] = static_cast<int16_t>(vol.dims[0]);
  hdr.dim[2] = static_cast<int16_t>(vol.dims[1]);
  hdr.dim[3] = static_cast<int16_t>(vol.dims[2]);
  hdr.dim[4] = static_cast<int16_t>(is4d ? vol.dims[3] : 1);
  for (int i = 5; i < 8; ++i) hdr.dim[i] = 1;
  hdr.datatype = static_cast<int16_t>(datatype);
  hdr.bitpix = static_cast<int16_t>(bytes_per_element(hdr.datatype) * 8);
  hdr.pixdim[0] = 1.0f;
  hdr.pixdim[1] = static_cast<float>(vol.voxel_size[0]);
  hdr.pixdim[2] = static_cast<float>(vol.voxel_size[1]);
  hdr.pixdim[3] = static_cast<float>(vol.voxel_size[2]);
  hdr.pixdim[4] = 1.0f;
  hdr.vox_offset = 352.0f;
  hdr.scl_slope = 1.0f;
  hdr.scl_inter = 0.0f;
  hdr.xyzt_units = 2;  // NIFTI_UNITS_MM
  std::snprintf(hdr.descrip, sizeof(hdr.descrip), "qstretch %s", kVersion);
  hdr.sform_code = 1;
  hdr.qform_code = 0;
  for (int c = 0; c < 4; ++c) {
    hdr.srow_x[c] = static_cast<float>(vol.affine[0 * 4 + c]);
    hdr.srow_y[c] = static_cast<float>(vol.affine[1 * 4 + c]);
    hdr.srow_z[c] = static_cast<float>(vol.affine[2 * 4 + c]);
  }
  std::memcpy(hdr.magic, "n+1", 4);

  std::vector<char> payload;
  if (datatype == NiftiDatatype::float32) {
    payload.resize(vol.data.size() * sizeof(float));
    float* dst = reinterpret_cast<float*>(payload.data());
    for (size_t i = 0; i < vol.data.size(); ++i) dst[i] = static_cast<float>(vol.data[i]);
  } else {
    payload.resize(vol.data.size() * sizeof(double));
    std::memcpy(payload.data(), vol.data.data(), payload.size());
  }

  const char pad[4] = {0, 0, 0, 0};  // no header extensions
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open " + path + " for writing");
    bool ok = gzwrite(f, &hdr, sizeof(hdr)) == static_cast<int>(sizeof(hdr)) &&
              gzwrite(f, pad, 4) == 4;
    size_t written = 0;
    while (ok && written < payload.size()) {
      const int chunk = static_cast<int>(std::min<size_t>(payload.size() - written, 1 << 28));
      const int r = gzwrite(f, payload.data() + written, chunk);
      ok = r == chunk;
      written += static_cast<size_t>(std::max(r, 0));
    }
    gzclose(f);
    if (!ok) throw DataError("short write to " + path);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
    out.write(pad, 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("short write to " + path);
  }
}

}  // namespace qst
