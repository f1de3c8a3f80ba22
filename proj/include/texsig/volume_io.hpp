#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "texsig/errors.hpp"

// Volumes, ROI masks, case manifests, and physically sized patch extraction.
//
// On-disk formats:
//   Volume  — JSON header {"dims":[nx,ny,nz],"spacing_mm":[sx,sy,sz],
//             "dtype":"f32le"} at <path>; raw little-endian f32 payload,
//             x-fastest, in the sidecar <path with extension .raw>.
//   Mask    — same, "dtype":"u8", values restricted to {0,1}.
//   Manifest — CSV `case_id,volume_path,mask_path,grade`, paths relative to
//             the manifest's directory.
//   PatchSet — single file: one JSON header line {"count":N,"px":P}, then
//             N*P*P little-endian f32 values.

namespace texsig::io {

struct Volume {
  std::array<int, 3> dims{};           // nx, ny, nz
  std::array<double, 3> spacing_mm{};  // sx, sy, sz
  std::vector<float> voxels;           // x-fastest

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
  }
  float at(int x, int y, int z) const { return voxels[index(x, y, z)]; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
};

struct RoiMask {
  std::array<int, 3> dims{};
  std::array<double, 3> spacing_mm{};
  std::vector<std::uint8_t> values;  // {0,1}

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
  }
  bool at(int x, int y, int z) const { return values[index(x, y, z)] != 0; }
};

struct CaseRecord {
  std::string case_id;
  std::filesystem::path volume_path;
  std::filesystem::path mask_path;
  int grade = 0;  // 0..3
};

struct PatchProvenance {
  std::string case_id;
  int slice = 0;
  double center_x_mm = 0.0, center_y_mm = 0.0;
};

struct CaseStats {
  std::string case_id;
  double mean = 0.0, std_dev = 0.0;
};

// Contiguous patch storage: patch i occupies pixels [i*px*px, (i+1)*px*px).
struct PatchSet {
  int px = 32;
  std::vector<float> pixels;
  std::vector<PatchProvenance> provenance;  // in-memory only
  std::vector<CaseStats> stats;             // in-memory only

  std::size_t count() const {
    return pixels.empty() ? 0 : pixels.size() / (static_cast<std::size_t>(px) * px);
  }
  const float* patch(std::size_t i) const {
    return pixels.data() + i * static_cast<std::size_t>(px) * px;
  }
};

Volume read_volume(const std::filesystem::path& header_path);
void write_volume(const std::filesystem::path& header_path, const Volume& v);
RoiMask read_mask(const std::filesystem::path& header_path);
void write_mask(const std::filesystem::path& header_path, const RoiMask& m);

// z-score over masked voxels only, clamp to +-3, map [-3,3] -> [0,1].
// Returns the in-ROI (mean, std). Constant masked region is degenerate.
struct NormStats {
  double mean = 0.0, std_dev = 0.0;
};
NormStats normalize(Volume& v, const RoiMask& mask);

struct ExtractParams {
  long long n_patches = 0;
  double window_mm = 14.0;
  int out_px = 32;
  std::uint64_t seed = 0;
};

// Draws axial square windows of physical side window_mm at uniformly random
// in-mask centers (slice uniform among nonempty slices, then center uniform
// among that slice's in-mask pixels). A candidate is accepted iff at least
// 90% of its native footprint is inside the mask; accepted windows are
// bilinearly resampled to out_px x out_px. Gives up after 100*n attempts.
PatchSet extract_patches(const Volume& normalized, const RoiMask& mask,
                         const ExtractParams& params, const std::string& case_id);

std::vector<CaseRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<CaseRecord>& records);

PatchSet read_patchset(const std::filesystem::path& path);
void write_patchset(const std::filesystem::path& path, const PatchSet& ps);

// Native window side lengths in pixels for a physical window size.
std::pair<int, int> native_window_px(double window_mm, const std::array<double, 3>& spacing);

// Bilinear resample of a src_w x src_h tile to dst x dst, edge-clamped.
// Exact identity when src and dst sizes match.
void resample_bilinear(const float* src, int src_w, int src_h, float* dst, int dst);

// In-mask pixel count over a window footprint on one slice.
long long mask_count_window(const RoiMask& mask, int x0, int y0, int z, int wx, int wy);

}  // namespace texsig::io
