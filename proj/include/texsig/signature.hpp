#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "texsig/dcn.hpp"
#include "texsig/volume_io.hpp"

// Per-case cluster-proportion signatures: slide a window over the masked ROI,
// encode each accepted window, assign it to its nearest centroid, and report
// the normalized cluster counts (a bag-of-visual-words style descriptor).

namespace texsig::sig {

struct Signature {
  std::string case_id;
  int grade = -1;                   // carried from the manifest, -1 if unknown
  long long window_count = 0;
  std::vector<double> proportions;  // length k, nonnegative, sums to 1
};

struct WindowLabel {
  int slice = 0;
  int cx = 0, cy = 0;  // window center, native pixels
  int cluster = 0;
};

struct LabelMap {
  std::string case_id;
  int window_px_x = 0, window_px_y = 0;  // native footprint of each window
  std::vector<WindowLabel> windows;
};

struct SigParams {
  double window_mm = 14.0;
  int out_px = 32;
  int stride_px = 8;
  bool parallel = true;
};

// Windows use the same physical size, resampling, and 90% in-mask rule as
// training extraction. Counting is an order-free reduction, so results are
// identical at any thread count.
std::pair<Signature, LabelMap> compute_signature(const dcn::DcnModel& model,
                                                 const io::Volume& normalized,
                                                 const io::RoiMask& mask,
                                                 const SigParams& params,
                                                 const std::string& case_id);

// One signature per manifest case, in manifest order. Per-case failures are
// collected; if any case fails the whole run fails with every failure listed.
struct ManifestSignatures {
  std::vector<Signature> signatures;
  std::vector<LabelMap> label_maps;
};
ManifestSignatures signatures_for_manifest(const dcn::DcnModel& model,
                                           const std::vector<io::CaseRecord>& manifest,
                                           const SigParams& params);

// CSV: case_id,grade,window_count,c1,...,ck
void write_signature_table(const std::filesystem::path& path,
                           const std::vector<Signature>& signatures);
std::vector<Signature> read_signature_table(const std::filesystem::path& path);

// CSV: case_id,slice,cx_px,cy_px,cluster
void write_label_maps(const std::filesystem::path& path,
                      const std::vector<LabelMap>& maps);

}  // namespace texsig::sig
