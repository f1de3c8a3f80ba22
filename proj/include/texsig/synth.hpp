#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "texsig/signature.hpp"
#include "texsig/volume_io.hpp"

// Texture phantoms with known composition: an ellipsoidal ROI filled with a
// smooth background texture, plus a high-frequency stripe texture painted in
// random blobs covering a grade-dependent fraction of the ROI.

namespace texsig::synth {

struct PhantomSpec {
  std::array<int, 3> dims{96, 96, 40};
  std::array<double, 3> spacing_mm{0.4375, 0.4375, 3.0};
  std::array<int, 4> cases_per_grade{10, 10, 10, 10};

  // lesion fraction per grade: p(g) = lesion_base + lesion_step * g
  double lesion_base = 0.2;
  double lesion_step = 0.2;
  double fraction_tol = 0.02;

  // palette
  double background_amp = 0.08;
  double background_sigma_px = 2.0;
  double stripe_amp = 0.12;
  double stripe_freq = 0.25;  // cycles per native pixel
  double stripe_angle_deg = 45.0;
  double blob_radius_min_mm = 2.5;
  double blob_radius_max_mm = 4.5;
  double spectral_margin = 0.02;

  std::uint64_t seed = 42;

  int n_cases() const {
    return cases_per_grade[0] + cases_per_grade[1] + cases_per_grade[2] + cases_per_grade[3];
  }
  double lesion_fraction(int grade) const { return lesion_base + lesion_step * grade; }
  int grade_of_case(int case_index) const;
  void set_total_cases(int n);  // n/4 per grade, remainder to the lowest grades
  void validate() const;
};

struct PhantomTruth {
  std::array<int, 3> dims{};
  std::vector<std::uint8_t> labels;  // 0 background, 1 lesion; x-fastest
  int grade = 0;
  double lesion_fraction = 0.0;  // achieved, inside the ROI
};

struct PhantomCase {
  io::Volume volume;
  io::RoiMask mask;
  PhantomTruth truth;
};

// Deterministic per (spec.seed, case_index).
PhantomCase generate_phantom(const PhantomSpec& spec, int case_index);

// Writes case<idx>.vol.json/.raw, case<idx>.mask.json/.raw, truth_case<idx>.u8
// and manifest.csv into out_dir. Returns the manifest path.
std::filesystem::path generate_cohort(const PhantomSpec& spec,
                                      const std::filesystem::path& out_dir);

// Mean single-bin spectral response difference between the lesion and
// background textures at the stripe frequency; generation rejects palettes
// where this drops below spec.spectral_margin.
double palette_spectral_margin(const PhantomSpec& spec);

struct ClusterScore {
  double nmi = 0.0;
  double purity = 0.0;
};

// Agreement between predicted window clusters and ground-truth texture
// labels. Each window carries the majority truth label over its footprint
// (ties to the lower label). NMI uses the sqrt normalization.
class ClusteringScorer {
public:
  void add_case(const PhantomTruth& truth, const sig::LabelMap& map);
  void add_window(int truth_label, int cluster);
  ClusterScore score() const;

private:
  std::vector<std::vector<long long>> table_;  // [cluster][truth], rectangular
  int n_truth_ = 0;
  long long total_ = 0;
};

ClusterScore score_clustering(const PhantomTruth& truth, const sig::LabelMap& map);

std::vector<std::uint8_t> read_truth_labels(const std::filesystem::path& path,
                                            const std::array<int, 3>& dims);

}  // namespace texsig::synth
