#include "texsig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "texsig/rng.hpp"

namespace texsig::synth {

namespace fs = std::filesystem;

int PhantomSpec::grade_of_case(int case_index) const {
  int acc = 0;
  for (int g = 0; g < 4; ++g) {
    acc += cases_per_grade[g];
    if (case_index < acc) return g;
  }
  throw ConfigError("case index " + std::to_string(case_index) + " outside cohort of " +
                    std::to_string(n_cases()));
}

void PhantomSpec::set_total_cases(int n) {
  if (n < 1) throw ConfigError("cohort size must be >= 1");
  const int base = n / 4, rem = n % 4;
  for (int g = 0; g < 4; ++g) cases_per_grade[g] = base + (g < rem ? 1 : 0);
}

void PhantomSpec::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 1) throw ConfigError("phantom dims must be >= 1");
    if (!(spacing_mm[d] > 0.0)) throw ConfigError("phantom spacing must be > 0");
  }
  if (!(lesion_step > 0.0))
    throw ConfigError("lesion fraction must be strictly increasing in grade");
  for (int g = 0; g < 4; ++g) {
    const double p = lesion_fraction(g);
    if (p < 0.0 || p > 1.0)
      throw ConfigError("lesion fraction p(" + std::to_string(g) + ") = " +
                        std::to_string(p) + " outside [0,1]");
  }
  if (n_cases() < 1) throw ConfigError("cohort is empty");
}

namespace {

// Separable per-slice Gaussian blur, edge-clamped.
void blur_slices(std::vector<double>& field, const std::array<int, 3>& dims, double sigma) {
  const int nx = dims[0], ny = dims[1], nz = dims[2];
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> w(radius + 1);
  double norm = 0.0;
  for (int i = 0; i <= radius; ++i) {
    w[i] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += (i == 0) ? w[i] : 2.0 * w[i];
  }
  for (auto& v : w) v /= norm;

  std::vector<double> tmp(static_cast<std::size_t>(nx) * ny);
  for (int z = 0; z < nz; ++z) {
    double* slice = field.data() + static_cast<std::size_t>(z) * nx * ny;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        double acc = w[0] * slice[y * nx + x];
        for (int i = 1; i <= radius; ++i) {
          const int xl = std::max(0, x - i), xr = std::min(nx - 1, x + i);
          acc += w[i] * (slice[y * nx + xl] + slice[y * nx + xr]);
        }
        tmp[y * nx + x] = acc;
      }
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        double acc = w[0] * tmp[y * nx + x];
        for (int i = 1; i <= radius; ++i) {
          const int yl = std::max(0, y - i), yr = std::min(ny - 1, y + i);
          acc += w[i] * (tmp[yl * nx + x] + tmp[yr * nx + x]);
        }
        slice[y * nx + x] = acc;
      }
  }
}

void standardize(std::vector<double>& field) {
  double sum = 0.0, sum2 = 0.0;
  for (double v : field) {
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(field.size());
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(1e-30, sum2 / n - mean * mean));
  for (auto& v : field) v = (v - mean) / sd;
}

}  // namespace

PhantomCase generate_phantom(const PhantomSpec& spec, int case_index) {
  spec.validate();
  const int grade = spec.grade_of_case(case_index);
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  const std::size_t n_vox = static_cast<std::size_t>(nx) * ny * nz;
  Rng rng(derive_seed(spec.seed, Stream::phantom_case, static_cast<std::uint64_t>(case_index)));

  // ellipsoidal ROI
  io::RoiMask mask;
  mask.dims = spec.dims;
  mask.spacing_mm = spec.spacing_mm;
  mask.values.assign(n_vox, 0);
  const double cx = (nx - 1) / 2.0, cy = (ny - 1) / 2.0, cz = (nz - 1) / 2.0;
  const double rx = 0.40 * nx, ry = 0.40 * ny, rz = 0.42 * nz;
  std::vector<std::array<int, 3>> roi_voxels;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double ex = (x - cx) / rx, ey = (y - cy) / ry, ez = (z - cz) / rz;
        if (ex * ex + ey * ey + ez * ez <= 1.0) {
          mask.values[mask.index(x, y, z)] = 1;
          roi_voxels.push_back({x, y, z});
        }
      }
  const long long roi_count = static_cast<long long>(roi_voxels.size());
  if (roi_count == 0) throw GenerationError("ROI ellipsoid is empty");

  // smooth background field
  std::vector<double> noise(n_vox);
  for (auto& v : noise) v = rng.normal();
  std::vector<double> smooth = noise;
  blur_slices(smooth, spec.dims, spec.background_sigma_px);
  standardize(smooth);

  // lesion blobs up to the grade's target fraction
  PhantomTruth truth;
  truth.dims = spec.dims;
  truth.grade = grade;
  truth.labels.assign(n_vox, 0);
  const double p = spec.lesion_fraction(grade);
  long long lesion = 0;
  if (p >= 1.0 - spec.fraction_tol) {
    for (const auto& v : roi_voxels) truth.labels[mask.index(v[0], v[1], v[2])] = 1;
    lesion = roi_count;
  } else if (p > spec.fraction_tol) {
    const long long lo = static_cast<long long>(std::ceil((p - spec.fraction_tol) * roi_count));
    const long long hi = static_cast<long long>(std::floor((p + spec.fraction_tol) * roi_count));
    long long attempts = 0, rejected_in_row = 0;
    const long long max_attempts = 200000;
    while (lesion < lo) {
      if (++attempts > max_attempts)
        throw GenerationError("could not reach lesion fraction " + std::to_string(p) +
                              " within " + std::to_string(max_attempts) + " blob attempts");
      const auto& c = roi_voxels[rng.uniform_index(roi_voxels.size())];
      double radius_mm = rng.uniform(spec.blob_radius_min_mm, spec.blob_radius_max_mm);
      if (rejected_in_row > 200) radius_mm = 0.0;  // single-voxel fallback near the cap
      double rv[3];
      int lo_box[3], hi_box[3];
      for (int d = 0; d < 3; ++d) {
        rv[d] = std::max(0.0, radius_mm / spec.spacing_mm[d]);
        lo_box[d] = std::max(0, c[d] - static_cast<int>(std::floor(rv[d])));
        hi_box[d] = std::min(spec.dims[d] - 1, c[d] + static_cast<int>(std::floor(rv[d])));
      }
      // gather voxels this blob would add
      std::vector<std::size_t> added;
      for (int z = lo_box[2]; z <= hi_box[2]; ++z)
        for (int y = lo_box[1]; y <= hi_box[1]; ++y)
          for (int x = lo_box[0]; x <= hi_box[0]; ++x) {
            double q = 0.0;
            if (radius_mm > 0.0) {
              const double dx = (x - c[0]) / std::max(rv[0], 1e-9);
              const double dy = (y - c[1]) / std::max(rv[1], 1e-9);
              const double dz = (z - c[2]) / std::max(rv[2], 1e-9);
              q = dx * dx + dy * dy + dz * dz;
            }
            if (q > 1.0) continue;
            const std::size_t idx = mask.index(x, y, z);
            if (mask.values[idx] && !truth.labels[idx]) added.push_back(idx);
          }
      if (lesion + static_cast<long long>(added.size()) > hi) {
        ++rejected_in_row;
        continue;
      }
      rejected_in_row = 0;
      for (std::size_t idx : added) truth.labels[idx] = 1;
      lesion += static_cast<long long>(added.size());
    }
  }
  truth.lesion_fraction = static_cast<double>(lesion) / static_cast<double>(roi_count);

  // assemble intensities
  io::Volume vol;
  vol.dims = spec.dims;
  vol.spacing_mm = spec.spacing_mm;
  vol.voxels.resize(n_vox);
  const double theta = spec.stripe_angle_deg * M_PI / 180.0;
  const double fx = spec.stripe_freq * std::cos(theta);
  const double fy = spec.stripe_freq * std::sin(theta);
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const std::size_t idx = vol.index(x, y, z);
        double v;
        if (mask.values[idx]) {
          v = 0.5 + spec.background_amp * smooth[idx];
          if (truth.labels[idx])
            v += spec.stripe_amp * std::sin(2.0 * M_PI * (fx * x + fy * y) + phase);
        } else {
          v = 0.02 + 0.02 * smooth[idx];
        }
        vol.voxels[idx] = static_cast<float>(v);
      }

  return {std::move(vol), std::move(mask), std::move(truth)};
}

double palette_spectral_margin(const PhantomSpec& spec) {
  const int side = 64;
  const int tiles = 8;
  Rng rng(derive_seed(spec.seed, Stream::phantom_case, 0xfeedULL));
  const double theta = spec.stripe_angle_deg * M_PI / 180.0;
  const double fx = spec.stripe_freq * std::cos(theta);
  const double fy = spec.stripe_freq * std::sin(theta);

  auto bin_response = [&](const std::vector<double>& tile) {
    double re = 0.0, im = 0.0;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double a = 2.0 * M_PI * (fx * x + fy * y);
        re += tile[y * side + x] * std::cos(a);
        im -= tile[y * side + x] * std::sin(a);
      }
    const double n = static_cast<double>(side) * side;
    return std::sqrt(re * re + im * im) / n;
  };

  double bg_mean = 0.0, lesion_mean = 0.0;
  for (int t = 0; t < tiles; ++t) {
    std::vector<double> noise(static_cast<std::size_t>(side) * side);
    for (auto& v : noise) v = rng.normal();
    std::vector<double> smooth = noise;
    blur_slices(smooth, {side, side, 1}, spec.background_sigma_px);
    standardize(smooth);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    std::vector<double> bg(noise.size()), lesion(noise.size());
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * side + x;
        bg[i] = 0.5 + spec.background_amp * smooth[i];
        lesion[i] = bg[i] + spec.stripe_amp *
                                std::sin(2.0 * M_PI * (fx * x + fy * y) + phase);
      }
    bg_mean += bin_response(bg);
    lesion_mean += bin_response(lesion);
  }
  return (lesion_mean - bg_mean) / tiles;
}

fs::path generate_cohort(const PhantomSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const double margin = palette_spectral_margin(spec);
  if (margin < spec.spectral_margin)
    throw GenerationError("palette spectral margin " + std::to_string(margin) +
                          " below required " + std::to_string(spec.spectral_margin));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<io::CaseRecord> records;
  for (int i = 0; i < spec.n_cases(); ++i) {
    PhantomCase pc = generate_phantom(spec, i);
    char id[16];
    std::snprintf(id, sizeof(id), "case%03d", i);
    const fs::path vol_path = out_dir / (std::string(id) + ".vol.json");
    const fs::path mask_path = out_dir / (std::string(id) + ".mask.json");
    io::write_volume(vol_path, pc.volume);
    io::write_mask(mask_path, pc.mask);
    {
      const fs::path truth_path = out_dir / ("truth_" + std::string(id) + ".u8");
      std::ofstream out(truth_path, std::ios::binary);
      if (!out) throw IoError("cannot write truth map: " + truth_path.string());
      out.write(reinterpret_cast<const char*>(pc.truth.labels.data()),
                static_cast<std::streamsize>(pc.truth.labels.size()));
    }
    records.push_back({id, vol_path, mask_path, pc.truth.grade});
  }
  const fs::path manifest = out_dir / "manifest.csv";
  io::write_manifest(manifest, records);
  return manifest;
}

void ClusteringScorer::add_window(int truth_label, int cluster) {
  if (truth_label < 0 || cluster < 0) throw ConfigError("labels must be nonnegative");
  if (truth_label + 1 > n_truth_) {
    n_truth_ = truth_label + 1;
    for (auto& r : table_) r.resize(n_truth_, 0);
  }
  if (cluster >= static_cast<int>(table_.size()))
    table_.resize(cluster + 1, std::vector<long long>(n_truth_, 0));
  ++table_[cluster][truth_label];
  ++total_;
}

void ClusteringScorer::add_case(const PhantomTruth& truth, const sig::LabelMap& map) {
  const int wx = map.window_px_x, wy = map.window_px_y;
  for (const auto& w : map.windows) {
    const int x0 = w.cx - wx / 2, y0 = w.cy - wy / 2;
    long long counts[2] = {0, 0};
    for (int y = y0; y < y0 + wy; ++y)
      for (int x = x0; x < x0 + wx; ++x) {
        const std::size_t idx =
            static_cast<std::size_t>(x) +
            static_cast<std::size_t>(truth.dims[0]) *
                (static_cast<std::size_t>(y) + static_cast<std::size_t>(truth.dims[1]) * w.slice);
        ++counts[truth.labels[idx] ? 1 : 0];
      }
    const int majority = counts[1] > counts[0] ? 1 : 0;  // tie -> lower label
    add_window(majority, w.cluster);
  }
}

ClusterScore ClusteringScorer::score() const {
  ClusterScore s;
  if (total_ == 0) return s;
  const double n = static_cast<double>(total_);

  std::vector<double> pc(table_.size(), 0.0), pt(n_truth_, 0.0);
  for (std::size_t c = 0; c < table_.size(); ++c)
    for (std::size_t t = 0; t < table_[c].size(); ++t) {
      pc[c] += table_[c][t];
      pt[t] += table_[c][t];
    }
  double hc = 0.0, ht = 0.0, mi = 0.0, purity = 0.0;
  for (double v : pc)
    if (v > 0) hc -= (v / n) * std::log(v / n);
  for (double v : pt)
    if (v > 0) ht -= (v / n) * std::log(v / n);
  for (std::size_t c = 0; c < table_.size(); ++c) {
    long long best = 0;
    for (std::size_t t = 0; t < table_[c].size(); ++t) {
      const double joint = static_cast<double>(table_[c][t]);
      best = std::max(best, table_[c][t]);
      if (joint > 0) mi += (joint / n) * std::log(joint * n / (pc[c] * pt[t]));
    }
    purity += static_cast<double>(best);
  }
  s.purity = purity / n;
  if (hc <= 0.0 && ht <= 0.0)
    s.nmi = 1.0;  // both partitions trivial, hence identical
  else if (hc <= 0.0 || ht <= 0.0)
    s.nmi = 0.0;
  else
    s.nmi = mi / std::sqrt(hc * ht);
  return s;
}

ClusterScore score_clustering(const PhantomTruth& truth, const sig::LabelMap& map) {
  ClusteringScorer scorer;
  scorer.add_case(truth, map);
  return scorer.score();
}

std::vector<std::uint8_t> read_truth_labels(const fs::path& path,
                                            const std::array<int, 3>& dims) {
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open truth map: " + path.string());
  if (static_cast<std::size_t>(in.tellg()) != n)
    throw FormatError("truth map size mismatch: " + path.string());
  std::vector<std::uint8_t> labels(n);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n));
  return labels;
}

}  // namespace texsig::synth
