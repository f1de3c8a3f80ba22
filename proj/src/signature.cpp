#include "texsig/signature.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace texsig::sig {

namespace {

struct Candidate {
  int x0, y0, z;
};

}  // namespace

std::pair<Signature, LabelMap> compute_signature(const dcn::DcnModel& model,
                                                 const io::Volume& normalized,
                                                 const io::RoiMask& mask,
                                                 const SigParams& params,
                                                 const std::string& case_id) {
  if (params.stride_px < 1) throw ConfigError("stride_px must be >= 1");
  if (mask.dims != normalized.dims) throw ShapeError("mask dims do not match volume dims");
  if (params.out_px != model.params.arch.in_px)
    throw ShapeError("out_px does not match the network input size");
  const auto [wx, wy] = io::native_window_px(params.window_mm, normalized.spacing_mm);
  const int nx = normalized.dims[0], ny = normalized.dims[1], nz = normalized.dims[2];
  const long long footprint = static_cast<long long>(wx) * wy;

  std::vector<Candidate> accepted;
  for (int z = 0; z < nz; ++z)
    for (int y0 = 0; y0 + wy <= ny; y0 += params.stride_px)
      for (int x0 = 0; x0 + wx <= nx; x0 += params.stride_px)
        if (io::mask_count_window(mask, x0, y0, z, wx, wy) * 10 >= footprint * 9)
          accepted.push_back({x0, y0, z});
  if (accepted.empty())
    throw EmptyRoiError("no accepted windows inside the ROI for case '" + case_id + "'");

  const int latent = model.params.arch.latent;
  const std::size_t n = accepted.size();
  std::vector<int> clusters(n);

  auto encode_window = [&](std::size_t i, net::Workspace<float>& ws,
                           std::vector<float>& window, std::vector<float>& patch) {
    const auto& c = accepted[i];
    for (int y = 0; y < wy; ++y)
      std::memcpy(window.data() + static_cast<std::size_t>(y) * wx,
                  normalized.voxels.data() + normalized.index(c.x0, c.y0 + y, c.z),
                  static_cast<std::size_t>(wx) * 4);
    io::resample_bilinear(window.data(), wx, wy, patch.data(), params.out_px);
    net::encode(model.params, patch.data(), ws);
    clusters[i] = dcn::nearest_centroid(ws.lat.data(), model.centroids.data(), model.k, latent);
  };

  if (params.parallel) {
#ifdef _OPENMP
#pragma omp parallel
    {
      net::Workspace<float> ws(model.params.arch);
      std::vector<float> window(static_cast<std::size_t>(wx) * wy);
      std::vector<float> patch(static_cast<std::size_t>(params.out_px) * params.out_px);
#pragma omp for schedule(dynamic, 16)
      for (long long i = 0; i < static_cast<long long>(n); ++i)
        encode_window(static_cast<std::size_t>(i), ws, window, patch);
    }
#else
    net::Workspace<float> ws(model.params.arch);
    std::vector<float> window(static_cast<std::size_t>(wx) * wy);
    std::vector<float> patch(static_cast<std::size_t>(params.out_px) * params.out_px);
    for (std::size_t i = 0; i < n; ++i) encode_window(i, ws, window, patch);
#endif
  } else {
    net::Workspace<float> ws(model.params.arch);
    std::vector<float> window(static_cast<std::size_t>(wx) * wy);
    std::vector<float> patch(static_cast<std::size_t>(params.out_px) * params.out_px);
    for (std::size_t i = 0; i < n; ++i) encode_window(i, ws, window, patch);
  }

  Signature s;
  s.case_id = case_id;
  s.window_count = static_cast<long long>(n);
  std::vector<long long> counts(model.k, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[clusters[i]];
  s.proportions.resize(model.k);
  for (int c = 0; c < model.k; ++c)
    s.proportions[c] = static_cast<double>(counts[c]) / static_cast<double>(n);

  LabelMap lm;
  lm.case_id = case_id;
  lm.window_px_x = wx;
  lm.window_px_y = wy;
  lm.windows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    lm.windows.push_back({accepted[i].z, accepted[i].x0 + wx / 2, accepted[i].y0 + wy / 2,
                          clusters[i]});
  return {std::move(s), std::move(lm)};
}

ManifestSignatures signatures_for_manifest(const dcn::DcnModel& model,
                                           const std::vector<io::CaseRecord>& manifest,
                                           const SigParams& params) {
  ManifestSignatures out;
  std::vector<std::string> failures;
  for (const auto& rec : manifest) {
    try {
      io::Volume vol = io::read_volume(rec.volume_path);
      const io::RoiMask mask = io::read_mask(rec.mask_path);
      io::normalize(vol, mask);
      auto [sig, lm] = compute_signature(model, vol, mask, params, rec.case_id);
      sig.grade = rec.grade;
      out.signatures.push_back(std::move(sig));
      out.label_maps.push_back(std::move(lm));
    } catch (const std::exception& e) {
      failures.push_back(rec.case_id + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " case(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

void write_signature_table(const std::filesystem::path& path,
                           const std::vector<Signature>& signatures) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write signature table: " + path.string());
  const int k = signatures.empty() ? 0 : static_cast<int>(signatures.front().proportions.size());
  out << "case_id,grade,window_count";
  for (int c = 1; c <= k; ++c) out << ",c" << c;
  out << "\n";
  for (const auto& s : signatures) {
    out << s.case_id << "," << s.grade << "," << s.window_count;
    for (double p : s.proportions) out << "," << fmt_double(p);
    out << "\n";
  }
}

std::vector<Signature> read_signature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open signature table: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("signature table is empty: " + path.string());
  std::vector<Signature> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 4)
      throw FormatError("signature table row " + std::to_string(row) + " is too short");
    Signature s;
    s.case_id = fields[0];
    s.grade = std::stoi(fields[1]);
    s.window_count = std::stoll(fields[2]);
    for (std::size_t i = 3; i < fields.size(); ++i) s.proportions.push_back(std::stod(fields[i]));
    out.push_back(std::move(s));
  }
  return out;
}

void write_label_maps(const std::filesystem::path& path,
                      const std::vector<LabelMap>& maps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write label map: " + path.string());
  out << "case_id,slice,cx_px,cy_px,cluster\n";
  for (const auto& lm : maps)
    for (const auto& w : lm.windows)
      out << lm.case_id << "," << w.slice << "," << w.cx << "," << w.cy << "," << w.cluster
          << "\n";
}

}  // namespace texsig::sig
