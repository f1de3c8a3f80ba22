#include "texsig/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "texsig/rng.hpp"

namespace texsig::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

fs::path sidecar_path(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".raw");
  return p;
}

json read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open header: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("malformed header " + path.string() + ": " + e.what());
  }
  return j;
}

struct HeaderFields {
  std::array<int, 3> dims;
  std::array<double, 3> spacing;
  std::string dtype;
};

HeaderFields parse_header(const json& j, const fs::path& path) {
  for (const auto& [key, _] : j.items())
    if (key != "dims" && key != "spacing_mm" && key != "dtype")
      throw FormatError("unknown header field '" + key + "' in " + path.string());
  HeaderFields h;
  auto need = [&](const char* field) -> const json& {
    if (!j.contains(field))
      throw FormatError(std::string("missing header field '") + field + "' in " + path.string());
    return j.at(field);
  };
  const json& dims = need("dims");
  const json& spacing = need("spacing_mm");
  h.dtype = need("dtype").get<std::string>();
  if (!dims.is_array() || dims.size() != 3)
    throw FormatError("field 'dims' must be a 3-element array in " + path.string());
  if (!spacing.is_array() || spacing.size() != 3)
    throw FormatError("field 'spacing_mm' must be a 3-element array in " + path.string());
  for (int i = 0; i < 3; ++i) {
    h.dims[i] = dims[i].get<int>();
    h.spacing[i] = spacing[i].get<double>();
    if (h.dims[i] < 1)
      throw FormatError("field 'dims' must be >= 1 in " + path.string());
    if (!(h.spacing[i] > 0.0))
      throw FormatError("field 'spacing_mm' must be > 0 in " + path.string());
  }
  return h;
}

void write_header(const fs::path& path, const std::array<int, 3>& dims,
                  const std::array<double, 3>& spacing, const char* dtype) {
  json j;
  j["dims"] = dims;
  j["spacing_mm"] = spacing;
  j["dtype"] = dtype;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write header: " + path.string());
  out << j.dump() << "\n";
}

std::vector<char> read_raw(const fs::path& path, std::size_t expected_bytes,
                           const fs::path& header_path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open payload: " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != expected_bytes)
    throw FormatError("payload size mismatch for " + header_path.string() + ": header implies " +
                      std::to_string(expected_bytes) + " bytes, file has " + std::to_string(size));
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw IoError("short read on payload: " + path.string());
  return buf;
}

}  // namespace

Volume read_volume(const fs::path& header_path) {
  const HeaderFields h = parse_header(read_header(header_path), header_path);
  if (h.dtype != "f32le")
    throw FormatError("field 'dtype' must be \"f32le\" for volumes in " + header_path.string());
  Volume v;
  v.dims = h.dims;
  v.spacing_mm = h.spacing;
  const std::size_t n = v.voxel_count();
  const auto raw = read_raw(sidecar_path(header_path), n * 4, header_path);
  v.voxels.resize(n);
  std::memcpy(v.voxels.data(), raw.data(), raw.size());
  return v;
}

void write_volume(const fs::path& header_path, const Volume& v) {
  if (v.voxels.size() != v.voxel_count())
    throw ShapeError("volume voxel count does not match dims");
  write_header(header_path, v.dims, v.spacing_mm, "f32le");
  std::ofstream out(sidecar_path(header_path), std::ios::binary);
  if (!out) throw IoError("cannot write payload: " + sidecar_path(header_path).string());
  out.write(reinterpret_cast<const char*>(v.voxels.data()),
            static_cast<std::streamsize>(v.voxels.size() * 4));
}

RoiMask read_mask(const fs::path& header_path) {
  const HeaderFields h = parse_header(read_header(header_path), header_path);
  if (h.dtype != "u8")
    throw FormatError("field 'dtype' must be \"u8\" for masks in " + header_path.string());
  RoiMask m;
  m.dims = h.dims;
  m.spacing_mm = h.spacing;
  const std::size_t n =
      static_cast<std::size_t>(m.dims[0]) * m.dims[1] * m.dims[2];
  const auto raw = read_raw(sidecar_path(header_path), n, header_path);
  m.values.resize(n);
  std::memcpy(m.values.data(), raw.data(), raw.size());
  for (std::size_t i = 0; i < n; ++i)
    if (m.values[i] > 1)
      throw FormatError("mask value " + std::to_string(int(m.values[i])) +
                        " at voxel " + std::to_string(i) + " is not binary in " +
                        header_path.string());
  return m;
}

void write_mask(const fs::path& header_path, const RoiMask& m) {
  const std::size_t n =
      static_cast<std::size_t>(m.dims[0]) * m.dims[1] * m.dims[2];
  if (m.values.size() != n) throw ShapeError("mask value count does not match dims");
  for (std::size_t i = 0; i < n; ++i)
    if (m.values[i] > 1) throw FormatError("mask values must be in {0,1}");
  write_header(header_path, m.dims, m.spacing_mm, "u8");
  std::ofstream out(sidecar_path(header_path), std::ios::binary);
  if (!out) throw IoError("cannot write payload: " + sidecar_path(header_path).string());
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(n));
}

NormStats normalize(Volume& v, const RoiMask& mask) {
  if (mask.dims != v.dims) throw ShapeError("mask dims do not match volume dims");
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    if (!mask.values[i]) continue;
    const double x = v.voxels[i];
    sum += x;
    sum2 += x * x;
    ++n;
  }
  if (n == 0) throw DegenerateDataError("mask has no voxels");
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
  const double std_dev = std::sqrt(var);
  if (std_dev <= 0.0)
    throw DegenerateDataError("constant intensity over mask, cannot normalize");
  for (auto& f : v.voxels) {
    double z = (static_cast<double>(f) - mean) / std_dev;
    z = std::clamp(z, -3.0, 3.0);
    f = static_cast<float>((z + 3.0) / 6.0);
  }
  return {mean, std_dev};
}

std::pair<int, int> native_window_px(double window_mm,
                                     const std::array<double, 3>& spacing) {
  const int wx = static_cast<int>(std::lround(window_mm / spacing[0]));
  const int wy = static_cast<int>(std::lround(window_mm / spacing[1]));
  if (wx < 2 || wy < 2)
    throw ConfigError("window of " + std::to_string(window_mm) +
                      " mm spans fewer than 2 native pixels");
  return {wx, wy};
}

void resample_bilinear(const float* src, int src_w, int src_h, float* dst, int d) {
  if (src_w == d && src_h == d) {
    std::memcpy(dst, src, static_cast<std::size_t>(d) * d * 4);
    return;
  }
  const double fx = static_cast<double>(src_w) / d;
  const double fy = static_cast<double>(src_h) / d;
  for (int y = 0; y < d; ++y) {
    double v = (y + 0.5) * fy - 0.5;
    v = std::clamp(v, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(v);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = v - y0;
    for (int x = 0; x < d; ++x) {
      double u = (x + 0.5) * fx - 0.5;
      u = std::clamp(u, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(u);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = u - x0;
      const double top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
      const double bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
      dst[y * d + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
    }
  }
}

long long mask_count_window(const RoiMask& mask, int x0, int y0, int z, int wx, int wy) {
  long long count = 0;
  for (int y = y0; y < y0 + wy; ++y) {
    const std::uint8_t* row = mask.values.data() + mask.index(x0, y, z);
    for (int x = 0; x < wx; ++x) count += row[x];
  }
  return count;
}

PatchSet extract_patches(const Volume& normalized, const RoiMask& mask,
                         const ExtractParams& params, const std::string& case_id) {
  if (params.n_patches < 1) throw ConfigError("patch count must be >= 1");
  if (params.out_px < 2) throw ConfigError("out_px must be >= 2");
  if (mask.dims != normalized.dims) throw ShapeError("mask dims do not match volume dims");
  const auto [wx, wy] = native_window_px(params.window_mm, normalized.spacing_mm);
  const int nx = normalized.dims[0], ny = normalized.dims[1], nz = normalized.dims[2];
  if (wx > nx || wy > ny)
    throw ConfigError("window does not fit inside the slice: " + std::to_string(wx) + "x" +
                      std::to_string(wy) + " native px vs " + std::to_string(nx) + "x" +
                      std::to_string(ny));

  // per-slice in-mask pixel lists
  std::vector<int> nonempty_slices;
  std::vector<std::vector<std::pair<int, int>>> slice_pixels(nz);
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        if (mask.at(x, y, z)) slice_pixels[z].emplace_back(x, y);
    if (!slice_pixels[z].empty()) nonempty_slices.push_back(z);
  }
  if (nonempty_slices.empty()) throw DegenerateDataError("mask has no voxels");

  PatchSet ps;
  ps.px = params.out_px;
  ps.pixels.reserve(static_cast<std::size_t>(params.n_patches) * params.out_px * params.out_px);

  Rng rng(params.seed);
  std::vector<float> window(static_cast<std::size_t>(wx) * wy);
  std::vector<float> resampled(static_cast<std::size_t>(params.out_px) * params.out_px);
  const long long footprint = static_cast<long long>(wx) * wy;

  long long accepted = 0;
  const long long max_attempts = 100 * params.n_patches;
  for (long long attempt = 0; attempt < max_attempts && accepted < params.n_patches; ++attempt) {
    const int z = nonempty_slices[rng.uniform_index(nonempty_slices.size())];
    const auto& pix = slice_pixels[z];
    const auto [cx, cy] = pix[rng.uniform_index(pix.size())];
    const int x0 = cx - wx / 2, y0 = cy - wy / 2;
    if (x0 < 0 || y0 < 0 || x0 + wx > nx || y0 + wy > ny) continue;
    if (mask_count_window(mask, x0, y0, z, wx, wy) * 10 < footprint * 9) continue;

    for (int y = 0; y < wy; ++y)
      std::memcpy(window.data() + static_cast<std::size_t>(y) * wx,
                  normalized.voxels.data() + normalized.index(x0, y0 + y, z),
                  static_cast<std::size_t>(wx) * 4);
    resample_bilinear(window.data(), wx, wy, resampled.data(), params.out_px);
    ps.pixels.insert(ps.pixels.end(), resampled.begin(), resampled.end());
    ps.provenance.push_back({case_id, z, (cx + 0.5) * normalized.spacing_mm[0],
                             (cy + 0.5) * normalized.spacing_mm[1]});
    ++accepted;
  }
  if (accepted < params.n_patches)
    throw ExtractionError("patch extraction exhausted for case '" + case_id + "': " +
                              std::to_string(accepted) + " of " +
                              std::to_string(params.n_patches) + " patches after " +
                              std::to_string(max_attempts) + " attempts",
                          accepted);
  return ps;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<CaseRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("manifest is empty: " + path.string());
  if (split_csv_row(line) != std::vector<std::string>{"case_id", "volume_path", "mask_path", "grade"})
    throw FormatError("manifest header must be 'case_id,volume_path,mask_path,grade' in " +
                      path.string());
  std::vector<CaseRecord> records;
  std::vector<std::string> seen_ids;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv_row(line);
    if (f.size() != 4)
      throw FormatError("manifest row " + std::to_string(row) + " has " +
                        std::to_string(f.size()) + " fields, expected 4");
    CaseRecord r;
    r.case_id = f[0];
    if (r.case_id.empty())
      throw FormatError("manifest row " + std::to_string(row) + " has empty case_id");
    if (std::find(seen_ids.begin(), seen_ids.end(), r.case_id) != seen_ids.end())
      throw FormatError("duplicate case_id '" + r.case_id + "' at manifest row " +
                        std::to_string(row));
    seen_ids.push_back(r.case_id);
    r.volume_path = base / f[1];
    r.mask_path = base / f[2];
    try {
      std::size_t pos = 0;
      r.grade = std::stoi(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("manifest row " + std::to_string(row) + " grade '" + f[3] +
                        "' is not an integer");
    }
    if (r.grade < 0 || r.grade > 3)
      throw FormatError("manifest row " + std::to_string(row) + " grade " +
                        std::to_string(r.grade) + " outside 0..3");
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& path, const std::vector<CaseRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  const fs::path base = path.parent_path();
  out << "case_id,volume_path,mask_path,grade\n";
  for (const auto& r : records)
    out << r.case_id << "," << fs::relative(r.volume_path, base).generic_string() << ","
        << fs::relative(r.mask_path, base).generic_string() << "," << r.grade << "\n";
}

PatchSet read_patchset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open patch set: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line))
    throw FormatError("patch set missing header line: " + path.string());
  json j;
  try {
    j = json::parse(header_line);
  } catch (const json::exception& e) {
    throw FormatError("malformed patch set header in " + path.string() + ": " + e.what());
  }
  for (const auto& [key, _] : j.items())
    if (key != "count" && key != "px")
      throw FormatError("unknown patch set header field '" + key + "' in " + path.string());
  if (!j.contains("count") || !j.contains("px"))
    throw FormatError("patch set header needs 'count' and 'px' in " + path.string());
  PatchSet ps;
  const long long count = j["count"].get<long long>();
  ps.px = j["px"].get<int>();
  if (count < 0 || ps.px < 2)
    throw FormatError("invalid patch set header values in " + path.string());
  const std::size_t n_vals = static_cast<std::size_t>(count) * ps.px * ps.px;
  ps.pixels.resize(n_vals);
  in.read(reinterpret_cast<char*>(ps.pixels.data()),
          static_cast<std::streamsize>(n_vals * 4));
  if (static_cast<std::size_t>(in.gcount()) != n_vals * 4)
    throw FormatError("patch set payload truncated in " + path.string());
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("patch set payload has trailing bytes in " + path.string());
  return ps;
}

void write_patchset(const fs::path& path, const PatchSet& ps) {
  json j;
  j["count"] = ps.count();
  j["px"] = ps.px;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write patch set: " + path.string());
  out << j.dump() << "\n";
  out.write(reinterpret_cast<const char*>(ps.pixels.data()),
            static_cast<std::streamsize>(ps.pixels.size() * 4));
}

}  // namespace texsig::io
