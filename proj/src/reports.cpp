#include "texsig/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace texsig::reports {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

json binary_section(const linker::MetricsReport& r) {
  json j;
  j["metrics"] = {{"accuracy", r.metrics.accuracy},
                  {"sensitivity", r.metrics.sensitivity},
                  {"specificity", r.metrics.specificity},
                  {"f1", r.metrics.f1}};
  j["confusion"] = {{"tp", r.metrics.tp}, {"tn", r.metrics.tn},
                    {"fp", r.metrics.fp}, {"fn", r.metrics.fn}};
  j["division_by_zero"] = r.metrics.division_by_zero;
  j["failed_folds"] = r.failed_folds;
  json folds = json::array();
  for (const auto& f : r.folds) {
    if (f.failed) continue;
    folds.push_back({{"case_id", f.case_id},
                     {"true_high", f.true_high},
                     {"predicted_high", f.predicted_high}});
  }
  j["folds"] = std::move(folds);
  if (!r.importance.mean.empty()) {
    json imp;
    imp["mean"] = r.importance.mean;
    imp["sd"] = r.importance.sd;
    imp["top1_freq"] = r.importance.top1_freq;
    imp["top2_freq"] = r.importance.top2_freq;
    imp["top4_freq"] = r.importance.top4_freq;
    j["importance"] = std::move(imp);
  }
  return j;
}

json lasso_section(const linker::MetricsReport& r) {
  json j;
  j["spearman"] = r.spearman_grade;
  j["failed_folds"] = r.failed_folds;
  json folds = json::array();
  for (const auto& f : r.folds) {
    if (f.failed) continue;
    folds.push_back({{"case_id", f.case_id},
                     {"true_grade", f.true_grade},
                     {"predicted", f.predicted_grade},
                     {"alpha", f.lasso_alpha}});
  }
  j["folds"] = std::move(folds);
  return j;
}

}  // namespace

void write_metrics_json(const fs::path& path, const linker::MetricsReport* binary,
                        const linker::MetricsReport* lasso) {
  json j;
  if (binary) j["binary_forest"] = binary_section(*binary);
  if (lasso) j["grade_lasso"] = lasso_section(*lasso);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write metrics: " + path.string());
  out << j.dump(2) << "\n";
}

void write_importance_csv(const fs::path& path, const linker::ImportanceStability& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write importance table: " + path.string());
  out << "cluster,mean,sd,top4_freq\n";
  for (std::size_t c = 0; c < s.mean.size(); ++c)
    out << (c + 1) << "," << fmt(s.mean[c]) << "," << fmt(s.sd[c]) << ","
        << fmt(s.top4_freq[c]) << "\n";
}

void write_importance_svg(const fs::path& path, const linker::ImportanceStability& s) {
  const int k = static_cast<int>(s.mean.size());
  const double width = 640, height = 400;
  const double ml = 60, mr = 20, mt = 30, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  double vmax = 0.0;
  for (int c = 0; c < k; ++c) vmax = std::max(vmax, s.mean[c] + s.sd[c]);
  if (vmax <= 0.0) vmax = 1.0;
  vmax *= 1.1;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write importance chart: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << "Random forest feature importance (mean over folds, whiskers = sd)</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = vmax * t / 4.0;
    const double y = mt + ph - ph * t / 4.0;
    out << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(std::round(v * 1000.0) / 1000.0)
        << "</text>\n";
    out << "<line x1=\"" << ml - 3 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
  }
  const double slot = pw / k;
  for (int c = 0; c < k; ++c) {
    const double bw = slot * 0.6;
    const double x = ml + slot * c + (slot - bw) / 2.0;
    const double h = ph * s.mean[c] / vmax;
    out << "<rect x=\"" << x << "\" y=\"" << mt + ph - h << "\" width=\"" << bw
        << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
    const double cx = x + bw / 2.0;
    const double ylo = mt + ph - ph * std::max(0.0, s.mean[c] - s.sd[c]) / vmax;
    const double yhi = mt + ph - ph * std::min(vmax, s.mean[c] + s.sd[c]) / vmax;
    out << "<line x1=\"" << cx << "\" y1=\"" << ylo << "\" x2=\"" << cx << "\" y2=\"" << yhi
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << cx - 4 << "\" y1=\"" << yhi << "\" x2=\"" << cx + 4 << "\" y2=\""
        << yhi << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << cx - 4 << "\" y1=\"" << ylo << "\" x2=\"" << cx + 4 << "\" y2=\""
        << ylo << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << cx << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << (c + 1) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">cluster</text>\n";
  out << "</svg>\n";
}

void write_regression_csv(const fs::path& path,
                          const std::vector<linker::FoldPrediction>& folds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write regression table: " + path.string());
  out << "case_id,true_grade,predicted\n";
  for (const auto& f : folds) {
    if (f.failed) continue;
    out << f.case_id << "," << f.true_grade << "," << fmt(f.predicted_grade) << "\n";
  }
}

void write_regression_svg(const fs::path& path,
                          const std::vector<linker::FoldPrediction>& folds) {
  const double width = 480, height = 420;
  const double ml = 60, mr = 20, mt = 30, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  double lo = 0.0, hi = 3.0;
  for (const auto& f : folds) {
    if (f.failed) continue;
    lo = std::min(lo, f.predicted_grade);
    hi = std::max(hi, f.predicted_grade);
  }
  lo = std::floor(lo - 0.2);
  hi = std::ceil(hi + 0.2);

  auto px = [&](double true_grade) { return ml + pw * (true_grade + 0.5) / 4.0; };
  auto py = [&](double v) { return mt + ph - ph * (v - lo) / (hi - lo); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write regression chart: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << "Held-out grade predictions vs ground truth</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int g = 0; g <= 3; ++g) {
    out << "<text x=\"" << px(g) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << g << "</text>\n";
    if (py(g) >= mt && py(g) <= mt + ph) {
      out << "<line x1=\"" << ml - 3 << "\" y1=\"" << py(g) << "\" x2=\"" << ml << "\" y2=\""
          << py(g) << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << ml - 6 << "\" y=\"" << py(g) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << g << "</text>\n";
    }
    // per-grade mean marker
    double sum = 0.0;
    int cnt = 0;
    for (const auto& f : folds)
      if (!f.failed && f.true_grade == g) {
        sum += f.predicted_grade;
        ++cnt;
      }
    if (cnt > 0)
      out << "<line x1=\"" << px(g) - 14 << "\" y1=\"" << py(sum / cnt) << "\" x2=\""
          << px(g) + 14 << "\" y2=\"" << py(sum / cnt)
          << "\" stroke=\"#c03030\" stroke-width=\"2\"/>\n";
  }
  for (const auto& f : folds) {
    if (f.failed) continue;
    out << "<circle cx=\"" << px(f.true_grade) << "\" cy=\"" << py(f.predicted_grade)
        << "\" r=\"3.5\" fill=\"#4878a8\" fill-opacity=\"0.7\"/>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">true grade</text>\n";
  out << "<text transform=\"translate(16," << mt + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">predicted</text>\n";
  out << "</svg>\n";
}

}  // namespace texsig::reports
