#pragma once

#include <filesystem>
#include <vector>

#include "texsig/linker.hpp"

// Report files for the linking stage: metrics.json, importance.csv/.svg
// (per-cluster importance with fold whiskers), regression.csv/.svg
// (held-out grade predictions vs truth).

namespace texsig::reports {

// metrics.json carries one object per task that ran. The binary task's
// "metrics" object holds exactly accuracy, sensitivity, specificity, f1.
void write_metrics_json(const std::filesystem::path& path,
                        const linker::MetricsReport* binary,
                        const linker::MetricsReport* lasso);

// CSV: cluster,mean,sd,top4_freq  (1-based cluster ids)
void write_importance_csv(const std::filesystem::path& path,
                          const linker::ImportanceStability& s);

// Bar chart of mean importance with +-sd whiskers per cluster.
void write_importance_svg(const std::filesystem::path& path,
                          const linker::ImportanceStability& s);

// CSV: case_id,true_grade,predicted
void write_regression_csv(const std::filesystem::path& path,
                          const std::vector<linker::FoldPrediction>& folds);

// Scatter of predicted grade against true grade.
void write_regression_svg(const std::filesystem::path& path,
                          const std::vector<linker::FoldPrediction>& folds);

}  // namespace texsig::reports
