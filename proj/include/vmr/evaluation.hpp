#pragma once

#include "vmr/errors.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace vmr {

// Interval IoU on the real line; disjoint intervals give 0.
double temporal_iou(std::pair<double, double> a, std::pair<double, double> b);

struct PredictionRecord {
  std::string video_id;
  std::string query_id;
  double pred_s = 0.0;
  double pred_e = 0.0;
};

struct AnnotationRecord {
  std::string video_id;
  std::string query_id;
  double tau_s = 0.0;
  double tau_e = 0.0;
};

struct EvalReport {
  std::string split_name;
  std::map<double, double> iou_at;  // threshold -> percentage
  double miou = 0.0;                // percentage
  int n = 0;
  struct PerSample {
    std::string video_id;
    std::string query_id;
    double iou = 0.0;
  };
  std::vector<PerSample> per_sample;
};

// IoU@m uses strict inequality ("larger than m"); ties at the threshold do
// not count.
EvalReport evaluate(const std::vector<PredictionRecord>& predictions,
                    const std::vector<AnnotationRecord>& annotations,
                    const std::vector<double>& thresholds = {0.5, 0.7},
                    const std::string& split_name = "");

std::string format_report_table(const std::vector<EvalReport>& reports);

// Ten-bin histogram of per-sample IoUs as a standalone SVG.
void write_iou_histogram_svg(const std::filesystem::path& path,
                             const EvalReport& report);

}  // namespace vmr
