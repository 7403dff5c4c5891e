#include "vmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vmr {

double temporal_iou(std::pair<double, double> a, std::pair<double, double> b) {
  if (a.first >= a.second || b.first >= b.second)
    throw ValidationError("temporal_iou: degenerate interval");
  const double inter =
      std::min(a.second, b.second) - std::max(a.first, b.first);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.second, b.second) - std::min(a.first, b.first);
  return inter / uni;
}

EvalReport evaluate(const std::vector<PredictionRecord>& predictions,
                    const std::vector<AnnotationRecord>& annotations,
                    const std::vector<double>& thresholds,
                    const std::string& split_name) {
  if (predictions.empty())
    throw ValidationError("evaluate: no predictions");

  std::map<std::pair<std::string, std::string>, const AnnotationRecord*> by_id;
  for (const auto& a : annotations) by_id[{a.video_id, a.query_id}] = &a;
  if (by_id.size() != annotations.size())
    throw ValidationError("evaluate: duplicate annotation ids");

  EvalReport rep;
  rep.split_name = split_name;
  rep.n = static_cast<int>(predictions.size());

  std::map<std::pair<std::string, std::string>, int> seen;
  double iou_sum = 0.0;
  std::map<double, int> above;
  for (double m : thresholds) above[m] = 0;

  std::vector<std::string> unmatched;
  for (const auto& p : predictions) {
    auto it = by_id.find({p.video_id, p.query_id});
    if (it == by_id.end()) {
      unmatched.push_back(p.video_id + "/" + p.query_id);
      continue;
    }
    seen[{p.video_id, p.query_id}] += 1;
    const double iou = temporal_iou({p.pred_s, p.pred_e},
                                    {it->second->tau_s, it->second->tau_e});
    iou_sum += iou;
    for (double m : thresholds)
      if (iou > m) above[m] += 1;
    rep.per_sample.push_back({p.video_id, p.query_id, iou});
  }
  for (const auto& a : annotations)
    if (!seen.count({a.video_id, a.query_id}))
      unmatched.push_back(a.video_id + "/" + a.query_id);
  if (!unmatched.empty()) {
    std::string ids;
    for (const auto& u : unmatched) ids += (ids.empty() ? "" : ", ") + u;
    throw ValidationError("evaluate: unmatched prediction/annotation ids: " +
                          ids);
  }

  rep.miou = 100.0 * iou_sum / rep.n;
  for (double m : thresholds)
    rep.iou_at[m] = 100.0 * above[m] / rep.n;
  return rep;
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "Split";
  if (!reports.empty())
    for (const auto& [m, _] : reports.front().iou_at) {
      std::ostringstream h;
      h << "IoU@" << m;
      out << std::right << std::setw(10) << h.str();
    }
  out << std::right << std::setw(10) << "mIoU" << std::setw(8) << "n" << "\n";
  out << std::string(24 + 10 * (reports.empty() ? 0 : reports.front().iou_at.size()) + 18,
                     '-')
      << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    out << std::left << std::setw(24) << r.split_name;
    for (const auto& [m, v] : r.iou_at) out << std::right << std::setw(10) << v;
    out << std::right << std::setw(10) << r.miou << std::setw(8) << r.n << "\n";
  }
  return out.str();
}

void write_iou_histogram_svg(const std::filesystem::path& path,
                             const EvalReport& report) {
  constexpr int kBins = 10;
  std::vector<int> bins(kBins, 0);
  for (const auto& s : report.per_sample) {
    int b = std::min(kBins - 1, static_cast<int>(s.iou * kBins));
    bins[b] += 1;
  }
  const int peak = std::max(1, *std::max_element(bins.begin(), bins.end()));

  const int w = 440, h = 260, left = 40, bottom = 230, top = 30;
  const double bar_w = (w - left - 20) / static_cast<double>(kBins);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">IoU histogram"
      << (report.split_name.empty() ? "" : " - " + report.split_name)
      << " (n=" << report.n << ")</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << w - 20
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  for (int b = 0; b < kBins; ++b) {
    const double height = (bottom - top) * bins[b] / static_cast<double>(peak);
    out << "<rect x=\"" << left + b * bar_w + 1 << "\" y=\""
        << bottom - height << "\" width=\"" << bar_w - 2 << "\" height=\""
        << height << "\" fill=\"steelblue\"/>\n";
    out << "<text x=\"" << left + b * bar_w + bar_w / 2 - 8 << "\" y=\""
        << bottom + 14 << "\" font-size=\"9\">" << std::fixed
        << std::setprecision(1) << b / static_cast<double>(kBins)
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace vmr
