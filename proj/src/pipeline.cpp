#include "vmr/pipeline.hpp"

#include "vmr/fusion.hpp"
#include "vmr/predictor.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace vmr {

std::vector<PredictionRecord> predict_dataset(Model& model, const Dataset& data,
                                              double alpha) {
  std::vector<PredictionRecord> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    auto pred = model.predict(s.tensors(), alpha);
    auto [ts, te] =
        snippet_span_to_seconds(pred.start_idx, pred.end_idx, s.periods);
    out.push_back({s.video_id, s.query_id, ts, te});
  }
  return out;
}

std::vector<AnnotationRecord> annotations_of(const Dataset& data) {
  std::vector<AnnotationRecord> out;
  out.reserve(data.size());
  for (const auto& s : data)
    out.push_back({s.video_id, s.query_id, s.ann.tau_s, s.ann.tau_e});
  return out;
}

EvalReport evaluate_dataset(Model& model, const Dataset& data, double alpha,
                            const std::string& split_name) {
  return evaluate(predict_dataset(model, data, alpha), annotations_of(data),
                  {0.5, 0.7}, split_name);
}

std::vector<SweepRow> sweep_alpha(Model& model, const Dataset& data,
                                  const std::vector<double>& grid) {
  struct Cached {
    SpanDistributions video;
    SpanDistributions para;
  };
  std::vector<Cached> cache;
  cache.reserve(data.size());
  for (const auto& s : data) {
    auto pred = model.predict(s.tensors(), 0.0);
    cache.push_back({std::move(pred.video), std::move(pred.para)});
  }

  std::vector<SweepRow> rows;
  for (double alpha : grid) {
    std::vector<PredictionRecord> preds;
    preds.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto [ps, pe] = fuse(cache[i].video, cache[i].para, alpha);
      auto [a, b] = decode_span(ps, pe);
      auto [ts, te] = snippet_span_to_seconds(a, b, data[i].periods);
      preds.push_back({data[i].video_id, data[i].query_id, ts, te});
    }
    EvalReport rep = evaluate(preds, annotations_of(data));
    rows.push_back({alpha, rep.iou_at.at(0.5), rep.iou_at.at(0.7), rep.miou});
  }
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "alpha" << std::right << std::setw(10)
      << "IoU@0.5" << std::setw(10) << "IoU@0.7" << std::setw(10) << "mIoU"
      << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.alpha << std::right << std::setw(10)
        << r.iou_05 << std::setw(10) << r.iou_07 << std::setw(10) << r.miou
        << "\n";
  }
  return out.str();
}

void write_sweep_curve_svg(const std::filesystem::path& path,
                           const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw ValidationError("sweep curve: no rows");
  const int w = 440, h = 280, left = 45, right = w - 20, top = 30,
            bottom = h - 40;
  const double a_min = rows.front().alpha, a_max = rows.back().alpha;
  auto x_of = [&](double a) {
    return a_max == a_min
               ? left
               : left + (right - left) * (a - a_min) / (a_max - a_min);
  };
  auto y_of = [&](double pct) { return bottom - (bottom - top) * pct / 100.0; };

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">"
      << "metrics vs fusion weight</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  const char* colors[3] = {"steelblue", "darkorange", "seagreen"};
  const char* labels[3] = {"IoU@0.5", "IoU@0.7", "mIoU"};
  for (int series = 0; series < 3; ++series) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[series]
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) {
      const double v =
          series == 0 ? r.iou_05 : (series == 1 ? r.iou_07 : r.miou);
      out << x_of(r.alpha) << "," << y_of(v) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << right - 70 << "\" y=\"" << top + 16 * series + 10
        << "\" font-size=\"11\" fill=\"" << colors[series] << "\">"
        << labels[series] << "</text>\n";
  }
  for (const auto& r : rows)
    out << "<text x=\"" << x_of(r.alpha) - 8 << "\" y=\"" << bottom + 16
        << "\" font-size=\"10\">" << r.alpha << "</text>\n";
  out << "</svg>\n";
}

}  // namespace vmr
