#pragma once

#include "vmr/dataset.hpp"
#include "vmr/evaluation.hpp"
#include "vmr/model.hpp"

#include <vector>

namespace vmr {

std::vector<PredictionRecord> predict_dataset(Model& model,
                                              const Dataset& data,
                                              double alpha);

std::vector<AnnotationRecord> annotations_of(const Dataset& data);

EvalReport evaluate_dataset(Model& model, const Dataset& data, double alpha,
                            const std::string& split_name);

struct SweepRow {
  double alpha = 0.0;
  double iou_05 = 0.0;
  double iou_07 = 0.0;
  double miou = 0.0;
};

// Branch scores are computed once per sample and re-fused for every alpha
// in the grid (decoded spans are piecewise constant in alpha).
std::vector<SweepRow> sweep_alpha(Model& model, const Dataset& data,
                                  const std::vector<double>& grid);

std::string format_sweep_table(const std::vector<SweepRow>& rows);

// Three metric curves over the alpha grid as a standalone SVG.
void write_sweep_curve_svg(const std::filesystem::path& path,
                           const std::vector<SweepRow>& rows);

}  // namespace vmr
