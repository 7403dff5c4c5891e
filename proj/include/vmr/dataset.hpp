#pragma once

#include "vmr/model.hpp"
#include "vmr/narration.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vmr {

// One video-query pair ready for the model: features on the snippet grid,
// aligned narrative paragraph, embedded query, expanded labels.
struct PreparedSample {
  std::string video_id;
  std::string query_id;
  nn::Mat video;  // [L x d_v]
  nn::Mask vmask;
  std::vector<SnippetPeriod> periods;
  double duration = 0.0;
  nn::Mat paragraph;  // [L x d_c]
  nn::Mat query;      // [Lq x d_w]
  nn::Mask qmask;
  MomentAnnotation ann;

  SampleTensors tensors() const {
    SampleTensors t;
    t.video = &video;
    t.paragraph = &paragraph;
    t.query = &query;
    t.vmask = vmask;
    t.qmask = qmask;
    return t;
  }
};

using Dataset = std::vector<PreparedSample>;

// Loads features, narration caches, and queries for every manifest entry.
// Narration caches must already be populated (run narrate first).
Dataset prepare_dataset(const DatasetManifest& manifest,
                        const EmbeddingTable& table,
                        const std::filesystem::path& cache_dir,
                        double frame_interval, double expansion_iou_threshold);

// Snippet indices of the annotated moment: the start snippet contains
// tau_s, the end snippet is the one whose period contains tau_e from the
// left (a boundary-exact tau_e belongs to the preceding snippet).
std::pair<int, int> annotation_span_indices(
    double tau_s, double tau_e, const std::vector<SnippetPeriod>& periods);

}  // namespace vmr
