#pragma once

#include "vmr/dataset.hpp"

#include <filesystem>
#include <map>

namespace vmr {

// Generated toy corpus: each video hides one "concept" in a contiguous
// span. The concept word appears in the query and in the span narratives;
// its visual motif is added to the span snippet features unless the sample
// is narrative-only.
struct SyntheticSpec {
  int n_samples = 48;
  int d_video = 32;
  int snippets = 16;
  double snippet_seconds = 1.0;
  int d_word = 24;
  double noise = 0.1;
  double motif_gain = 1.5;
  double narrative_only_fraction = 0.0;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  EmbeddingTable table;
  Dataset samples;
  std::map<std::string, std::vector<NarrativeEntry>> narratives;
};

SyntheticData make_synthetic(const SyntheticSpec& spec,
                             double expansion_iou_threshold = 0.7);

struct SyntheticFiles {
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path fixtures;
  std::filesystem::path config;  // ready-to-run CLI config
};

SyntheticFiles write_synthetic(const std::filesystem::path& dir,
                               const SyntheticSpec& spec);

}  // namespace vmr
