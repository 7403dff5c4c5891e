#pragma once

#include "vmr/autodiff.hpp"
#include "vmr/errors.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vmr {

// Canonical snippet-grid length; shorter videos are zero-padded, longer
// ones max-pooled down.
inline constexpr int kMaxSnippets = 128;

// Half-open time interval [t_start, t_end) in seconds.
struct SnippetPeriod {
  double t_start = 0.0;
  double t_end = 0.0;
};

struct VideoFeatureSequence {
  std::string video_id;
  nn::Mat snippets;                    // [L x d_v], padded rows are zero
  std::vector<SnippetPeriod> periods;  // one per real snippet
  nn::Mask mask;                       // [L], prefix-true
  double duration = 0.0;

  int real_count() const { return static_cast<int>(periods.size()); }
  void validate() const;
};

struct Query {
  std::string query_id;
  std::vector<std::string> tokens;
  nn::Mat embeddings;  // [Lq x d_w], padded rows are zero
  nn::Mask mask;       // [Lq]

  void validate() const;
};

struct MomentAnnotation {
  double tau_s = 0.0;
  double tau_e = 0.0;
  int start_idx = 0;
  int end_idx = 0;
  std::vector<int> candidate_starts;  // sorted, always contains start_idx
  std::vector<int> candidate_ends;    // sorted, always contains end_idx

  void validate(double duration) const;
};

struct ManifestEntry {
  std::string video_id;
  std::string features_path;  // resolved relative to the manifest file
  double duration = 0.0;
  std::optional<std::vector<SnippetPeriod>> periods;  // raw-row periods
  std::string query_id;
  std::string query_text;
  double tau_s = 0.0;
  double tau_e = 0.0;
};

struct DatasetManifest {
  std::string split_name;  // train | cd-test-ood | cg-novel-word |
                           // cg-novel-composition | iid-test
  std::vector<ManifestEntry> entries;
};

// Maps a time to the snippet whose half-open period contains it;
// t == duration maps to the last real snippet. Throws std::out_of_range
// when t lies outside [0, duration].
int seconds_to_snippet_index(double t, const std::vector<SnippetPeriod>& periods);

// Downsample/pad raw per-snippet features onto the canonical grid.
// Raw periods default to a uniform division of [0, duration].
VideoFeatureSequence build_snippet_grid(
    const nn::Mat& raw_features, double duration,
    const std::string& video_id = "",
    const std::optional<std::vector<SnippetPeriod>>& raw_periods = std::nullopt);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

// Binary feature files: magic "VFEA", u8 dtype (0 = f32, 1 = f64), u8 rank,
// rank x u64 dims, then row-major data, all little-endian.
void write_feature_file(const std::filesystem::path& path, const nn::Mat& m,
                        bool as_f32 = false);
nn::Mat read_feature_file(const std::filesystem::path& path);

}  // namespace vmr
