#include "vmr/dataset.hpp"

#include "vmr/training.hpp"

namespace vmr {

std::pair<int, int> annotation_span_indices(
    double tau_s, double tau_e, const std::vector<SnippetPeriod>& periods) {
  const int start = seconds_to_snippet_index(tau_s, periods);
  int end;
  if (tau_e >= periods.back().t_end) {
    end = static_cast<int>(periods.size()) - 1;
  } else {
    end = seconds_to_snippet_index(tau_e, periods);
    if (periods[end].t_start == tau_e && end > start) --end;
  }
  return {start, std::max(start, end)};
}

Dataset prepare_dataset(const DatasetManifest& manifest,
                        const EmbeddingTable& table,
                        const std::filesystem::path& cache_dir,
                        double frame_interval,
                        double expansion_iou_threshold) {
  Dataset out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const nn::Mat raw = read_feature_file(e.features_path);
    VideoFeatureSequence grid =
        build_snippet_grid(raw, e.duration, e.video_id, e.periods);
    grid.validate();

    auto cached = load_narration_cache(cache_dir, e.video_id);
    if (cached.empty())
      throw ValidationError("no narration cache for video " + e.video_id +
                            "; run the narrate step first");
    std::vector<NarrativeEntry> entries;
    entries.reserve(cached.size());
    for (const auto& [t, text] : cached) entries.push_back({t, text});
    (void)frame_interval;  // timestamps come from the cache records

    StructuredParagraph para = align_paragraph(entries, grid, table);
    Query query = embed_query(e.query_id, e.query_text, table);
    query.validate();

    PreparedSample s;
    s.video_id = e.video_id;
    s.query_id = e.query_id;
    s.video = std::move(grid.snippets);
    s.vmask = grid.mask;
    s.periods = grid.periods;
    s.duration = e.duration;
    s.paragraph = std::move(para.aligned);
    s.query = std::move(query.embeddings);
    s.qmask = query.mask;

    s.ann.tau_s = e.tau_s;
    s.ann.tau_e = e.tau_e;
    auto [si, ei] = annotation_span_indices(e.tau_s, e.tau_e, s.periods);
    s.ann.start_idx = si;
    s.ann.end_idx = ei;
    auto [cs, ce] = expand_labels(s.ann, s.periods, expansion_iou_threshold);
    s.ann.candidate_starts = std::move(cs);
    s.ann.candidate_ends = std::move(ce);
    s.ann.validate(e.duration);

    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vmr
