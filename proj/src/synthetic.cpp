#include "vmr/synthetic.hpp"

#include "vmr/training.hpp"

#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

namespace vmr {

using nlohmann::json;

namespace {

const std::vector<std::string>& concept_words() {
  static const std::vector<std::string> words = {
      "lamp", "dog", "guitar", "kettle", "bicycle", "parrot", "violin",
      "hammer"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "find", "the", "moment", "when", "a",     "appears", "in",
      "room", "an",  "empty",  "is",   "background", "shows"};
  return words;
}

struct RawSample {
  std::string video_id;
  std::string query_id;
  nn::Mat features;  // [snippets x d_video]
  double duration = 0.0;
  std::string query_text;
  double tau_s = 0.0;
  double tau_e = 0.0;
  std::vector<NarrativeEntry> narratives;
};

struct RawWorld {
  EmbeddingTable table;
  std::vector<RawSample> samples;
};

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v / v.norm();
}

RawWorld generate(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  RawWorld world;
  world.table = EmbeddingTable(spec.d_word);
  for (const auto& w : filler_words())
    world.table.insert(w, 0.3 * random_unit(spec.d_word, rng));
  std::vector<Eigen::VectorXd> motifs;
  for (const auto& w : concept_words()) {
    world.table.insert(w, random_unit(spec.d_word, rng));
    motifs.push_back(spec.motif_gain * random_unit(spec.d_video, rng));
  }

  const int L = spec.snippets;
  std::uniform_int_distribution<int> len_dist(3, std::min(6, L));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  for (int i = 0; i < spec.n_samples; ++i) {
    RawSample s;
    s.video_id = "synth" + std::to_string(i);
    s.query_id = "q" + std::to_string(i);
    s.duration = L * spec.snippet_seconds;

    const int concept_idx = i % static_cast<int>(concept_words().size());
    const int len = len_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, L - len);
    const int a = start_dist(rng);
    const int b = a + len - 1;
    s.tau_s = a * spec.snippet_seconds;
    s.tau_e = (b + 1) * spec.snippet_seconds;

    const bool narrative_only = u01(rng) < spec.narrative_only_fraction;

    s.features = nn::Mat(L, spec.d_video);
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < spec.d_video; ++c)
        s.features(r, c) = spec.noise * noise(rng);
    if (!narrative_only) {
      for (int r = a; r <= b; ++r)
        s.features.row(r) += motifs[concept_idx].transpose();
    }

    const std::string& word = concept_words()[concept_idx];
    s.query_text = "find the moment when the " + word + " appears";
    for (int k = 0; k < L; ++k) {
      const double t = (k + 0.5) * spec.snippet_seconds;
      if (k >= a && k <= b)
        s.narratives.push_back({t, "a " + word + " appears in the room"});
      else
        s.narratives.push_back({t, "the background shows an empty room"});
    }
    world.samples.push_back(std::move(s));
  }
  return world;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec,
                             double expansion_iou_threshold) {
  RawWorld world = generate(spec);
  SyntheticData data;
  data.table = world.table;

  for (auto& raw : world.samples) {
    VideoFeatureSequence grid;
    grid.video_id = raw.video_id;
    grid.duration = raw.duration;
    grid.snippets = raw.features;
    grid.mask.assign(spec.snippets, 1);
    grid.periods.resize(spec.snippets);
    for (int k = 0; k < spec.snippets; ++k)
      grid.periods[k] = {k * spec.snippet_seconds,
                         (k + 1) * spec.snippet_seconds};

    StructuredParagraph para =
        align_paragraph(raw.narratives, grid, data.table);
    Query query = embed_query(raw.query_id, raw.query_text, data.table);

    PreparedSample s;
    s.video_id = raw.video_id;
    s.query_id = raw.query_id;
    s.video = std::move(grid.snippets);
    s.vmask = grid.mask;
    s.periods = grid.periods;
    s.duration = raw.duration;
    s.paragraph = std::move(para.aligned);
    s.query = std::move(query.embeddings);
    s.qmask = query.mask;
    s.ann.tau_s = raw.tau_s;
    s.ann.tau_e = raw.tau_e;
    auto [si, ei] = annotation_span_indices(raw.tau_s, raw.tau_e, s.periods);
    s.ann.start_idx = si;
    s.ann.end_idx = ei;
    auto [cs, ce] = expand_labels(s.ann, s.periods, expansion_iou_threshold);
    s.ann.candidate_starts = std::move(cs);
    s.ann.candidate_ends = std::move(ce);

    data.narratives[raw.video_id] = raw.narratives;
    data.samples.push_back(std::move(s));
  }
  return data;
}

SyntheticFiles write_synthetic(const std::filesystem::path& dir,
                               const SyntheticSpec& spec) {
  RawWorld world = generate(spec);
  std::filesystem::create_directories(dir / "features");

  SyntheticFiles files;
  files.manifest = dir / "train.manifest.jsonl";
  files.embeddings = dir / "embeddings.txt";
  files.fixtures = dir / "fixtures.jsonl";
  files.config = dir / "config.json";

  world.table.save(files.embeddings);

  DatasetManifest manifest;
  manifest.split_name = "train";
  std::ofstream fixtures(files.fixtures);
  for (const auto& raw : world.samples) {
    const std::string feat_name = raw.video_id + ".vfeat";
    write_feature_file(dir / "features" / feat_name, raw.features);
    ManifestEntry e;
    e.video_id = raw.video_id;
    e.features_path = "features/" + feat_name;  // relative to the manifest
    e.duration = raw.duration;
    e.query_id = raw.query_id;
    e.query_text = raw.query_text;
    e.tau_s = raw.tau_s;
    e.tau_e = raw.tau_e;
    manifest.entries.push_back(e);
    for (const auto& n : raw.narratives)
      fixtures << json{{"video_id", raw.video_id},
                       {"t", n.timestamp},
                       {"text", n.text}}
                      .dump()
               << "\n";
  }
  save_manifest(files.manifest, manifest);

  const json cfg{
      {"dataset",
       {{"manifests", {{"train", files.manifest.filename().string()}}},
        {"embeddings", files.embeddings.filename().string()}}},
      {"narrator",
       {{"mode", "fixture"},
        {"fixtures", files.fixtures.filename().string()},
        {"parallelism", 4},
        {"cache_dir", "narration_cache"}}},
      {"encoder",
       {{"hidden", 32},
        {"heads", 4},
        {"dropout", 0.2},
        {"merge_mode", "concat_mlp"}}},
      {"train",
       {{"epochs", 100},
        {"batch_size", 16},
        {"learning_rate", 0.0005},
        {"grad_clip", 1.0},
        {"lambda_h", 5.0},
        {"expansion_iou_threshold", 0.7}}},
      {"fusion", {{"alpha", 0.5}}},
      {"frame_interval", spec.snippet_seconds},
      {"output_dir", "runs"},
      {"seed", 13}};
  std::ofstream cfg_out(files.config);
  cfg_out << cfg.dump(2) << "\n";

  return files;
}

}  // namespace vmr
