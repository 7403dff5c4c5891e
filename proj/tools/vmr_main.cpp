#include "vmr/checkpoint.hpp"
#include "vmr/config.hpp"
#include "vmr/pipeline.hpp"
#include "vmr/synthetic.hpp"
#include "vmr/training.hpp"
#include "vmr/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

namespace {

using namespace vmr;
using nlohmann::json;

std::unique_ptr<NarratorClient> make_client(const NarratorSettings& n,
                                            const std::string& mode_override) {
  const std::string mode = mode_override.empty() ? n.mode : mode_override;
  if (mode == "fixture") return std::make_unique<FixtureNarratorClient>(n.fixtures);
  if (mode == "remote") {
    if (n.endpoint_host.empty())
      throw ValidationError("remote narrator requires an endpoint");
    const char* token = std::getenv("VMR_NARRATOR_TOKEN");
    return std::make_unique<RemoteNarratorClient>(
        n.endpoint_host, n.endpoint_port, n.endpoint_path, n.max_attempts,
        n.backoff_ms, token ? token : "");
  }
  throw ValidationError("unknown narrator mode '" + mode + "'");
}

int infer_feature_dim(const RunConfig& cfg) {
  auto it = cfg.manifests.find("train");
  if (it == cfg.manifests.end()) it = cfg.manifests.begin();
  const DatasetManifest m = load_manifest(it->second);
  return static_cast<int>(read_feature_file(m.entries.front().features_path).cols());
}

ModelConfig model_config(const RunConfig& cfg, int d_video, int d_text) {
  ModelConfig mc;
  mc.d_video = d_video;
  mc.d_para = d_text;
  mc.d_word = d_text;
  mc.encoder = cfg.encoder;
  mc.fusion = cfg.fusion;
  return mc;
}

int cmd_narrate(const RunConfig& cfg, const std::string& mode_override,
                const std::string& only_split) {
  auto client = make_client(cfg.narrator, mode_override);
  NarrateStats stats;
  int failures = 0;
  std::set<std::string> done;
  for (const auto& [split, manifest_path] : cfg.manifests) {
    if (!only_split.empty() && split != only_split) continue;
    const DatasetManifest manifest = load_manifest(manifest_path);
    for (const auto& e : manifest.entries) {
      if (!done.insert(e.video_id).second) continue;
      const auto ts = sample_frame_timestamps(e.duration, cfg.frame_interval);
      try {
        narrate(e.video_id, ts, *client, cfg.narrator.cache_dir,
                cfg.narrator.prompt, cfg.narrator.parallelism, &stats);
      } catch (const NarrationError& err) {
        std::cerr << "narration failure: " << err.what() << "\n";
        ++failures;
      }
    }
  }
  std::cout << "narrate summary: " << stats.hits << " hits, " << stats.misses
            << " misses, " << failures << " failed videos\n";
  return failures > 0 ? 3 : 0;
}

int cmd_train(const RunConfig& cfg, bool resume) {
  auto it = cfg.manifests.find("train");
  if (it == cfg.manifests.end())
    throw ValidationError("train: config has no 'train' manifest");
  const DatasetManifest manifest = load_manifest(it->second);
  const EmbeddingTable table = EmbeddingTable::load(cfg.embeddings);
  const Dataset data =
      prepare_dataset(manifest, table, cfg.narrator.cache_dir,
                      cfg.frame_interval, cfg.train.expansion_iou_threshold);

  Model model(model_config(cfg, static_cast<int>(data.front().video.cols()),
                           table.dim()),
              cfg.seed);
  std::filesystem::create_directories(cfg.output_dir);
  FitPaths paths;
  paths.checkpoint_best = cfg.output_dir / "ckpt_best.bin";
  paths.checkpoint_last = cfg.output_dir / "ckpt_last.bin";
  paths.log_file = cfg.output_dir / "train_log.jsonl";

  FitResult res = fit(model, data, cfg.train, paths, resume, /*verbose=*/true);
  std::cout << "best epoch " << res.best_epoch << " val mIoU "
            << res.best_val_miou << "\n";
  std::cout << "checkpoints: " << paths.checkpoint_best << " (best), "
            << paths.checkpoint_last << " (last)\n";
  return 0;
}

Model load_model_for_eval(const RunConfig& cfg,
                          const std::filesystem::path& checkpoint,
                          const EmbeddingTable& table) {
  Model model(model_config(cfg, infer_feature_dim(cfg), table.dim()), cfg.seed);
  auto params = model.parameters();
  load_checkpoint(checkpoint, params, model.config().fingerprint());
  return model;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
             std::vector<std::string> splits, double alpha) {
  const EmbeddingTable table = EmbeddingTable::load(cfg.embeddings);
  Model model = load_model_for_eval(cfg, checkpoint, table);

  if (splits.empty())
    for (const auto& [split, _] : cfg.manifests) splits.push_back(split);

  std::vector<EvalReport> reports;
  for (const auto& split : splits) {
    auto it = cfg.manifests.find(split);
    if (it == cfg.manifests.end()) {
      std::cerr << "warning: no manifest for split '" << split
                << "', skipping\n";
      continue;
    }
    const DatasetManifest manifest = load_manifest(it->second);
    const Dataset data =
        prepare_dataset(manifest, table, cfg.narrator.cache_dir,
                        cfg.frame_interval, cfg.train.expansion_iou_threshold);
    reports.push_back(evaluate_dataset(model, data, alpha, split));
  }
  if (reports.empty()) throw ValidationError("eval: no splits evaluated");

  std::cout << format_report_table(reports);

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream rec(cfg.output_dir / "eval_report.jsonl");
  rec << json{{"type", "eval"},
              {"version", kVersionString},
              {"fingerprint", model.config().fingerprint()},
              {"seed", cfg.seed},
              {"alpha", alpha}}
             .dump()
      << "\n";
  for (const auto& r : reports) {
    json iou_at;
    for (const auto& [m, v] : r.iou_at) iou_at[std::to_string(m)] = v;
    rec << json{{"type", "split"},
                {"split", r.split_name},
                {"iou_at", iou_at},
                {"miou", r.miou},
                {"n", r.n}}
               .dump()
        << "\n";
    for (const auto& ps : r.per_sample)
      rec << json{{"type", "sample"},
                  {"split", r.split_name},
                  {"video_id", ps.video_id},
                  {"query_id", ps.query_id},
                  {"iou", ps.iou}}
                 .dump()
          << "\n";
    write_iou_histogram_svg(
        cfg.output_dir / ("iou_hist_" + r.split_name + ".svg"), r);
  }
  std::cout << "report written to " << (cfg.output_dir / "eval_report.jsonl")
            << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                const std::string& split, double alpha,
                std::filesystem::path out_file) {
  const EmbeddingTable table = EmbeddingTable::load(cfg.embeddings);
  Model model = load_model_for_eval(cfg, checkpoint, table);
  auto it = cfg.manifests.find(split);
  if (it == cfg.manifests.end())
    throw ValidationError("predict: no manifest for split '" + split + "'");
  const DatasetManifest manifest = load_manifest(it->second);
  const Dataset data =
      prepare_dataset(manifest, table, cfg.narrator.cache_dir,
                      cfg.frame_interval, cfg.train.expansion_iou_threshold);

  if (out_file.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    out_file = cfg.output_dir / ("predictions_" + split + ".jsonl");
  }
  std::ofstream out(out_file);
  out << json{{"type", "predictions"},
              {"version", kVersionString},
              {"fingerprint", model.config().fingerprint()},
              {"seed", cfg.seed},
              {"split", split},
              {"alpha", alpha}}
             .dump()
      << "\n";
  for (const auto& s : data) {
    auto pred = model.predict(s.tensors(), alpha);
    auto [ts, te] =
        snippet_span_to_seconds(pred.start_idx, pred.end_idx, s.periods);
    auto [vs, ve] = decode_span(pred.video.p_start, pred.video.p_end);
    auto [cs, ce] = decode_span(pred.para.p_start, pred.para.p_end);
    out << json{{"type", "prediction"},
                {"video_id", s.video_id},
                {"query_id", s.query_id},
                {"pred_s", ts},
                {"pred_e", te},
                {"video_branch",
                 {{"start_idx", vs},
                  {"end_idx", ve},
                  {"score", pred.video.p_start(vs) * pred.video.p_end(ve)}}},
                {"para_branch",
                 {{"start_idx", cs},
                  {"end_idx", ce},
                  {"score", pred.para.p_start(cs) * pred.para.p_end(ce)}}}}
               .dump()
        << "\n";
  }
  std::cout << "predictions written to " << out_file << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& checkpoint,
              const std::string& split, std::filesystem::path out_file) {
  const EmbeddingTable table = EmbeddingTable::load(cfg.embeddings);
  Model model = load_model_for_eval(cfg, checkpoint, table);
  auto it = cfg.manifests.find(split);
  if (it == cfg.manifests.end())
    throw ValidationError("sweep: no manifest for split '" + split + "'");
  const DatasetManifest manifest = load_manifest(it->second);
  const Dataset data =
      prepare_dataset(manifest, table, cfg.narrator.cache_dir,
                      cfg.frame_interval, cfg.train.expansion_iou_threshold);

  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto rows = sweep_alpha(model, data, grid);
  const std::string tbl = format_sweep_table(rows);
  std::cout << tbl;

  if (out_file.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    out_file = cfg.output_dir / ("alpha_sweep_" + split + ".txt");
  }
  std::ofstream out(out_file);
  out << "# " << kVersionString << " fingerprint="
      << model.config().fingerprint() << " seed=" << cfg.seed << " split="
      << split << "\n";
  out << tbl;
  write_sweep_curve_svg(out_file.parent_path() /
                            ("alpha_sweep_" + split + ".svg"),
                        rows);
  std::cout << "sweep table written to " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video moment retrieval with MLLM narration"};
  app.require_subcommand(1);

  std::string config_path;
  std::string narrator_mode;
  std::string split;
  std::vector<std::string> splits;
  std::string checkpoint;
  std::string out_file;
  double alpha = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false, alpha_set = false, resume = false;

  SyntheticSpec synth_spec;
  std::string synth_out;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--samples", synth_spec.n_samples);
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--noise", synth_spec.noise);
  synth->add_option("--gain", synth_spec.motif_gain);
  synth->add_option("--snippets", synth_spec.snippets);
  synth->add_option("--d-video", synth_spec.d_video);
  synth->add_option("--narrative-only-fraction",
                    synth_spec.narrative_only_fraction);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run config file")->required();
  };

  auto* narrate_cmd = app.add_subcommand("narrate", "populate narration caches");
  add_common(narrate_cmd);
  narrate_cmd->add_option("--narrator-mode", narrator_mode,
                          "fixture or remote (overrides config)");
  narrate_cmd->add_option("--split", split, "narrate one split only");

  auto* train_cmd = app.add_subcommand("train", "train the model");
  add_common(train_cmd);
  train_cmd->add_option("--seed", seed)->each([&](const std::string&) {
    seed_set = true;
  });
  train_cmd->add_option("--alpha", alpha)->each([&](const std::string&) {
    alpha_set = true;
  });
  train_cmd->add_flag("--resume", resume, "resume from the last checkpoint");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--split", splits, "splits to evaluate (default: all)");
  eval_cmd->add_option("--alpha", alpha)->each([&](const std::string&) {
    alpha_set = true;
  });

  auto* predict_cmd = app.add_subcommand("predict", "write prediction records");
  add_common(predict_cmd);
  predict_cmd->add_option("--checkpoint", checkpoint)->required();
  predict_cmd->add_option("--split", split)->required();
  predict_cmd->add_option("--alpha", alpha)->each([&](const std::string&) {
    alpha_set = true;
  });
  predict_cmd->add_option("--out", out_file);

  auto* sweep_cmd = app.add_subcommand("sweep", "alpha sweep over a split");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--checkpoint", checkpoint)->required();
  sweep_cmd->add_option("--split", split)->required();
  sweep_cmd->add_option("--out", out_file);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto files = write_synthetic(synth_out, synth_spec);
      std::cout << "synthetic dataset written: " << files.manifest << "\n"
                << "config: " << files.config << "\n";
      return 0;
    }

    RunConfig cfg = load_run_config(config_path);
    if (seed_set) {
      cfg.seed = seed;
      cfg.train.seed = seed;
    }
    if (alpha_set) {
      cfg.fusion.alpha = alpha;
      cfg.train.alpha = alpha;
    }
    cfg.validate();
    const double eval_alpha = alpha_set ? alpha : cfg.fusion.alpha;

    if (narrate_cmd->parsed())
      return cmd_narrate(cfg, narrator_mode, split);
    if (train_cmd->parsed()) return cmd_train(cfg, resume);
    if (eval_cmd->parsed())
      return cmd_eval(cfg, checkpoint, splits, eval_alpha);
    if (predict_cmd->parsed())
      return cmd_predict(cfg, checkpoint, split, eval_alpha, out_file);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, checkpoint, split, out_file);
  } catch (const NarrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
