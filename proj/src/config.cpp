#include "vmr/config.hpp"

#include <json.hpp>

#include <fstream>

namespace vmr {

using nlohmann::json;

namespace {
std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void parse_endpoint(const std::string& url, NarratorSettings& n) {
  // accepts host, host:port, http://host:port/path
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    n.endpoint_path = rest.substr(slash);
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    n.endpoint_host = rest.substr(0, colon);
    n.endpoint_port = std::stoi(rest.substr(colon + 1));
  } else {
    n.endpoint_host = rest;
  }
}
}  // namespace

void RunConfig::validate() const {
  if (manifests.empty())
    throw ValidationError("config: no dataset manifests given");
  for (const auto& [split, path] : manifests)
    if (!std::filesystem::exists(path))
      throw ValidationError("config: manifest for split '" + split +
                            "' not found: " + path.string());
  if (!std::filesystem::exists(embeddings))
    throw ValidationError("config: embedding table not found: " +
                          embeddings.string());
  if (narrator.mode != "fixture" && narrator.mode != "remote")
    throw ValidationError("config: narrator mode must be fixture or remote");
  if (narrator.mode == "fixture" && !std::filesystem::exists(narrator.fixtures))
    throw ValidationError("config: narrator fixtures not found: " +
                          narrator.fixtures.string());
  if (frame_interval <= 0.0)
    throw ValidationError("config: frame_interval must be positive");
  encoder.validate();
  train.validate();
  fusion.validate();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();

  RunConfig cfg;
  try {
    const auto& ds = j.at("dataset");
    for (const auto& [split, mp] : ds.at("manifests").items())
      cfg.manifests[split] = resolve(base, mp.get<std::string>());
    cfg.embeddings = resolve(base, ds.at("embeddings").get<std::string>());

    if (j.contains("narrator")) {
      const auto& nj = j.at("narrator");
      cfg.narrator.mode = nj.value("mode", cfg.narrator.mode);
      if (nj.contains("endpoint"))
        parse_endpoint(nj.at("endpoint").get<std::string>(), cfg.narrator);
      if (nj.contains("fixtures"))
        cfg.narrator.fixtures = resolve(base, nj.at("fixtures").get<std::string>());
      cfg.narrator.prompt = nj.value("prompt", cfg.narrator.prompt);
      cfg.narrator.parallelism =
          nj.value("parallelism", cfg.narrator.parallelism);
      cfg.narrator.cache_dir =
          resolve(base, nj.value("cache_dir", std::string("narration_cache")));
      cfg.narrator.max_attempts =
          nj.value("max_attempts", cfg.narrator.max_attempts);
      cfg.narrator.backoff_ms = nj.value("backoff_ms", cfg.narrator.backoff_ms);
    }

    if (j.contains("encoder")) {
      const auto& ej = j.at("encoder");
      cfg.encoder.hidden = ej.value("hidden", cfg.encoder.hidden);
      cfg.encoder.heads = ej.value("heads", cfg.encoder.heads);
      cfg.encoder.dropout = ej.value("dropout", cfg.encoder.dropout);
      if (ej.contains("merge_mode"))
        cfg.encoder.merge_mode =
            merge_mode_from_string(ej.at("merge_mode").get<std::string>());
    }

    if (j.contains("train")) {
      const auto& tj = j.at("train");
      cfg.train.epochs = tj.value("epochs", cfg.train.epochs);
      cfg.train.batch_size = tj.value("batch_size", cfg.train.batch_size);
      cfg.train.learning_rate =
          tj.value("learning_rate", cfg.train.learning_rate);
      cfg.train.grad_clip = tj.value("grad_clip", cfg.train.grad_clip);
      cfg.train.lambda_h = tj.value("lambda_h", cfg.train.lambda_h);
      cfg.train.expansion_iou_threshold = tj.value(
          "expansion_iou_threshold", cfg.train.expansion_iou_threshold);
      cfg.train.per_branch_loss =
          tj.value("per_branch_loss", cfg.train.per_branch_loss);
    }

    if (j.contains("fusion"))
      cfg.fusion.alpha = j.at("fusion").value("alpha", cfg.fusion.alpha);

    cfg.frame_interval = j.value("frame_interval", cfg.frame_interval);
    if (j.contains("output_dir"))
      cfg.output_dir = resolve(base, j.at("output_dir").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }

  cfg.train.seed = cfg.seed;
  cfg.train.alpha = cfg.fusion.alpha;
  return cfg;
}

}  // namespace vmr
