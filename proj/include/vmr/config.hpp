#pragma once

#include "vmr/enhancement.hpp"
#include "vmr/fusion.hpp"
#include "vmr/narration.hpp"
#include "vmr/training.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace vmr {

struct NarratorSettings {
  std::string mode = "fixture";  // fixture | remote
  std::string endpoint_host;
  int endpoint_port = 80;
  std::string endpoint_path = "/caption";
  std::filesystem::path fixtures;
  std::string prompt = kDefaultNarratorPrompt;
  int parallelism = 4;
  std::filesystem::path cache_dir = "narration_cache";
  int max_attempts = 3;
  int backoff_ms = 100;
};

struct RunConfig {
  std::map<std::string, std::filesystem::path> manifests;  // split -> path
  std::filesystem::path embeddings;
  NarratorSettings narrator;
  EncoderConfig encoder;
  TrainConfig train;
  FusionConfig fusion;
  double frame_interval = 1.0;  // seconds between narrated frames
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 13;

  void validate() const;
};

// Relative paths are resolved against the config file's directory. The
// VMR_NARRATOR_TOKEN environment variable supplies endpoint credentials.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace vmr
