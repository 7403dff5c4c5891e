#pragma once

#include "vmr/autodiff.hpp"
#include "vmr/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vmr {

struct CheckpointMeta {
  std::uint64_t fingerprint = 0;
  std::uint64_t seed = 0;
  std::string version;
  int epoch = -1;
  double best_val = -1.0;
  int adam_step = 0;
};

// Named-tensor archive. Adam moments are stored as extra tensors when
// include_adam is set so training can resume exactly.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<nn::Param*>& params,
                     const CheckpointMeta& meta, bool include_adam = false);

// Refuses to load when the archive fingerprint differs from expected, or
// when tensors are missing or have unexpected shapes.
CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::Param*>& params,
                               std::uint64_t expected_fingerprint,
                               bool load_adam = false);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace vmr
