#pragma once

#include "vmr/enhancement.hpp"
#include "vmr/fusion.hpp"
#include "vmr/predictor.hpp"

#include <cstdint>
#include <random>

namespace vmr {

struct ModelConfig {
  int d_video = 1024;  // raw snippet feature size
  int d_para = 300;    // aligned narrative embedding size
  int d_word = 300;    // query word embedding size
  EncoderConfig encoder;
  FusionConfig fusion;

  void validate() const;
  // Structural fingerprint; checkpoints refuse to load across mismatches.
  std::uint64_t fingerprint() const;
};

// One prepared video-query pair, everything already on the snippet grid.
struct SampleTensors {
  const nn::Mat* video = nullptr;      // [L x d_video]
  const nn::Mat* paragraph = nullptr;  // [L x d_para]
  const nn::Mat* query = nullptr;      // [Lq x d_word]
  nn::Mask vmask;
  nn::Mask qmask;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  struct Forward {
    SpanOutputs video;
    SpanOutputs para;
    nn::Node* fused_start = nullptr;  // raw fused scores
    nn::Node* fused_end = nullptr;
  };

  Forward forward(nn::Graph& g, const SampleTensors& s, bool training = false,
                  std::mt19937_64* dropout_rng = nullptr,
                  AttnTrace* trace = nullptr);

  // Decoded span plus branch distributions for one sample.
  struct Prediction {
    int start_idx = 0;
    int end_idx = 0;
    SpanDistributions video;
    SpanDistributions para;
  };
  Prediction predict(const SampleTensors& s, double alpha);

  std::vector<nn::Param*> parameters();
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::LinearParams query_proj_;  // d_word -> d, video branch
  MergeParams merge_;
  GuidedParams guided_;
  AttnBlockParams video_block_;
  PredictorParams video_pred_;
  ParagraphBranchParams para_branch_;

  friend struct ModelParamAccess;
};

// Test hook exposing the two disjoint parameter groups.
struct ModelParamAccess {
  static std::vector<nn::Param*> video_branch(Model& m);
  static std::vector<nn::Param*> paragraph_branch(Model& m);
};

}  // namespace vmr
