#pragma once

#include "vmr/datamodel.hpp"
#include "vmr/layers.hpp"

#include <random>
#include <string>
#include <vector>

namespace vmr {

enum class MergeMode { kConcatMlp, kAdd, kAttention };

MergeMode merge_mode_from_string(const std::string& s);
std::string to_string(MergeMode m);

struct EncoderConfig {
  int hidden = 128;
  int heads = 8;
  double dropout = 0.2;
  MergeMode merge_mode = MergeMode::kConcatMlp;

  void validate() const;
};

// Collected attention maps for normalization checks: each entry holds a
// matrix of softmax outputs together with the axis that must sum to one.
struct AttnTrace {
  struct Entry {
    nn::Node* weights = nullptr;
    nn::Mask target_mask;  // rows (or cols when column_axis) that are live
    nn::Mask ref_mask;     // positions the distribution ranges over
    bool column_axis = false;
    std::string tag;
  };
  std::vector<Entry> entries;
};

// Attention over a reference sequence (four FC layers), multi-head with
// reference-mask-aware softmax, post-residual layer norm and dropout.
struct AttentionUnitParams {
  nn::LinearParams score_target;
  nn::LinearParams score_ref;
  nn::LinearParams value;
  nn::LinearParams out;
  nn::Param ln_gamma;
  nn::Param ln_beta;
  int heads = 1;
  double dropout = 0.0;
  bool layer_norm = true;
};

AttentionUnitParams make_attention_unit(const std::string& name, int d,
                                        int heads, double dropout,
                                        std::mt19937_64& rng);
void collect(AttentionUnitParams& p, std::vector<nn::Param*>& out);

nn::Node* attention_unit(nn::Graph& g, nn::Node* target, nn::Node* reference,
                         const nn::Mask& target_mask, const nn::Mask& ref_mask,
                         AttentionUnitParams& p, bool training = false,
                         std::mt19937_64* dropout_rng = nullptr,
                         AttnTrace* trace = nullptr);

// Snippet/paragraph feature merging. Only the parameters of the configured
// mode are created.
struct MergeParams {
  MergeMode mode = MergeMode::kConcatMlp;
  nn::LinearParams mlp_in;   // concat_mlp: (d_v + d_c) -> d
  nn::LinearParams mlp_out;  // concat_mlp: d -> d
  nn::LinearParams proj_v;   // add / attention: d_v -> d
  nn::LinearParams proj_c;   // add / attention: d_c -> d
  AttentionUnitParams attn;  // attention mode only
};

MergeParams make_merge(const std::string& name, MergeMode mode, int d_v,
                       int d_c, const EncoderConfig& cfg, std::mt19937_64& rng);
void collect(MergeParams& p, std::vector<nn::Param*>& out);

nn::Node* merge(nn::Graph& g, nn::Node* video, nn::Node* paragraph,
                const nn::Mask& vmask, MergeParams& p, bool training = false,
                std::mt19937_64* dropout_rng = nullptr,
                AttnTrace* trace = nullptr);

// Forward/backward running-mean aggregates stacked with the input as three
// channels of a 1x1 convolution.
struct GuidedParams {
  nn::Param conv_w;  // [1 x 3]
  nn::Param conv_b;  // [1 x 1]
};

GuidedParams make_guided(const std::string& name, std::mt19937_64& rng);
void collect(GuidedParams& p, std::vector<nn::Param*>& out);

nn::Node* guided_aggregate(nn::Graph& g, nn::Node* v_m, const nn::Mask& vmask,
                           GuidedParams& p);

// Self- then cross-attention on the target, then the same on the reference
// against the updated target.
struct AttnBlockParams {
  AttentionUnitParams self_target;
  AttentionUnitParams cross_target;
  AttentionUnitParams self_ref;
  AttentionUnitParams cross_ref;
};

AttnBlockParams make_attn_block(const std::string& name,
                                const EncoderConfig& cfg,
                                std::mt19937_64& rng);
void collect(AttnBlockParams& p, std::vector<nn::Param*>& out);

struct EnhancedPair {
  nn::Node* v_e = nullptr;
  nn::Node* q_e = nullptr;
};

EnhancedPair attn_block(nn::Graph& g, nn::Node* v, nn::Node* q,
                        const nn::Mask& vmask, const nn::Mask& qmask,
                        AttnBlockParams& p, bool training = false,
                        std::mt19937_64* dropout_rng = nullptr,
                        AttnTrace* trace = nullptr);

}  // namespace vmr
