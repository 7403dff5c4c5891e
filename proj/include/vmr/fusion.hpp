#pragma once

#include "vmr/enhancement.hpp"
#include "vmr/predictor.hpp"

namespace vmr {

struct FusionConfig {
  double alpha = 0.5;

  void validate() const {
    if (alpha < 0.0) throw ValidationError("fusion: alpha must be >= 0");
  }
};

// Paragraph-query branch: the same attention block and predictor shapes as
// the video branch, with a fully independent parameter set (including its
// own input projections).
struct ParagraphBranchParams {
  nn::LinearParams para_proj;   // d_para -> d
  nn::LinearParams query_proj;  // d_word -> d
  AttnBlockParams block;
  PredictorParams pred;
};

ParagraphBranchParams make_paragraph_branch(const std::string& name, int d_para,
                                            int d_word,
                                            const EncoderConfig& cfg,
                                            std::mt19937_64& rng);
void collect(ParagraphBranchParams& p, std::vector<nn::Param*>& out);

EnhancedPair paragraph_query_attend(nn::Graph& g, nn::Node* c, nn::Node* q,
                                    const nn::Mask& cmask,
                                    const nn::Mask& qmask,
                                    ParagraphBranchParams& p,
                                    bool training = false,
                                    std::mt19937_64* dropout_rng = nullptr,
                                    AttnTrace* trace = nullptr);

SpanOutputs paragraph_predict(nn::Graph& g, nn::Node* c, nn::Node* q,
                              const nn::Mask& cmask, const nn::Mask& qmask,
                              ParagraphBranchParams& p, bool training = false,
                              std::mt19937_64* dropout_rng = nullptr,
                              AttnTrace* trace = nullptr);

// Raw score fusion: p = p_video + alpha * p_paragraph, not renormalized.
std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse(
    const SpanDistributions& video_dist, const SpanDistributions& para_dist,
    double alpha);

nn::Node* fuse_node(nn::Graph& g, nn::Node* p_video, nn::Node* p_para,
                    double alpha);

}  // namespace vmr
