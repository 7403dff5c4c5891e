#pragma once

#include "vmr/datamodel.hpp"
#include "vmr/enhancement.hpp"
#include "vmr/layers.hpp"

namespace vmr {

// Per-snippet endpoint scores of one branch, with the highlighting vector.
struct SpanDistributions {
  Eigen::VectorXd p_start;
  Eigen::VectorXd p_end;
  Eigen::VectorXd highlight;
};

struct PredictorParams {
  nn::Param pool_w;             // [d x 1] per-word score for sentence pooling
  nn::LinearParams cqa_video;   // d -> d
  nn::LinearParams cqa_query;   // d -> d
  nn::LinearParams cqa_out;     // 4d -> d
  nn::LinearParams highlight_fc;  // 2d -> 1 (width-1 conv over snippets)
  nn::LstmParams lstm_fwd;
  nn::LstmParams lstm_bwd;
  nn::LinearParams span_head;   // 2d -> 2 (start, end logits)
};

PredictorParams make_predictor(const std::string& name, int d,
                               std::mt19937_64& rng);
void collect(PredictorParams& p, std::vector<nn::Param*>& out);

// Attention-pooled sentence feature: softmax over learned per-word scores.
nn::Node* sentence_pool(nn::Graph& g, nn::Node* q_e, const nn::Mask& qmask,
                        nn::Param& pool_w, AttnTrace* trace = nullptr);

nn::Node* context_query_attention(nn::Graph& g, nn::Node* v, nn::Node* q,
                                  const nn::Mask& vmask, const nn::Mask& qmask,
                                  PredictorParams& p,
                                  AttnTrace* trace = nullptr);

// Sigmoid of a width-1 convolution over each snippet row concatenated with
// the pooled query; masked snippets are zero.
nn::Node* highlight(nn::Graph& g, nn::Node* v_bar, nn::Node* q_vec,
                    const nn::Mask& vmask, nn::LinearParams& fc);

struct SpanOutputs {
  nn::Node* p_start = nullptr;   // [L x 1], zero on padded snippets
  nn::Node* p_end = nullptr;     // [L x 1]
  nn::Node* highlight = nullptr; // [L x 1]
};

// Highlight-scaled features through a bidirectional recurrent scorer and
// two independent masked softmaxes.
SpanOutputs span_scores(nn::Graph& g, nn::Node* v_bar, nn::Node* h,
                        const nn::Mask& vmask, PredictorParams& p,
                        AttnTrace* trace = nullptr);

// Full branch predictor on enhanced features.
SpanOutputs predict_spans(nn::Graph& g, nn::Node* v_e, nn::Node* q_e,
                          const nn::Mask& vmask, const nn::Mask& qmask,
                          PredictorParams& p, AttnTrace* trace = nullptr);

SpanDistributions extract(const SpanOutputs& o);

// Joint argmax of p_start[i] * p_end[j] over i <= j; ties prefer smaller i,
// then smaller j.
std::pair<int, int> decode_span(const Eigen::VectorXd& p_start,
                                const Eigen::VectorXd& p_end);

std::pair<double, double> snippet_span_to_seconds(
    int start_idx, int end_idx, const std::vector<SnippetPeriod>& periods);

}  // namespace vmr
