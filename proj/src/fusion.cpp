#include "vmr/fusion.hpp"

namespace vmr {

using namespace nn;

ParagraphBranchParams make_paragraph_branch(const std::string& name, int d_para,
                                            int d_word,
                                            const EncoderConfig& cfg,
                                            std::mt19937_64& rng) {
  ParagraphBranchParams p;
  p.para_proj = make_linear(name + ".para_proj", d_para, cfg.hidden, rng);
  p.query_proj = make_linear(name + ".query_proj", d_word, cfg.hidden, rng);
  p.block = make_attn_block(name + ".block", cfg, rng);
  p.pred = make_predictor(name + ".pred", cfg.hidden, rng);
  return p;
}

void collect(ParagraphBranchParams& p, std::vector<Param*>& out) {
  collect(p.para_proj, out);
  collect(p.query_proj, out);
  collect(p.block, out);
  collect(p.pred, out);
}

EnhancedPair paragraph_query_attend(Graph& g, Node* c, Node* q,
                                    const Mask& cmask, const Mask& qmask,
                                    ParagraphBranchParams& p, bool training,
                                    std::mt19937_64* dropout_rng,
                                    AttnTrace* trace) {
  return attn_block(g, c, q, cmask, qmask, p.block, training, dropout_rng,
                    trace);
}

SpanOutputs paragraph_predict(Graph& g, Node* c, Node* q, const Mask& cmask,
                              const Mask& qmask, ParagraphBranchParams& p,
                              bool training, std::mt19937_64* dropout_rng,
                              AttnTrace* trace) {
  EnhancedPair pair = paragraph_query_attend(g, c, q, cmask, qmask, p,
                                             training, dropout_rng, trace);
  return predict_spans(g, pair.v_e, pair.q_e, cmask, qmask, p.pred, trace);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse(
    const SpanDistributions& video_dist, const SpanDistributions& para_dist,
    double alpha) {
  if (video_dist.p_start.size() != para_dist.p_start.size() ||
      video_dist.p_end.size() != para_dist.p_end.size())
    throw ShapeError("fuse: branch score lengths differ");
  return {video_dist.p_start + alpha * para_dist.p_start,
          video_dist.p_end + alpha * para_dist.p_end};
}

Node* fuse_node(Graph& g, Node* p_video, Node* p_para, double alpha) {
  if (p_video->val.rows() != p_para->val.rows())
    throw ShapeError("fuse: branch score lengths differ");
  return add(g, p_video, scale(g, p_para, alpha));
}

}  // namespace vmr
