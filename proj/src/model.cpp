#include "vmr/model.hpp"

#include "vmr/narration.hpp"

#include <sstream>

namespace vmr {

using namespace nn;

void ModelConfig::validate() const {
  if (d_video <= 0 || d_para <= 0 || d_word <= 0)
    throw ValidationError("model: non-positive input dims");
  encoder.validate();
  fusion.validate();
}

std::uint64_t ModelConfig::fingerprint() const {
  std::ostringstream ss;
  ss << "d_video=" << d_video << ";d_para=" << d_para << ";d_word=" << d_word
     << ";hidden=" << encoder.hidden << ";heads=" << encoder.heads
     << ";merge=" << to_string(encoder.merge_mode);
  return fnv1a64(ss.str());
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(init_seed);
  const int d = cfg_.encoder.hidden;
  query_proj_ = make_linear("video.query_proj", cfg_.d_word, d, rng);
  merge_ = make_merge("video.merge", cfg_.encoder.merge_mode, cfg_.d_video,
                      cfg_.d_para, cfg_.encoder, rng);
  guided_ = make_guided("video.guided", rng);
  video_block_ = make_attn_block("video.block", cfg_.encoder, rng);
  video_pred_ = make_predictor("video.pred", d, rng);
  para_branch_ = make_paragraph_branch("para", cfg_.d_para, cfg_.d_word,
                                       cfg_.encoder, rng);
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out;
  collect(query_proj_, out);
  collect(merge_, out);
  collect(guided_, out);
  collect(video_block_, out);
  collect(video_pred_, out);
  collect(para_branch_, out);
  return out;
}

std::vector<Param*> ModelParamAccess::video_branch(Model& m) {
  std::vector<Param*> out;
  collect(m.query_proj_, out);
  collect(m.merge_, out);
  collect(m.guided_, out);
  collect(m.video_block_, out);
  collect(m.video_pred_, out);
  return out;
}

std::vector<Param*> ModelParamAccess::paragraph_branch(Model& m) {
  std::vector<Param*> out;
  collect(m.para_branch_, out);
  return out;
}

Model::Forward Model::forward(Graph& g, const SampleTensors& s, bool training,
                              std::mt19937_64* dropout_rng, AttnTrace* trace) {
  if (!s.video || !s.paragraph || !s.query)
    throw ValidationError("model forward: missing sample tensors");
  if (s.video->rows() != s.paragraph->rows())
    throw ShapeError("model forward: paragraph not aligned to snippet grid");

  Node* video_in = g.constant(*s.video);
  Node* para_in = g.constant(*s.paragraph);
  Node* query_in = g.constant(*s.query);

  // video-query branch
  Node* q = mask_rows(g, linear(g, query_in, query_proj_), s.qmask);
  Node* merged = merge(g, video_in, para_in, s.vmask, merge_, training,
                       dropout_rng, trace);
  Node* guided = guided_aggregate(g, merged, s.vmask, guided_);
  EnhancedPair enhanced = attn_block(g, guided, q, s.vmask, s.qmask,
                                     video_block_, training, dropout_rng,
                                     trace);
  Forward f;
  f.video = predict_spans(g, enhanced.v_e, enhanced.q_e, s.vmask, s.qmask,
                          video_pred_, trace);

  // paragraph-query branch (independent parameters)
  Node* c = mask_rows(g, linear(g, para_in, para_branch_.para_proj), s.vmask);
  Node* qp =
      mask_rows(g, linear(g, query_in, para_branch_.query_proj), s.qmask);
  f.para = paragraph_predict(g, c, qp, s.vmask, s.qmask, para_branch_,
                             training, dropout_rng, trace);

  f.fused_start = fuse_node(g, f.video.p_start, f.para.p_start,
                            cfg_.fusion.alpha);
  f.fused_end = fuse_node(g, f.video.p_end, f.para.p_end, cfg_.fusion.alpha);
  return f;
}

Model::Prediction Model::predict(const SampleTensors& s, double alpha) {
  Graph g;
  Forward f = forward(g, s, /*training=*/false);
  Prediction p;
  p.video = extract(f.video);
  p.para = extract(f.para);
  auto [ps, pe] = fuse(p.video, p.para, alpha);
  auto [i, j] = decode_span(ps, pe);
  p.start_idx = i;
  p.end_idx = j;
  return p;
}

}  // namespace vmr
