#include "vmr/enhancement.hpp"

#include <cmath>

namespace vmr {

using namespace nn;

MergeMode merge_mode_from_string(const std::string& s) {
  if (s == "concat_mlp") return MergeMode::kConcatMlp;
  if (s == "add") return MergeMode::kAdd;
  if (s == "attention") return MergeMode::kAttention;
  throw ValidationError("unknown merge mode '" + s + "'");
}

std::string to_string(MergeMode m) {
  switch (m) {
    case MergeMode::kConcatMlp:
      return "concat_mlp";
    case MergeMode::kAdd:
      return "add";
    case MergeMode::kAttention:
      return "attention";
  }
  return "?";
}

void EncoderConfig::validate() const {
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0)
    throw ValidationError("encoder: hidden must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ValidationError("encoder: dropout must be in [0, 1)");
}

AttentionUnitParams make_attention_unit(const std::string& name, int d,
                                        int heads, double dropout,
                                        std::mt19937_64& rng) {
  AttentionUnitParams p;
  p.score_target = make_linear(name + ".score_target", d, d, rng);
  p.score_ref = make_linear(name + ".score_ref", d, d, rng);
  p.value = make_linear(name + ".value", d, d, rng);
  p.out = make_linear(name + ".out", d, d, rng);
  p.ln_gamma = Param(name + ".ln_gamma", Mat::Ones(1, d));
  p.ln_beta = Param(name + ".ln_beta", Mat::Zero(1, d));
  p.heads = heads;
  p.dropout = dropout;
  return p;
}

void collect(AttentionUnitParams& p, std::vector<Param*>& out) {
  collect(p.score_target, out);
  collect(p.score_ref, out);
  collect(p.value, out);
  collect(p.out, out);
  out.push_back(&p.ln_gamma);
  out.push_back(&p.ln_beta);
}

Node* attention_unit(Graph& g, Node* target, Node* reference,
                     const Mask& target_mask, const Mask& ref_mask,
                     AttentionUnitParams& p, bool training,
                     std::mt19937_64* dropout_rng, AttnTrace* trace) {
  const Eigen::Index d = target->val.cols();
  if (reference->val.cols() != d) throw ShapeError("attention_unit: dim mismatch");
  if (d % p.heads != 0) throw ShapeError("attention_unit: heads do not divide d");
  const Eigen::Index hd = d / p.heads;

  Node* pt = linear(g, target, p.score_target);
  Node* pr = linear(g, reference, p.score_ref);
  Node* pv = linear(g, reference, p.value);

  std::vector<Node*> head_outs;
  head_outs.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Node* qh = slice_cols(g, pt, h * hd, hd);
    Node* kh = slice_cols(g, pr, h * hd, hd);
    Node* vh = slice_cols(g, pv, h * hd, hd);
    Node* scores =
        scale(g, matmul(g, qh, transpose(g, kh)), 1.0 / std::sqrt((double)hd));
    Node* attn = softmax_rows(g, scores, ref_mask);
    if (trace)
      trace->entries.push_back(
          {attn, target_mask, ref_mask, false, "attention_unit.head"});
    head_outs.push_back(matmul(g, attn, vh));
  }
  Node* attended =
      p.heads == 1 ? head_outs[0] : concat_cols(g, head_outs);

  Node* y = linear(g, add(g, target, attended), p.out);
  if (p.layer_norm)
    y = layer_norm_rows(g, y, g.param(p.ln_gamma), g.param(p.ln_beta));
  if (training && p.dropout > 0.0) {
    if (!dropout_rng)
      throw std::invalid_argument("attention_unit: dropout needs an rng");
    y = dropout(g, y, p.dropout, *dropout_rng);
  }
  return mask_rows(g, y, target_mask);
}

MergeParams make_merge(const std::string& name, MergeMode mode, int d_v,
                       int d_c, const EncoderConfig& cfg,
                       std::mt19937_64& rng) {
  MergeParams p;
  p.mode = mode;
  const int d = cfg.hidden;
  switch (mode) {
    case MergeMode::kConcatMlp:
      p.mlp_in = make_linear(name + ".mlp_in", d_v + d_c, d, rng);
      p.mlp_out = make_linear(name + ".mlp_out", d, d, rng);
      break;
    case MergeMode::kAdd:
      p.proj_v = make_linear(name + ".proj_v", d_v, d, rng);
      p.proj_c = make_linear(name + ".proj_c", d_c, d, rng);
      break;
    case MergeMode::kAttention:
      p.proj_v = make_linear(name + ".proj_v", d_v, d, rng);
      p.proj_c = make_linear(name + ".proj_c", d_c, d, rng);
      p.attn = make_attention_unit(name + ".attn", d, cfg.heads, cfg.dropout,
                                   rng);
      break;
  }
  return p;
}

void collect(MergeParams& p, std::vector<Param*>& out) {
  switch (p.mode) {
    case MergeMode::kConcatMlp:
      collect(p.mlp_in, out);
      collect(p.mlp_out, out);
      break;
    case MergeMode::kAdd:
      collect(p.proj_v, out);
      collect(p.proj_c, out);
      break;
    case MergeMode::kAttention:
      collect(p.proj_v, out);
      collect(p.proj_c, out);
      collect(p.attn, out);
      break;
  }
}

Node* merge(Graph& g, Node* video, Node* paragraph, const Mask& vmask,
            MergeParams& p, bool training, std::mt19937_64* dropout_rng,
            AttnTrace* trace) {
  if (video->val.rows() != paragraph->val.rows())
    throw ShapeError("merge: video and paragraph row counts differ");
  Node* merged = nullptr;
  switch (p.mode) {
    case MergeMode::kConcatMlp: {
      Node* cat = concat_cols(g, {video, paragraph});
      merged = linear(g, relu(g, linear(g, cat, p.mlp_in)), p.mlp_out);
      break;
    }
    case MergeMode::kAdd:
      merged = add(g, linear(g, video, p.proj_v), linear(g, paragraph, p.proj_c));
      break;
    case MergeMode::kAttention: {
      Node* v = linear(g, video, p.proj_v);
      Node* c = linear(g, paragraph, p.proj_c);
      merged = attention_unit(g, v, c, vmask, vmask, p.attn, training,
                              dropout_rng, trace);
      break;
    }
  }
  return mask_rows(g, merged, vmask);
}

GuidedParams make_guided(const std::string& name, std::mt19937_64& rng) {
  GuidedParams p;
  // fan-in of the 1x1 conv is its three channels
  p.conv_w = Param(name + ".conv_w", uniform_fan_in(3, 1, rng).transpose());
  p.conv_b = Param(name + ".conv_b", Mat::Zero(1, 1));
  return p;
}

void collect(GuidedParams& p, std::vector<Param*>& out) {
  out.push_back(&p.conv_w);
  out.push_back(&p.conv_b);
}

Node* guided_aggregate(Graph& g, Node* v_m, const Mask& vmask,
                       GuidedParams& p) {
  const Eigen::Index L = v_m->val.rows();
  if ((Eigen::Index)vmask.size() != L)
    throw ShapeError("guided_aggregate: mask size mismatch");
  int real = 0;
  for (auto m : vmask) real += m ? 1 : 0;

  // running means as constant linear maps over the rows
  Mat fwd = Mat::Zero(L, L), bwd = Mat::Zero(L, L);
  for (int t = 0; t < real; ++t) {
    for (int j = 0; j <= t; ++j) fwd(t, j) = 1.0 / (t + 1);
    for (int j = t; j < real; ++j) bwd(t, j) = 1.0 / (real - t);
  }
  Node* f = matmul(g, g.constant(fwd), v_m);
  Node* b = matmul(g, g.constant(bwd), v_m);

  Node* w = g.param(p.conv_w);
  Node* out = add(g, add(g, scale_scalar(g, v_m, slice_cols(g, w, 0, 1)),
                         scale_scalar(g, f, slice_cols(g, w, 1, 1))),
                  scale_scalar(g, b, slice_cols(g, w, 2, 1)));
  out = add_scalar(g, out, g.param(p.conv_b));
  return mask_rows(g, out, vmask);
}

AttnBlockParams make_attn_block(const std::string& name,
                                const EncoderConfig& cfg,
                                std::mt19937_64& rng) {
  AttnBlockParams p;
  p.self_target = make_attention_unit(name + ".self_target", cfg.hidden,
                                      cfg.heads, cfg.dropout, rng);
  p.cross_target = make_attention_unit(name + ".cross_target", cfg.hidden,
                                       cfg.heads, cfg.dropout, rng);
  p.self_ref = make_attention_unit(name + ".self_ref", cfg.hidden, cfg.heads,
                                   cfg.dropout, rng);
  p.cross_ref = make_attention_unit(name + ".cross_ref", cfg.hidden, cfg.heads,
                                    cfg.dropout, rng);
  return p;
}

void collect(AttnBlockParams& p, std::vector<Param*>& out) {
  collect(p.self_target, out);
  collect(p.cross_target, out);
  collect(p.self_ref, out);
  collect(p.cross_ref, out);
}

EnhancedPair attn_block(Graph& g, Node* v, Node* q, const Mask& vmask,
                        const Mask& qmask, AttnBlockParams& p, bool training,
                        std::mt19937_64* dropout_rng, AttnTrace* trace) {
  if (v->val.cols() != q->val.cols())
    throw ShapeError("attn_block: hidden sizes differ");
  Node* v1 = attention_unit(g, v, v, vmask, vmask, p.self_target, training,
                            dropout_rng, trace);
  Node* v2 = attention_unit(g, v1, q, vmask, qmask, p.cross_target, training,
                            dropout_rng, trace);
  Node* q1 = attention_unit(g, q, q, qmask, qmask, p.self_ref, training,
                            dropout_rng, trace);
  Node* q2 = attention_unit(g, q1, v2, qmask, vmask, p.cross_ref, training,
                            dropout_rng, trace);
  return {v2, q2};
}

}  // namespace vmr
