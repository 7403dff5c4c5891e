#include "vmr/predictor.hpp"

#include <cmath>

namespace vmr {

using namespace nn;

PredictorParams make_predictor(const std::string& name, int d,
                               std::mt19937_64& rng) {
  PredictorParams p;
  p.pool_w = Param(name + ".pool_w", uniform_fan_in(d, 1, rng));
  p.cqa_video = make_linear(name + ".cqa_video", d, d, rng);
  p.cqa_query = make_linear(name + ".cqa_query", d, d, rng);
  p.cqa_out = make_linear(name + ".cqa_out", 4 * d, d, rng);
  p.highlight_fc = make_linear(name + ".highlight_fc", 2 * d, 1, rng);
  p.lstm_fwd = make_lstm(name + ".lstm_fwd", d, d, rng);
  p.lstm_bwd = make_lstm(name + ".lstm_bwd", d, d, rng);
  p.span_head = make_linear(name + ".span_head", 2 * d, 2, rng);
  return p;
}

void collect(PredictorParams& p, std::vector<Param*>& out) {
  out.push_back(&p.pool_w);
  collect(p.cqa_video, out);
  collect(p.cqa_query, out);
  collect(p.cqa_out, out);
  collect(p.highlight_fc, out);
  collect(p.lstm_fwd, out);
  collect(p.lstm_bwd, out);
  collect(p.span_head, out);
}

Node* sentence_pool(Graph& g, Node* q_e, const Mask& qmask, Param& pool_w,
                    AttnTrace* trace) {
  bool any = false;
  for (auto m : qmask) any = any || m;
  if (!any) throw ValidationError("sentence_pool: all query words masked");
  Node* scores = matmul(g, q_e, g.param(pool_w));  // [Lq x 1]
  Node* weights = softmax_cols(g, scores, qmask);
  if (trace)
    trace->entries.push_back({weights, {1}, qmask, true, "sentence_pool"});
  return matmul(g, transpose(g, weights), q_e);  // [1 x d]
}

Node* context_query_attention(Graph& g, Node* v, Node* q, const Mask& vmask,
                              const Mask& qmask, PredictorParams& p,
                              AttnTrace* trace) {
  const Eigen::Index d = v->val.cols();
  if (q->val.cols() != d)
    throw ShapeError("context_query_attention: hidden sizes differ");
  Node* pv = linear(g, v, p.cqa_video);
  Node* pq = linear(g, q, p.cqa_query);
  Node* r = scale(g, matmul(g, pv, transpose(g, pq)),
                  1.0 / std::sqrt(static_cast<double>(d)));  // [Lv x Lq]
  Node* r_row = softmax_rows(g, r, qmask);
  Node* r_col = softmax_cols(g, r, vmask);
  if (trace) {
    trace->entries.push_back({r_row, vmask, qmask, false, "cqa.row"});
    trace->entries.push_back({r_col, qmask, vmask, true, "cqa.col"});
  }
  Node* v2q = matmul(g, r_row, q);                             // [Lv x d]
  Node* q2v = matmul(g, matmul(g, r_row, transpose(g, r_col)), v);  // [Lv x d]
  Node* cat = concat_cols(g, {v, v2q, mul(g, v, v2q), mul(g, v, q2v)});
  return mask_rows(g, linear(g, cat, p.cqa_out), vmask);
}

Node* highlight(Graph& g, Node* v_bar, Node* q_vec, const Mask& vmask,
                LinearParams& fc) {
  const Eigen::Index L = v_bar->val.rows();
  // broadcast the pooled query onto every snippet row
  Mat ones = Mat::Ones(L, 1);
  Node* q_rows = matmul(g, g.constant(ones), q_vec);  // [L x d]
  Node* cat = concat_cols(g, {v_bar, q_rows});
  Node* h = sigmoid(g, linear(g, cat, fc));  // [L x 1]
  return mask_rows(g, h, vmask);
}

SpanOutputs span_scores(Graph& g, Node* v_bar, Node* h, const Mask& vmask,
                        PredictorParams& p, AttnTrace* trace) {
  const Eigen::Index L = v_bar->val.rows();
  int real = 0;
  for (auto m : vmask) real += m ? 1 : 0;
  if (real == 0) throw ValidationError("span_scores: no real snippets");

  Node* x = colwise_scale(g, v_bar, h);
  Node* x_real = real == L ? x : rows(g, x, 0, real);
  Node* fwd = lstm_run(g, x_real, p.lstm_fwd, /*reverse=*/false);
  Node* bwd = lstm_run(g, x_real, p.lstm_bwd, /*reverse=*/true);
  Node* logits = linear(g, concat_cols(g, {fwd, bwd}), p.span_head);  // [real x 2]
  if (real < L) {
    Node* pad = g.constant(Mat::Zero(L - real, 2));
    logits = stack_rows(g, {logits, pad});
  }
  SpanOutputs out;
  out.p_start = softmax_cols(g, slice_cols(g, logits, 0, 1), vmask);
  out.p_end = softmax_cols(g, slice_cols(g, logits, 1, 1), vmask);
  out.highlight = h;
  if (trace) {
    trace->entries.push_back({out.p_start, {1}, vmask, true, "p_start"});
    trace->entries.push_back({out.p_end, {1}, vmask, true, "p_end"});
  }
  return out;
}

SpanOutputs predict_spans(Graph& g, Node* v_e, Node* q_e, const Mask& vmask,
                          const Mask& qmask, PredictorParams& p,
                          AttnTrace* trace) {
  Node* q_vec = sentence_pool(g, q_e, qmask, p.pool_w, trace);
  Node* v_bar = context_query_attention(g, v_e, q_e, vmask, qmask, p, trace);
  Node* h = highlight(g, v_bar, q_vec, vmask, p.highlight_fc);
  return span_scores(g, v_bar, h, vmask, p, trace);
}

SpanDistributions extract(const SpanOutputs& o) {
  SpanDistributions d;
  d.p_start = o.p_start->val.col(0);
  d.p_end = o.p_end->val.col(0);
  d.highlight = o.highlight->val.col(0);
  return d;
}

std::pair<int, int> decode_span(const Eigen::VectorXd& p_start,
                                const Eigen::VectorXd& p_end) {
  const Eigen::Index L = p_start.size();
  if (L == 0 || p_end.size() != L)
    throw ValidationError("decode_span: bad distribution sizes");
  int best_i = 0, best_j = 0;
  double best = -1.0;
  int arg_s = 0;  // smallest argmax of p_start over [0, j]
  for (int j = 0; j < L; ++j) {
    if (p_start(j) > p_start(arg_s)) arg_s = j;
    const double prod = p_start(arg_s) * p_end(j);
    if (prod > best ||
        (prod == best && (arg_s < best_i || (arg_s == best_i && j < best_j)))) {
      best = prod;
      best_i = arg_s;
      best_j = j;
    }
  }
  return {best_i, best_j};
}

std::pair<double, double> snippet_span_to_seconds(
    int start_idx, int end_idx, const std::vector<SnippetPeriod>& periods) {
  if (start_idx < 0 || end_idx >= static_cast<int>(periods.size()) ||
      start_idx > end_idx)
    throw std::out_of_range("snippet_span_to_seconds: bad span indices");
  return {periods[start_idx].t_start, periods[end_idx].t_end};
}

}  // namespace vmr
