#include "vmr/layers.hpp"

#include <cmath>

namespace vmr::nn {

Mat uniform_fan_in(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

LinearParams make_linear(const std::string& name, Eigen::Index in,
                         Eigen::Index out, std::mt19937_64& rng) {
  LinearParams p;
  p.w = Param(name + ".w", uniform_fan_in(in, out, rng));
  p.b = Param(name + ".b", Mat::Zero(1, out));
  return p;
}

Node* linear(Graph& g, Node* x, LinearParams& p) {
  return add_rowvec(g, matmul(g, x, g.param(p.w)), g.param(p.b));
}

LstmParams make_lstm(const std::string& name, Eigen::Index in,
                     Eigen::Index hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.w = Param(name + ".w", uniform_fan_in(in, 4 * hidden, rng));
  p.u = Param(name + ".u", uniform_fan_in(hidden, 4 * hidden, rng));
  p.b = Param(name + ".b", Mat::Zero(1, 4 * hidden));
  p.hidden = hidden;
  return p;
}

Node* lstm_run(Graph& g, Node* x, LstmParams& p, bool reverse) {
  const Eigen::Index L = x->val.rows();
  const Eigen::Index h = p.hidden;
  Node* W = g.param(p.w);
  Node* U = g.param(p.u);
  Node* B = g.param(p.b);
  Node* hs = g.constant(Mat::Zero(1, h));
  Node* cs = g.constant(Mat::Zero(1, h));
  std::vector<Node*> outs(L);
  for (Eigen::Index k = 0; k < L; ++k) {
    const Eigen::Index t = reverse ? L - 1 - k : k;
    Node* xt = rows(g, x, t, 1);
    Node* z =
        add_rowvec(g, add(g, matmul(g, xt, W), matmul(g, hs, U)), B);
    Node* gi = sigmoid(g, slice_cols(g, z, 0, h));
    Node* gf = sigmoid(g, slice_cols(g, z, h, h));
    Node* go = sigmoid(g, slice_cols(g, z, 2 * h, h));
    Node* gc = tanh_op(g, slice_cols(g, z, 3 * h, h));
    cs = add(g, mul(g, gf, cs), mul(g, gi, gc));
    hs = mul(g, go, tanh_op(g, cs));
    outs[t] = hs;
  }
  return stack_rows(g, outs);
}

}  // namespace vmr::nn
