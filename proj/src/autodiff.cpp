#include "vmr/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vmr::nn {

Node* Graph::make(Mat v, bool requires_grad, std::function<void(Node&)> back) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.val = std::move(v);
  n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  return &n;
}

Node* Graph::param(Param& p) {
  Node* n = make(p.value, true);
  bound_.emplace_back(&p, n);
  return n;
}

void Graph::backward(Node* root) {
  if (root->val.rows() != 1 || root->val.cols() != 1) {
    throw std::invalid_argument("Graph::backward expects a 1x1 root");
  }
  for (Node& n : nodes_) n.grad.setZero();
  root->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->requires_grad && it->back) it->back(*it);
  }
  for (auto& [p, n] : bound_) p->grad += n->grad;
}

namespace {
bool rg(Node* a) { return a->requires_grad; }
bool rg(Node* a, Node* b) { return a->requires_grad || b->requires_grad; }
}  // namespace

Node* add(Graph& g, Node* a, Node* b) {
  assert(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols());
  return g.make(a->val + b->val, rg(a, b), [a, b](Node& n) {
    if (a->requires_grad) a->grad += n.grad;
    if (b->requires_grad) b->grad += n.grad;
  });
}

Node* sub(Graph& g, Node* a, Node* b) {
  assert(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols());
  return g.make(a->val - b->val, rg(a, b), [a, b](Node& n) {
    if (a->requires_grad) a->grad += n.grad;
    if (b->requires_grad) b->grad -= n.grad;
  });
}

Node* mul(Graph& g, Node* a, Node* b) {
  assert(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols());
  return g.make(a->val.cwiseProduct(b->val), rg(a, b), [a, b](Node& n) {
    if (a->requires_grad) a->grad += n.grad.cwiseProduct(b->val);
    if (b->requires_grad) b->grad += n.grad.cwiseProduct(a->val);
  });
}

Node* affine(Graph& g, Node* a, double k, double c) {
  return g.make((a->val.array() * k + c).matrix(), rg(a), [a, k](Node& n) {
    if (a->requires_grad) a->grad += k * n.grad;
  });
}

Node* cmul(Graph& g, Node* a, const Mat& k) {
  assert(a->val.rows() == k.rows() && a->val.cols() == k.cols());
  return g.make(a->val.cwiseProduct(k), rg(a), [a, k](Node& n) {
    if (a->requires_grad) a->grad += n.grad.cwiseProduct(k);
  });
}

Node* matmul(Graph& g, Node* a, Node* b) {
  assert(a->val.cols() == b->val.rows());
  return g.make(a->val * b->val, rg(a, b), [a, b](Node& n) {
    if (a->requires_grad) a->grad += n.grad * b->val.transpose();
    if (b->requires_grad) b->grad += a->val.transpose() * n.grad;
  });
}

Node* transpose(Graph& g, Node* a) {
  return g.make(a->val.transpose(), rg(a), [a](Node& n) {
    if (a->requires_grad) a->grad += n.grad.transpose();
  });
}

Node* add_rowvec(Graph& g, Node* a, Node* bias) {
  assert(bias->val.rows() == 1 && bias->val.cols() == a->val.cols());
  return g.make(a->val.rowwise() + bias->val.row(0), rg(a, bias),
                [a, bias](Node& n) {
                  if (a->requires_grad) a->grad += n.grad;
                  if (bias->requires_grad)
                    bias->grad += n.grad.colwise().sum();
                });
}

Node* scale_scalar(Graph& g, Node* a, Node* s) {
  assert(s->val.size() == 1);
  return g.make(a->val * s->val(0, 0), rg(a, s), [a, s](Node& n) {
    if (a->requires_grad) a->grad += n.grad * s->val(0, 0);
    if (s->requires_grad)
      s->grad(0, 0) += n.grad.cwiseProduct(a->val).sum();
  });
}

Node* add_scalar(Graph& g, Node* a, Node* s) {
  assert(s->val.size() == 1);
  return g.make((a->val.array() + s->val(0, 0)).matrix(), rg(a, s),
                [a, s](Node& n) {
                  if (a->requires_grad) a->grad += n.grad;
                  if (s->requires_grad) s->grad(0, 0) += n.grad.sum();
                });
}

Node* colwise_scale(Graph& g, Node* a, Node* h) {
  assert(h->val.cols() == 1 && h->val.rows() == a->val.rows());
  return g.make(a->val.array().colwise() * h->val.col(0).array(), rg(a, h),
                [a, h](Node& n) {
                  if (a->requires_grad)
                    a->grad +=
                        (n.grad.array().colwise() * h->val.col(0).array())
                            .matrix();
                  if (h->requires_grad)
                    h->grad.col(0) +=
                        n.grad.cwiseProduct(a->val).rowwise().sum();
                });
}

Node* slice_cols(Graph& g, Node* a, Eigen::Index c0, Eigen::Index n) {
  assert(c0 >= 0 && c0 + n <= a->val.cols());
  return g.make(a->val.middleCols(c0, n), rg(a), [a, c0, n](Node& nd) {
    if (a->requires_grad) a->grad.middleCols(c0, n) += nd.grad;
  });
}

Node* rows(Graph& g, Node* a, Eigen::Index r0, Eigen::Index n) {
  assert(r0 >= 0 && r0 + n <= a->val.rows());
  return g.make(a->val.middleRows(r0, n), rg(a), [a, r0, n](Node& nd) {
    if (a->requires_grad) a->grad.middleRows(r0, n) += nd.grad;
  });
}

Node* concat_cols(Graph& g, const std::vector<Node*>& parts) {
  assert(!parts.empty());
  Eigen::Index r = parts[0]->val.rows(), c = 0;
  bool any = false;
  for (Node* p : parts) {
    assert(p->val.rows() == r);
    c += p->val.cols();
    any = any || p->requires_grad;
  }
  Mat out(r, c);
  Eigen::Index at = 0;
  for (Node* p : parts) {
    out.middleCols(at, p->val.cols()) = p->val;
    at += p->val.cols();
  }
  std::vector<Node*> ps = parts;
  return g.make(std::move(out), any, [ps](Node& n) {
    Eigen::Index at = 0;
    for (Node* p : ps) {
      if (p->requires_grad)
        p->grad += n.grad.middleCols(at, p->val.cols());
      at += p->val.cols();
    }
  });
}

Node* stack_rows(Graph& g, const std::vector<Node*>& parts) {
  assert(!parts.empty());
  Eigen::Index c = parts[0]->val.cols(), r = 0;
  bool any = false;
  for (Node* p : parts) {
    assert(p->val.cols() == c);
    r += p->val.rows();
    any = any || p->requires_grad;
  }
  Mat out(r, c);
  Eigen::Index at = 0;
  for (Node* p : parts) {
    out.middleRows(at, p->val.rows()) = p->val;
    at += p->val.rows();
  }
  std::vector<Node*> ps = parts;
  return g.make(std::move(out), any, [ps](Node& n) {
    Eigen::Index at = 0;
    for (Node* p : ps) {
      if (p->requires_grad)
        p->grad += n.grad.middleRows(at, p->val.rows());
      at += p->val.rows();
    }
  });
}

Node* sigmoid(Graph& g, Node* a) {
  Mat y = (1.0 / (1.0 + (-a->val.array()).exp())).matrix();
  return g.make(y, rg(a), [a](Node& n) {
    if (a->requires_grad)
      a->grad +=
          n.grad.cwiseProduct((n.val.array() * (1.0 - n.val.array())).matrix());
  });
}

Node* tanh_op(Graph& g, Node* a) {
  Mat y = a->val.array().tanh().matrix();
  return g.make(y, rg(a), [a](Node& n) {
    if (a->requires_grad)
      a->grad += n.grad.cwiseProduct((1.0 - n.val.array().square()).matrix());
  });
}

Node* relu(Graph& g, Node* a) {
  Mat y = a->val.cwiseMax(0.0);
  return g.make(y, rg(a), [a](Node& n) {
    if (a->requires_grad)
      a->grad += n.grad.cwiseProduct(
          (a->val.array() > 0.0).cast<double>().matrix());
  });
}

Node* log_clamped(Graph& g, Node* a, double eps) {
  Mat y = a->val.cwiseMax(eps).array().log().matrix();
  return g.make(y, rg(a), [a, eps](Node& n) {
    if (!a->requires_grad) return;
    a->grad += n.grad.cwiseQuotient(a->val.cwiseMax(eps))
                   .cwiseProduct((a->val.array() >= eps).cast<double>().matrix());
  });
}

Node* softmax_rows(Graph& g, Node* a, const Mask& col_mask) {
  const Eigen::Index R = a->val.rows(), C = a->val.cols();
  assert(col_mask.empty() || (Eigen::Index)col_mask.size() == C);
  Mat y = Mat::Zero(R, C);
  for (Eigen::Index r = 0; r < R; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < C; ++c)
      if (col_mask.empty() || col_mask[c]) m = std::max(m, a->val(r, c));
    if (!std::isfinite(m)) continue;  // no admissible column: row stays zero
    double s = 0.0;
    for (Eigen::Index c = 0; c < C; ++c)
      if (col_mask.empty() || col_mask[c]) {
        y(r, c) = std::exp(a->val(r, c) - m);
        s += y(r, c);
      }
    y.row(r) /= s;
  }
  Mask cm = col_mask;
  return g.make(std::move(y), rg(a), [a, cm](Node& n) {
    if (!a->requires_grad) return;
    const Eigen::Index R = n.val.rows(), C = n.val.cols();
    for (Eigen::Index r = 0; r < R; ++r) {
      double dot = n.grad.row(r).dot(n.val.row(r));
      for (Eigen::Index c = 0; c < C; ++c) {
        if (!cm.empty() && !cm[c]) continue;
        a->grad(r, c) += n.val(r, c) * (n.grad(r, c) - dot);
      }
    }
  });
}

Node* softmax_cols(Graph& g, Node* a, const Mask& row_mask) {
  Node* t = transpose(g, a);
  Node* s = softmax_rows(g, t, row_mask);
  return transpose(g, s);
}

Node* mask_rows(Graph& g, Node* a, const Mask& row_mask) {
  assert((Eigen::Index)row_mask.size() == a->val.rows());
  Mat y = a->val;
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    if (!row_mask[r]) y.row(r).setZero();
  Mask rm = row_mask;
  return g.make(std::move(y), rg(a), [a, rm](Node& n) {
    if (!a->requires_grad) return;
    for (Eigen::Index r = 0; r < n.grad.rows(); ++r)
      if (rm[r]) a->grad.row(r) += n.grad.row(r);
  });
}

Node* layer_norm_rows(Graph& g, Node* a, Node* gamma, Node* beta, double eps) {
  const Eigen::Index R = a->val.rows(), C = a->val.cols();
  assert(gamma->val.rows() == 1 && gamma->val.cols() == C);
  assert(beta->val.rows() == 1 && beta->val.cols() == C);
  Mat xhat(R, C), y(R, C);
  Eigen::VectorXd inv_std(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    double mu = a->val.row(r).mean();
    double var = (a->val.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (a->val.row(r).array() - mu) * inv_std(r);
    y.row(r) = xhat.row(r).cwiseProduct(gamma->val.row(0)) + beta->val.row(0);
  }
  return g.make(std::move(y), rg(a) || rg(gamma, beta),
                [a, gamma, beta, xhat, inv_std](Node& n) {
                  const Eigen::Index R = n.val.rows();
                  for (Eigen::Index r = 0; r < R; ++r) {
                    Eigen::RowVectorXd dxhat =
                        n.grad.row(r).cwiseProduct(gamma->val.row(0));
                    if (a->requires_grad) {
                      double m1 = dxhat.mean();
                      double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                      a->grad.row(r) +=
                          inv_std(r) *
                          (dxhat.array() - m1 - xhat.row(r).array() * m2)
                              .matrix();
                    }
                    if (gamma->requires_grad)
                      gamma->grad.row(0) +=
                          n.grad.row(r).cwiseProduct(xhat.row(r));
                    if (beta->requires_grad) beta->grad.row(0) += n.grad.row(r);
                  }
                });
}

Node* dropout(Graph& g, Node* a, double rate, std::mt19937_64& rng) {
  assert(rate >= 0.0 && rate < 1.0);
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Mat m(a->val.rows(), a->val.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = keep(rng) ? s : 0.0;
  return cmul(g, a, m);
}

Node* sum_all(Graph& g, Node* a) {
  return g.make(Mat::Constant(1, 1, a->val.sum()), rg(a), [a](Node& n) {
    if (a->requires_grad) a->grad.array() += n.grad(0, 0);
  });
}

Node* mean_masked(Graph& g, Node* a, const Mask& row_mask) {
  assert(a->val.cols() == 1);
  assert((Eigen::Index)row_mask.size() == a->val.rows());
  double s = 0.0;
  int cnt = 0;
  for (Eigen::Index r = 0; r < a->val.rows(); ++r)
    if (row_mask[r]) {
      s += a->val(r, 0);
      ++cnt;
    }
  if (cnt == 0) throw std::invalid_argument("mean_masked: empty mask");
  Mask rm = row_mask;
  return g.make(Mat::Constant(1, 1, s / cnt), rg(a), [a, rm, cnt](Node& n) {
    if (!a->requires_grad) return;
    const double k = n.grad(0, 0) / cnt;
    for (Eigen::Index r = 0; r < a->grad.rows(); ++r)
      if (rm[r]) a->grad(r, 0) += k;
  });
}

Node* select_rows_sum(Graph& g, Node* a, const std::vector<int>& idx) {
  assert(a->val.cols() == 1);
  double s = 0.0;
  for (int i : idx) {
    assert(i >= 0 && i < a->val.rows());
    s += a->val(i, 0);
  }
  std::vector<int> ix = idx;
  return g.make(Mat::Constant(1, 1, s), rg(a), [a, ix](Node& n) {
    if (!a->requires_grad) return;
    for (int i : ix) a->grad(i, 0) += n.grad(0, 0);
  });
}

}  // namespace vmr::nn
