#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
// A Graph owns every node created during one forward pass; backward()
// walks the tape in reverse creation order and accumulates gradients
// into the bound Param objects. Graphs are cheap and rebuilt per sample.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace vmr::nn {

using Mat = Eigen::MatrixXd;

// 1 = real position, 0 = padding. Prefix-true for video snippets.
using Mask = std::vector<std::uint8_t>;

// Trainable tensor with its gradient accumulator and Adam state.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Param() = default;
  Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Graph {
 public:
  struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    // Reads this node's grad and pushes contributions into its parents.
    std::function<void(Node&)> back;
  };

  Node* make(Mat v, bool requires_grad, std::function<void(Node&)> back = {});
  Node* constant(Mat v) { return make(std::move(v), false); }
  Node* scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

  // Leaf bound to a Param; after backward() the node's grad is added to
  // the param's grad accumulator.
  Node* param(Param& p);

  // root must be 1x1 (a scalar loss).
  void backward(Node* root);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
  std::vector<std::pair<Param*, Node*>> bound_;
};

using Node = Graph::Node;

// --- elementwise and shape ops ------------------------------------------

Node* add(Graph& g, Node* a, Node* b);
Node* sub(Graph& g, Node* a, Node* b);
Node* mul(Graph& g, Node* a, Node* b);  // Hadamard
Node* affine(Graph& g, Node* a, double k, double c);  // k*a + c
inline Node* scale(Graph& g, Node* a, double k) { return affine(g, a, k, 0.0); }
inline Node* neg(Graph& g, Node* a) { return affine(g, a, -1.0, 0.0); }
Node* cmul(Graph& g, Node* a, const Mat& k);  // elementwise by a constant

Node* matmul(Graph& g, Node* a, Node* b);
Node* transpose(Graph& g, Node* a);
Node* add_rowvec(Graph& g, Node* a, Node* bias);      // bias is [1 x C]
Node* scale_scalar(Graph& g, Node* a, Node* s);       // s is 1x1
Node* add_scalar(Graph& g, Node* a, Node* s);         // s is 1x1
Node* colwise_scale(Graph& g, Node* a, Node* h);      // h is [R x 1]

Node* slice_cols(Graph& g, Node* a, Eigen::Index c0, Eigen::Index n);
Node* rows(Graph& g, Node* a, Eigen::Index r0, Eigen::Index n);
Node* concat_cols(Graph& g, const std::vector<Node*>& parts);
Node* stack_rows(Graph& g, const std::vector<Node*>& parts);

// --- nonlinearities -------------------------------------------------------

Node* sigmoid(Graph& g, Node* a);
Node* tanh_op(Graph& g, Node* a);
Node* relu(Graph& g, Node* a);
Node* log_clamped(Graph& g, Node* a, double eps);  // log(max(a, eps))

// --- masked sequence ops ---------------------------------------------------

// Softmax across the columns of each row, restricted to columns where
// col_mask is true. Rows with no admissible column come out all-zero.
Node* softmax_rows(Graph& g, Node* a, const Mask& col_mask);
// Softmax down the rows of each column, restricted to rows where
// row_mask is true.
Node* softmax_cols(Graph& g, Node* a, const Mask& row_mask);
// Zero out rows where row_mask is false (and their gradients).
Node* mask_rows(Graph& g, Node* a, const Mask& row_mask);

Node* layer_norm_rows(Graph& g, Node* a, Node* gamma, Node* beta,
                      double eps = 1e-5);
Node* dropout(Graph& g, Node* a, double rate, std::mt19937_64& rng);

// --- reductions -------------------------------------------------------------

Node* sum_all(Graph& g, Node* a);
// Mean over the unmasked rows of a column vector [R x 1].
Node* mean_masked(Graph& g, Node* a, const Mask& row_mask);
// Sum of selected rows of a column vector [R x 1].
Node* select_rows_sum(Graph& g, Node* a, const std::vector<int>& idx);

}  // namespace vmr::nn
