#pragma once

#include "vmr/autodiff.hpp"

#include <random>
#include <string>
#include <vector>

namespace vmr::nn {

struct LinearParams {
  Param w;  // [in x out]
  Param b;  // [1 x out]
};

// Uniform init scaled by fan-in, biases zero.
LinearParams make_linear(const std::string& name, Eigen::Index in,
                         Eigen::Index out, std::mt19937_64& rng);

Node* linear(Graph& g, Node* x, LinearParams& p);

// Single-direction LSTM parameters, gate order (input, forget, output, cell).
struct LstmParams {
  Param w;  // [in x 4h]
  Param u;  // [h x 4h]
  Param b;  // [1 x 4h]
  Eigen::Index hidden = 0;
};

LstmParams make_lstm(const std::string& name, Eigen::Index in,
                     Eigen::Index hidden, std::mt19937_64& rng);

// Runs over all rows of x; outputs one hidden state per row, [L x h].
Node* lstm_run(Graph& g, Node* x, LstmParams& p, bool reverse);

inline void collect(LinearParams& p, std::vector<Param*>& out) {
  out.push_back(&p.w);
  out.push_back(&p.b);
}
inline void collect(LstmParams& p, std::vector<Param*>& out) {
  out.push_back(&p.w);
  out.push_back(&p.u);
  out.push_back(&p.b);
}

Mat uniform_fan_in(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace vmr::nn
