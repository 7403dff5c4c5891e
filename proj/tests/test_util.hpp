#pragma once

// Shared test helpers: finite-difference probing and small random inputs.
// Kept in test code so the oracles stay independent of the library path.

#include "vmr/autodiff.hpp"

#include <functional>
#include <random>

namespace vmr::testutil {

inline nn::Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                          double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  nn::Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

// Central finite difference of a scalar function w.r.t. one entry of a
// parameter value.
inline double central_diff(vmr::nn::Param& p, Eigen::Index r, Eigen::Index c,
                           const std::function<double()>& eval,
                           double eps = 1e-6) {
  const double saved = p.value(r, c);
  p.value(r, c) = saved + eps;
  const double hi = eval();
  p.value(r, c) = saved - eps;
  const double lo = eval();
  p.value(r, c) = saved;
  return (hi - lo) / (2.0 * eps);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

}  // namespace vmr::testutil
