#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "vmr/predictor.hpp"

#include <random>

using namespace vmr;
using namespace vmr::nn;
using vmr::testutil::random_mat;

namespace {
// exhaustive O(L^2) decode oracle with (i, j) lexicographic tie-breaks
std::pair<int, int> decode_oracle(const Eigen::VectorXd& ps,
                                  const Eigen::VectorXd& pe) {
  int bi = 0, bj = 0;
  double best = -1.0;
  for (int i = 0; i < ps.size(); ++i)
    for (int j = i; j < pe.size(); ++j)
      if (ps(i) * pe(j) > best) {
        best = ps(i) * pe(j);
        bi = i;
        bj = j;
      }
  return {bi, bj};
}

Eigen::VectorXd random_distribution(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v / v.sum();
}
}  // namespace

TEST_CASE("sentence_pool convexity and normalization") {
  const int d = 5;
  std::mt19937_64 rng(1);
  Param w("w", random_mat(d, 1, rng));

  SUBCASE("single word passes through") {
    Mat q = random_mat(1, d, rng);
    Graph g;
    Node* pooled = sentence_pool(g, g.constant(q), {1}, w);
    CHECK((pooled->val - q).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("identical words pass through") {
    Mat q(3, d);
    Mat x = random_mat(1, d, rng);
    q.row(0) = x;
    q.row(1) = x;
    q.row(2) = x;
    Graph g;
    Node* pooled = sentence_pool(g, g.constant(q), {1, 1, 1}, w);
    CHECK((pooled->val - x).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("weights sum to one over unmasked words") {
    Mat q = random_mat(4, d, rng);
    Graph g;
    AttnTrace trace;
    sentence_pool(g, g.constant(q), {1, 1, 1, 0}, w, &trace);
    REQUIRE(trace.entries.size() == 1);
    const Mat& weights = trace.entries[0].weights->val;
    CHECK(weights.col(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(weights(3, 0) == 0.0);
  }
  SUBCASE("all-masked query is an error") {
    Mat q = random_mat(2, d, rng);
    Graph g;
    CHECK_THROWS_AS(sentence_pool(g, g.constant(q), {0, 0}, w),
                    ValidationError);
  }
}

TEST_CASE("context_query_attention single-element closed form") {
  const int d = 4;
  std::mt19937_64 rng(2);
  auto p = make_predictor("p", d, rng);
  // identity projections make R^r = R^c = [1], X^v2q = q, X^q2v = v
  p.cqa_video.w.value = Mat::Identity(d, d);
  p.cqa_video.b.value.setZero();
  p.cqa_query.w.value = Mat::Identity(d, d);
  p.cqa_query.b.value.setZero();
  Mat v = random_mat(1, d, rng), q = random_mat(1, d, rng);
  Graph g;
  AttnTrace trace;
  Node* out = context_query_attention(g, g.constant(v), g.constant(q), {1},
                                      {1}, p, &trace);
  CHECK(out->val.rows() == 1);
  CHECK(out->val.cols() == d);
  REQUIRE(trace.entries.size() == 2);
  CHECK(trace.entries[0].weights->val(0, 0) == doctest::Approx(1.0));
  CHECK(trace.entries[1].weights->val(0, 0) == doctest::Approx(1.0));

  // oracle: fc_out([v ; q ; v*q ; v*v]) for the 1x1 case
  Mat cat(1, 4 * d);
  cat << v, q, v.cwiseProduct(q), v.cwiseProduct(v);
  Mat expect = cat * p.cqa_out.w.value + p.cqa_out.b.value;
  CHECK((out->val - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("context_query_attention row softmax sums to one over real words") {
  const int d = 6;
  std::mt19937_64 rng(3);
  auto p = make_predictor("p", d, rng);
  Mat v = random_mat(5, d, rng), q = random_mat(4, d, rng);
  Mask vmask = {1, 1, 1, 0, 0};
  Mask qmask = {1, 1, 1, 0};
  Graph g;
  AttnTrace trace;
  Node* out = context_query_attention(g, g.constant(v), g.constant(q), vmask,
                                      qmask, p, &trace);
  CHECK(out->val.rows() == 5);
  CHECK(out->val.cols() == d);
  CHECK(out->val.row(4).cwiseAbs().maxCoeff() == 0.0);
  const Mat& rrow = trace.entries[0].weights->val;
  for (int r = 0; r < 5; ++r) {
    CHECK(rrow.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rrow(r, 3) == 0.0);
  }
  const Mat& rcol = trace.entries[1].weights->val;
  for (int c = 0; c < 4; ++c) {
    CHECK(rcol.col(c).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rcol(3, c) == 0.0);
    CHECK(rcol(4, c) == 0.0);
  }
}

TEST_CASE("highlight is 0.5 under zero weights and 0 on masked snippets") {
  const int d = 4;
  std::mt19937_64 rng(4);
  auto fc = make_linear("hl", 2 * d, 1, rng);
  fc.w.value.setZero();
  fc.b.value.setZero();
  Mat vbar = random_mat(3, d, rng);
  Mat qv = random_mat(1, d, rng);
  Graph g;
  Node* h = highlight(g, g.constant(vbar), g.constant(qv), {1, 1, 0}, fc);
  CHECK(h->val(0, 0) == doctest::Approx(0.5));
  CHECK(h->val(1, 0) == doctest::Approx(0.5));
  CHECK(h->val(2, 0) == 0.0);

  // generic weights keep values strictly inside (0, 1) on real snippets
  auto fc2 = make_linear("hl2", 2 * d, 1, rng);
  Graph g2;
  Node* h2 = highlight(g2, g2.constant(vbar), g2.constant(qv), {1, 1, 0}, fc2);
  for (int r = 0; r < 2; ++r) {
    CHECK(h2->val(r, 0) > 0.0);
    CHECK(h2->val(r, 0) < 1.0);
  }
}

TEST_CASE("span_scores produces masked endpoint distributions") {
  const int d = 6;
  std::mt19937_64 rng(5);
  auto p = make_predictor("p", d, rng);

  SUBCASE("uniform logits give uniform distributions") {
    // zero LSTM weights and zero head weights -> equal logits
    p.lstm_fwd.w.value.setZero();
    p.lstm_fwd.u.value.setZero();
    p.lstm_fwd.b.value.setZero();
    p.lstm_bwd.w.value.setZero();
    p.lstm_bwd.u.value.setZero();
    p.lstm_bwd.b.value.setZero();
    p.span_head.w.value.setZero();
    p.span_head.b.value.setZero();
    Mat vbar = random_mat(4, d, rng);
    Mat h = Mat::Constant(4, 1, 0.5);
    Graph g;
    auto out = span_scores(g, g.constant(vbar), g.constant(h), {1, 1, 1, 1}, p);
    for (int r = 0; r < 4; ++r) {
      CHECK(out.p_start->val(r, 0) == doctest::Approx(0.25));
      CHECK(out.p_end->val(r, 0) == doctest::Approx(0.25));
    }
  }

  SUBCASE("single real snippet is a point mass") {
    Mat vbar = random_mat(3, d, rng);
    Mat h = Mat::Constant(3, 1, 0.7);
    Graph g;
    auto out = span_scores(g, g.constant(vbar), g.constant(h), {1, 0, 0}, p);
    CHECK(out.p_start->val(0, 0) == doctest::Approx(1.0));
    CHECK(out.p_end->val(0, 0) == doctest::Approx(1.0));
    CHECK(out.p_start->val(1, 0) == 0.0);
    CHECK(out.p_end->val(2, 0) == 0.0);
  }

  SUBCASE("distributions sum to one with padding present") {
    Mat vbar = random_mat(5, d, rng);
    Mat h = Mat::Constant(5, 1, 0.4);
    Graph g;
    auto out =
        span_scores(g, g.constant(vbar), g.constant(h), {1, 1, 1, 0, 0}, p);
    CHECK(out.p_start->val.col(0).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.p_end->val.col(0).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.p_start->val(3, 0) == 0.0);
    CHECK(out.p_start->val(4, 0) == 0.0);
  }
}

TEST_CASE("logit shift invariance of endpoint softmaxes") {
  // adding a constant to pre-softmax logits leaves distributions unchanged
  std::mt19937_64 rng(6);
  Mat logits = random_mat(6, 1, rng);
  Mask mask = {1, 1, 1, 1, 1, 1};
  Graph g;
  Node* p1 = softmax_cols(g, g.constant(logits), mask);
  Node* p2 = softmax_cols(g, g.constant((logits.array() + 123.456).matrix()),
                          mask);
  CHECK((p1->val - p2->val).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("decode_span matches the exhaustive oracle") {
  Eigen::VectorXd ps(3), pe(3);
  ps << 0.7, 0.2, 0.1;
  pe << 0.1, 0.2, 0.7;
  CHECK(decode_span(ps, pe) == std::pair<int, int>{0, 2});

  ps << 0.1, 0.2, 0.7;
  pe << 0.7, 0.2, 0.1;
  CHECK(decode_span(ps, pe) == decode_oracle(ps, pe));

  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK(decode_span(one, one) == std::pair<int, int>{0, 0});

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> ld(1, 24);
  for (int rep = 0; rep < 1000; ++rep) {
    const int L = ld(rng);
    auto a = random_distribution(L, rng);
    auto b = random_distribution(L, rng);
    auto got = decode_span(a, b);
    CHECK(got == decode_oracle(a, b));
    CHECK(got.first <= got.second);
  }
}

TEST_CASE("decode_span tie-breaking prefers smaller i then smaller j") {
  Eigen::VectorXd ps(3), pe(3);
  ps << 0.5, 0.5, 0.0;
  pe << 0.5, 0.5, 0.0;
  // products: (0,0) (0,1) (1,1) all 0.25 -> (0,0)
  CHECK(decode_span(ps, pe) == std::pair<int, int>{0, 0});
  CHECK(decode_oracle(ps, pe) == std::pair<int, int>{0, 0});
}

TEST_CASE("snippet_span_to_seconds maps index spans to period bounds") {
  std::vector<SnippetPeriod> periods = {{0, 2}, {2, 4}};
  CHECK(snippet_span_to_seconds(0, 1, periods) ==
        std::pair<double, double>{0.0, 4.0});
  CHECK(snippet_span_to_seconds(1, 1, periods) ==
        std::pair<double, double>{2.0, 4.0});
  CHECK(snippet_span_to_seconds(0, 0, periods) ==
        std::pair<double, double>{0.0, 2.0});
  CHECK_THROWS_AS(snippet_span_to_seconds(1, 0, periods), std::out_of_range);
  CHECK_THROWS_AS(snippet_span_to_seconds(0, 5, periods), std::out_of_range);
}

TEST_CASE("full predictor composite gradients match finite differences") {
  const int d = 6;
  std::mt19937_64 rng(8);
  auto p = make_predictor("p", d, rng);
  Mat v = random_mat(5, d, rng);
  Mat q = random_mat(3, d, rng);
  Mask vmask = {1, 1, 1, 1, 0};
  Mask qmask = {1, 1, 0};
  v.row(4).setZero();
  q.row(2).setZero();

  std::vector<Param*> params;
  collect(p, params);

  auto run = [&](bool with_grad) {
    Graph g;
    auto out = predict_spans(g, g.constant(v), g.constant(q), vmask, qmask, p);
    // pseudo-loss mixing all three outputs
    Node* loss = add(
        g,
        add(g, log_clamped(g, select_rows_sum(g, out.p_start, {1}), 1e-12),
            log_clamped(g, select_rows_sum(g, out.p_end, {2}), 1e-12)),
        mean_masked(g, out.highlight, vmask));
    if (with_grad) {
      for (Param* pr : params) pr->zero_grad();
      g.backward(loss);
    }
    return loss->val(0, 0);
  };

  run(true);
  std::mt19937_64 probe_rng(91);
  for (Param* pr : params) {
    std::uniform_int_distribution<Eigen::Index> rr(0, pr->value.rows() - 1);
    std::uniform_int_distribution<Eigen::Index> rc(0, pr->value.cols() - 1);
    for (int k = 0; k < 2; ++k) {
      const Eigen::Index r = rr(probe_rng), c = rc(probe_rng);
      const double numeric =
          testutil::central_diff(*pr, r, c, [&] { return run(false); });
      CAPTURE(pr->name);
      CHECK(testutil::rel_err(pr->grad(r, c), numeric) < 1e-3);
    }
  }
}
