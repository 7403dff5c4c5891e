#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "vmr/enhancement.hpp"

#include <random>

using namespace vmr;
using namespace vmr::nn;
using vmr::testutil::random_mat;

namespace {

AttentionUnitParams identity_unit(int d) {
  std::mt19937_64 rng(1);
  AttentionUnitParams p = make_attention_unit("u", d, 1, 0.0, rng);
  p.score_target.w.value = Mat::Identity(d, d);
  p.score_target.b.value.setZero();
  p.score_ref.w.value = Mat::Identity(d, d);
  p.score_ref.b.value.setZero();
  p.value.w.value = Mat::Identity(d, d);
  p.value.b.value.setZero();
  p.out.w.value = Mat::Identity(d, d);
  p.out.b.value.setZero();
  p.layer_norm = false;
  return p;
}

}  // namespace

TEST_CASE("attention unit with identity FCs doubles a single row") {
  // single element: R = [1], output = fc(x + 1 * fc(x)) = 2x
  const int d = 4;
  auto p = identity_unit(d);
  std::mt19937_64 rng(2);
  Mat x = random_mat(1, d, rng);
  Graph g;
  Node* out = attention_unit(g, g.constant(x), g.constant(x), {1}, {1}, p);
  CHECK((out->val - 2.0 * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention unit splits softmax evenly over identical references") {
  const int d = 4;
  auto p = identity_unit(d);
  std::mt19937_64 rng(3);
  Mat x = random_mat(1, d, rng);
  Mat ref(2, d);
  ref.row(0) = x;
  ref.row(1) = x;
  Graph g;
  AttnTrace trace;
  Node* out = attention_unit(g, g.constant(x), g.constant(ref), {1}, {1, 1}, p,
                             false, nullptr, &trace);
  REQUIRE(trace.entries.size() == 1);
  const Mat& attn = trace.entries[0].weights->val;
  CHECK(attn(0, 0) == doctest::Approx(0.5));
  CHECK(attn(0, 1) == doctest::Approx(0.5));
  CHECK((out->val - 2.0 * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention rows are distributions over unmasked references") {
  const int d = 8;
  std::mt19937_64 rng(4);
  auto p = make_attention_unit("u", d, 4, 0.0, rng);
  Mat target = random_mat(5, d, rng);
  Mat ref = random_mat(6, d, rng);
  Mask tmask = {1, 1, 1, 0, 0};
  Mask rmask = {1, 1, 1, 1, 0, 0};
  Graph g;
  AttnTrace trace;
  attention_unit(g, g.constant(target), g.constant(ref), tmask, rmask, p,
                 false, nullptr, &trace);
  REQUIRE(trace.entries.size() == 4);  // one per head
  for (const auto& e : trace.entries) {
    const Mat& a = e.weights->val;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      double sum = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        if (!rmask[c]) CHECK(a(r, c) == 0.0);
        sum += a(r, c);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("attention unit falls back to fc(target) when all refs are masked") {
  const int d = 3;
  auto p = identity_unit(d);
  std::mt19937_64 rng(5);
  Mat x = random_mat(2, d, rng);
  Mat ref = random_mat(2, d, rng);
  Graph g;
  Node* out =
      attention_unit(g, g.constant(x), g.constant(ref), {1, 1}, {0, 0}, p);
  CHECK((out->val - x).cwiseAbs().maxCoeff() < 1e-12);  // identity out fc
}

TEST_CASE("attention unit masks target rows to zero") {
  const int d = 8;
  std::mt19937_64 rng(6);
  auto p = make_attention_unit("u", d, 2, 0.0, rng);
  Mat target = random_mat(4, d, rng);
  target.row(3).setZero();
  Mat ref = random_mat(3, d, rng);
  Graph g;
  Node* out = attention_unit(g, g.constant(target), g.constant(ref),
                             {1, 1, 1, 0}, {1, 1, 1}, p);
  CHECK(out->val.row(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("merge: concat_mlp with zero final weights gives the bias") {
  std::mt19937_64 rng(7);
  EncoderConfig cfg;
  cfg.hidden = 4;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  auto p = make_merge("m", MergeMode::kConcatMlp, 3, 2, cfg, rng);
  p.mlp_out.w.value.setZero();
  p.mlp_out.b.value = Mat::Constant(1, 4, 0.25);
  Mat video = random_mat(5, 3, rng);
  video.row(4).setZero();
  Mat para = random_mat(5, 2, rng);
  para.row(4).setZero();
  Mask vmask = {1, 1, 1, 1, 0};
  Graph g;
  Node* out = merge(g, g.constant(video), g.constant(para), vmask, p);
  for (int r = 0; r < 4; ++r)
    CHECK((out->val.row(r).array() - 0.25).abs().maxCoeff() == 0.0);
  CHECK(out->val.row(4).cwiseAbs().maxCoeff() == 0.0);  // mask contract
}

TEST_CASE("merge: add mode with identity projections sums the inputs") {
  std::mt19937_64 rng(8);
  EncoderConfig cfg;
  cfg.hidden = 3;
  cfg.heads = 1;
  auto p = make_merge("m", MergeMode::kAdd, 3, 3, cfg, rng);
  p.proj_v.w.value = Mat::Identity(3, 3);
  p.proj_v.b.value.setZero();
  p.proj_c.w.value = Mat::Identity(3, 3);
  p.proj_c.b.value.setZero();
  Mat x = random_mat(2, 3, rng), y = random_mat(2, 3, rng);
  Graph g;
  Node* out = merge(g, g.constant(x), g.constant(y), {1, 1}, p);
  CHECK((out->val - (x + y)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("merge: all three modes share shapes (ablation hook)") {
  std::mt19937_64 rng(9);
  EncoderConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  Mat video = random_mat(6, 5, rng);
  Mat para = random_mat(6, 3, rng);
  Mask vmask = {1, 1, 1, 1, 0, 0};
  video.row(4).setZero();
  video.row(5).setZero();
  para.row(4).setZero();
  para.row(5).setZero();
  for (MergeMode mode :
       {MergeMode::kConcatMlp, MergeMode::kAdd, MergeMode::kAttention}) {
    auto p = make_merge("m", mode, 5, 3, cfg, rng);
    Graph g;
    Node* out = merge(g, g.constant(video), g.constant(para), vmask, p);
    CHECK(out->val.rows() == 6);
    CHECK(out->val.cols() == 8);
    CHECK(out->val.row(5).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(merge_mode_from_string("concat_mlp") == MergeMode::kConcatMlp);
  CHECK_THROWS_AS(merge_mode_from_string("bogus"), ValidationError);
}

TEST_CASE("merge rejects row-count mismatches") {
  std::mt19937_64 rng(10);
  EncoderConfig cfg;
  cfg.hidden = 4;
  cfg.heads = 1;
  auto p = make_merge("m", MergeMode::kConcatMlp, 3, 2, cfg, rng);
  Graph g;
  CHECK_THROWS_AS(merge(g, g.constant(random_mat(4, 3, rng)),
                        g.constant(random_mat(5, 2, rng)), {1, 1, 1, 1}, p),
                  ShapeError);
}

TEST_CASE("guided aggregate builds running means and a 1x1 conv") {
  std::mt19937_64 rng(11);
  GuidedParams p = make_guided("g", rng);
  Mat v = random_mat(3, 2, rng);
  Mask mask = {1, 1, 1};

  SUBCASE("channel selector picks the input back out") {
    p.conv_w.value << 1.0, 0.0, 0.0;
    p.conv_b.value.setZero();
    Graph g;
    Node* out = guided_aggregate(g, g.constant(v), mask, p);
    CHECK((out->val - v).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("forward channel is the running mean") {
    p.conv_w.value << 0.0, 1.0, 0.0;
    p.conv_b.value.setZero();
    Graph g;
    Node* out = guided_aggregate(g, g.constant(v), mask, p);
    CHECK((out->val.row(0) - v.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out->val.row(1) - (v.row(0) + v.row(1)) / 2.0).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((out->val.row(2) - (v.row(0) + v.row(1) + v.row(2)) / 3.0)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  SUBCASE("backward channel ends at the last row") {
    p.conv_w.value << 0.0, 0.0, 1.0;
    p.conv_b.value.setZero();
    Graph g;
    Node* out = guided_aggregate(g, g.constant(v), mask, p);
    CHECK((out->val.row(2) - v.row(2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out->val.row(0) - (v.row(0) + v.row(1) + v.row(2)) / 3.0)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  SUBCASE("padded rows stay zero even with a bias") {
    p.conv_b.value(0, 0) = 3.0;
    Mat padded = Mat::Zero(4, 2);
    padded.topRows(3) = v;
    Graph g;
    Node* out = guided_aggregate(g, g.constant(padded), {1, 1, 1, 0}, p);
    CHECK(out->val.row(3).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("attn_block composes four units in written order") {
  const int d = 3;
  std::mt19937_64 rng(12);
  EncoderConfig cfg;
  cfg.hidden = d;
  cfg.heads = 1;
  cfg.dropout = 0.0;
  auto p = make_attn_block("b", cfg, rng);
  for (AttentionUnitParams* u :
       {&p.self_target, &p.cross_target, &p.self_ref, &p.cross_ref}) {
    *u = identity_unit(d);
  }
  Mat v = random_mat(1, d, rng), q = random_mat(1, d, rng);
  Graph g;
  auto pair = attn_block(g, g.constant(v), g.constant(q), {1}, {1}, p);
  // v1 = 2v; v2 = v1 + q = 2v + q; q1 = 2q; q2 = q1 + v2 = 2q + 2v + q
  CHECK((pair.v_e->val - (2.0 * v + q)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pair.q_e->val - (3.0 * q + 2.0 * v)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attn_block keeps masked rows zero and output shapes") {
  const int d = 8;
  std::mt19937_64 rng(13);
  EncoderConfig cfg;
  cfg.hidden = d;
  cfg.heads = 4;
  cfg.dropout = 0.0;
  auto p = make_attn_block("b", cfg, rng);
  Mat v = random_mat(6, d, rng);
  Mat q = random_mat(4, d, rng);
  Mask vmask = {1, 1, 1, 1, 0, 0};
  Mask qmask = {1, 1, 1, 0};
  for (int r = 4; r < 6; ++r) v.row(r).setZero();
  q.row(3).setZero();
  Graph g;
  auto pair = attn_block(g, g.constant(v), g.constant(q), vmask, qmask, p);
  CHECK(pair.v_e->val.rows() == 6);
  CHECK(pair.v_e->val.cols() == d);
  CHECK(pair.q_e->val.rows() == 4);
  CHECK(pair.q_e->val.cols() == d);
  CHECK(pair.v_e->val.row(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pair.v_e->val.row(5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pair.q_e->val.row(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  cfg.hidden = 12;
  cfg.heads = 5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.heads = 4;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.dropout = 0.2;
  cfg.validate();
}

TEST_CASE("composed enhancement block gradients match finite differences") {
  const int d = 6;
  std::mt19937_64 rng(14);
  EncoderConfig cfg;
  cfg.hidden = d;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  auto mp = make_merge("m", MergeMode::kConcatMlp, 4, 3, cfg, rng);
  auto gp = make_guided("g", rng);
  auto bp = make_attn_block("b", cfg, rng);

  Mat video = random_mat(5, 4, rng);
  Mat para = random_mat(5, 3, rng);
  Mat query = random_mat(3, d, rng);
  Mask vmask = {1, 1, 1, 1, 0};
  Mask qmask = {1, 1, 0};
  video.row(4).setZero();
  para.row(4).setZero();
  query.row(2).setZero();

  std::vector<Param*> params;
  collect(mp, params);
  collect(gp, params);
  collect(bp, params);

  auto run = [&](bool with_grad) {
    Graph g;
    Node* m = merge(g, g.constant(video), g.constant(para), vmask, mp);
    Node* ga = guided_aggregate(g, m, vmask, gp);
    auto pair = attn_block(g, ga, g.constant(query), vmask, qmask, bp);
    Node* loss =
        add(g, sum_all(g, tanh_op(g, pair.v_e)), sum_all(g, pair.q_e));
    if (with_grad) {
      for (Param* p : params) p->zero_grad();
      g.backward(loss);
    }
    return loss->val(0, 0);
  };

  run(true);
  std::mt19937_64 probe_rng(90);
  int checked = 0;
  for (Param* p : params) {
    std::uniform_int_distribution<Eigen::Index> rr(0, p->value.rows() - 1);
    std::uniform_int_distribution<Eigen::Index> rc(0, p->value.cols() - 1);
    for (int k = 0; k < 2; ++k) {
      const Eigen::Index r = rr(probe_rng), c = rc(probe_rng);
      const double numeric =
          testutil::central_diff(*p, r, c, [&] { return run(false); });
      CAPTURE(p->name);
      CHECK(testutil::rel_err(p->grad(r, c), numeric) < 1e-3);
      ++checked;
    }
  }
  CHECK(checked >= 40);
}
