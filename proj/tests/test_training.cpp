#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "vmr/evaluation.hpp"
#include "vmr/synthetic.hpp"
#include "vmr/training.hpp"

#include <filesystem>
#include <random>

using namespace vmr;
using namespace vmr::nn;

namespace {
std::vector<SnippetPeriod> uniform_periods(int n, double step = 1.0) {
  std::vector<SnippetPeriod> p(n);
  for (int i = 0; i < n; ++i) p[i] = {step * i, step * (i + 1)};
  return p;
}

// exhaustive span-enumeration oracle
std::pair<std::vector<int>, std::vector<int>> expand_oracle(
    const MomentAnnotation& ann, const std::vector<SnippetPeriod>& periods,
    double threshold) {
  const int L = static_cast<int>(periods.size());
  const double gs = periods[ann.start_idx].t_start;
  const double ge = periods[ann.end_idx].t_end;
  std::set<int> ss, es;
  for (int i = 0; i < L; ++i)
    for (int j = i; j < L; ++j) {
      const double s = periods[i].t_start, e = periods[j].t_end;
      const double inter = std::min(e, ge) - std::max(s, gs);
      const double uni = std::max(e, ge) - std::min(s, gs);
      const double iou = inter <= 0 ? 0.0 : inter / uni;
      if (iou >= threshold) {
        ss.insert(i);
        es.insert(j);
      }
    }
  ss.insert(ann.start_idx);
  es.insert(ann.end_idx);
  return {{ss.begin(), ss.end()}, {es.begin(), es.end()}};
}

MomentAnnotation span_ann(int s, int e, double step = 1.0) {
  MomentAnnotation a;
  a.start_idx = s;
  a.end_idx = e;
  a.tau_s = s * step;
  a.tau_e = (e + 1) * step;
  return a;
}

ModelConfig tiny_model_config(const SyntheticSpec& spec) {
  ModelConfig mc;
  mc.d_video = spec.d_video;
  mc.d_para = spec.d_word;
  mc.d_word = spec.d_word;
  mc.encoder.hidden = 8;
  mc.encoder.heads = 2;
  mc.encoder.dropout = 0.2;
  return mc;
}
}  // namespace

TEST_CASE("expand_labels at threshold 1.0 keeps only the exact endpoints") {
  auto periods = uniform_periods(8);
  auto ann = span_ann(2, 5);
  auto [cs, ce] = expand_labels(ann, periods, 1.0);
  CHECK(cs == std::vector<int>{2});
  CHECK(ce == std::vector<int>{5});
}

TEST_CASE("expand_labels matches the exhaustive oracle on fixed cases") {
  auto periods = uniform_periods(8);
  SUBCASE("span (2,5) at 0.7") {
    auto ann = span_ann(2, 5);
    auto got = expand_labels(ann, periods, 0.7);
    auto want = expand_oracle(ann, periods, 0.7);
    CHECK(got.first == want.first);
    CHECK(got.second == want.second);
  }
  SUBCASE("full-cover span at 0.7") {
    auto ann = span_ann(0, 7);
    auto got = expand_labels(ann, periods, 0.7);
    auto want = expand_oracle(ann, periods, 0.7);
    CHECK(got.first == want.first);
    CHECK(got.second == want.second);
  }
}

TEST_CASE("expand_labels matches the oracle on 500 random cases") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> ld(1, 32);
  const double thresholds[] = {0.5, 0.7, 1.0};
  for (int rep = 0; rep < 500; ++rep) {
    const int L = ld(rng);
    std::uniform_int_distribution<int> idx(0, L - 1);
    int a = idx(rng), b = idx(rng);
    if (a > b) std::swap(a, b);
    const double thr = thresholds[rep % 3];
    auto ann = span_ann(a, b);
    auto got = expand_labels(ann, uniform_periods(L), thr);
    auto want = expand_oracle(ann, uniform_periods(L), thr);
    CHECK(got.first == want.first);
    CHECK(got.second == want.second);
    CHECK(std::binary_search(got.first.begin(), got.first.end(), a));
    CHECK(std::binary_search(got.second.begin(), got.second.end(), b));
  }
}

TEST_CASE("vmr_loss values") {
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.25);

  SUBCASE("all indices as candidates gives zero loss") {
    std::vector<int> all = {0, 1, 2, 3};
    CHECK(vmr_loss(uniform, uniform, all, all) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform with singleton candidates is 2 ln 4") {
    CHECK(vmr_loss(uniform, uniform, {1}, {2}) ==
          doctest::Approx(2.0 * std::log(4.0)));
  }
  SUBCASE("all mass on the candidate contributes zero") {
    Eigen::VectorXd point = Eigen::VectorXd::Zero(4);
    point(1) = 1.0;
    CHECK(vmr_loss(point, point, {1}, {1}) == doctest::Approx(0.0));
  }
  SUBCASE("empty candidate set is an error") {
    CHECK_THROWS_AS(vmr_loss(uniform, uniform, {}, {1}), ValidationError);
  }
  SUBCASE("loss is non-negative for distributions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd p(6);
      for (int i = 0; i < 6; ++i) p(i) = u(rng);
      p /= p.sum();
      CHECK(vmr_loss(p, p, {0, 3}, {2}) >= 0.0);
    }
  }
  SUBCASE("invariant under candidate enumeration order") {
    Eigen::VectorXd p(5);
    p << 0.1, 0.3, 0.2, 0.25, 0.15;
    CHECK(vmr_loss(p, p, {0, 2, 4}, {1, 3}) ==
          vmr_loss(p, p, {4, 0, 2}, {3, 1}));
  }
}

TEST_CASE("highlight_loss values and gradient") {
  Mask mask = {1, 1, 1, 1, 0};

  SUBCASE("perfect prediction approaches zero") {
    Eigen::VectorXd h(5);
    h << 1e-9, 1.0 - 1e-9, 1.0 - 1e-9, 1e-9, 0.0;
    CHECK(highlight_loss(h, mask, {1}, {2}) ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("h = 0.5 everywhere gives ln 2") {
    Eigen::VectorXd h = Eigen::VectorXd::Constant(5, 0.5);
    CHECK(highlight_loss(h, mask, {1}, {2}) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("window covering everything labels all ones") {
    Eigen::VectorXd h = Eigen::VectorXd::Constant(5, 0.9);
    // label is 1 on all real snippets -> loss = -ln 0.9
    CHECK(highlight_loss(h, mask, {0}, {3}) ==
          doctest::Approx(-std::log(0.9)));
  }
  SUBCASE("graph version matches and its gradient matches finite differences") {
    std::mt19937_64 rng(6);
    Param hp("h", nn::Mat::Zero(5, 1));
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int i = 0; i < 5; ++i) hp.value(i, 0) = u(rng);

    auto run = [&](bool with_grad) {
      Graph g;
      Node* loss = highlight_loss_node(g, g.param(hp), mask, {1}, {2});
      if (with_grad) {
        hp.zero_grad();
        g.backward(loss);
      }
      return loss->val(0, 0);
    };
    const double graph_val = run(true);
    CHECK(graph_val ==
          doctest::Approx(highlight_loss(hp.value.col(0), mask, {1}, {2})));
    for (int i = 0; i < 5; ++i) {
      const double numeric =
          testutil::central_diff(hp, i, 0, [&] { return run(false); });
      CHECK(std::abs(hp.grad(i, 0) - numeric) < 1e-4);
    }
  }
}

TEST_CASE("total_loss arithmetic") {
  CHECK(total_loss(1.0, 0.2, 0.0) == 1.0);
  CHECK(total_loss(1.0, 0.2, 5.0) == doctest::Approx(2.0));
  CHECK(total_loss(0.0, 0.0, 5.0) == 0.0);
}

TEST_CASE("vmr_loss_node equals the plain implementation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd ps(6), pe(6);
  for (int i = 0; i < 6; ++i) {
    ps(i) = u(rng);
    pe(i) = u(rng);
  }
  ps /= ps.sum();
  pe /= pe.sum();
  Graph g;
  Node* loss = vmr_loss_node(g, g.constant(ps), g.constant(pe), {1, 2}, {4});
  CHECK(loss->val(0, 0) == doctest::Approx(vmr_loss(ps, pe, {1, 2}, {4})));
}

TEST_CASE("adam with lr 0 leaves parameters unchanged") {
  std::mt19937_64 rng(8);
  Param p("p", testutil::random_mat(3, 3, rng));
  const Mat before = p.value;
  p.grad = testutil::random_mat(3, 3, rng);
  AdamOptimizer adam;
  adam.step({&p}, 0.0);
  CHECK((p.value - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient clipping caps the global norm") {
  Param a("a", Mat::Zero(2, 2)), b("b", Mat::Zero(2, 2));
  a.grad = Mat::Constant(2, 2, 3.0);
  b.grad = Mat::Constant(2, 2, 4.0);
  const double norm = clip_gradients({&a, &b}, 1.0);
  CHECK(norm == doctest::Approx(10.0));
  double clipped = std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm());
  CHECK(clipped == doctest::Approx(1.0));
}

TEST_CASE("fit is deterministic per seed and checkpoints resume exactly") {
  SyntheticSpec spec;
  spec.n_samples = 8;
  spec.snippets = 8;
  spec.d_video = 6;
  spec.d_word = 5;
  spec.noise = 0.05;
  auto data = make_synthetic(spec);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 11;

  auto run_losses = [&](std::uint64_t seed) {
    Model model(tiny_model_config(spec), seed);
    TrainConfig c = cfg;
    c.seed = seed;
    FitResult r = fit(model, data.samples, c);
    std::vector<double> losses;
    for (const auto& e : r.epochs) losses.push_back(e.loss);
    return losses;
  };

  SUBCASE("same seed, bit-identical losses") {
    auto l1 = run_losses(11);
    auto l2 = run_losses(11);
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) CHECK(l1[i] == l2[i]);
  }

  SUBCASE("different seed diverges") {
    auto l1 = run_losses(11);
    auto l2 = run_losses(12);
    CHECK(l1[0] != l2[0]);
  }

  SUBCASE("resume reproduces the uninterrupted run") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "vmr_fit_resume";
    fs::remove_all(dir);
    fs::create_directories(dir);

    FitPaths paths;
    paths.checkpoint_last = dir / "last.bin";
    paths.checkpoint_best = dir / "best.bin";

    TrainConfig c4 = cfg;
    c4.epochs = 4;
    Model uninterrupted(tiny_model_config(spec), 11);
    FitResult full = fit(uninterrupted, data.samples, c4);

    // same 4-epoch schedule, interrupted after epoch 1
    Model first_half(tiny_model_config(spec), 11);
    fit(first_half, data.samples, c4, paths, /*resume=*/false,
        /*verbose=*/false, /*stop_after_epoch=*/1);

    Model second_half(tiny_model_config(spec), 11);
    FitResult resumed =
        fit(second_half, data.samples, c4, paths, /*resume=*/true);

    REQUIRE(resumed.epochs.size() == 2);  // epochs 2 and 3
    CHECK(resumed.epochs[0].loss == doctest::Approx(full.epochs[2].loss));
    CHECK(resumed.epochs[1].loss == doctest::Approx(full.epochs[3].loss));
  }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  SyntheticSpec spec;
  spec.n_samples = 4;
  spec.snippets = 6;
  spec.d_video = 4;
  spec.d_word = 5;
  auto data = make_synthetic(spec);
  Model model(tiny_model_config(spec), 1);
  // poison one parameter
  model.parameters()[0]->value(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(fit(model, data.samples, cfg), TrainingError);
}
