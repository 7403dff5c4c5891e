#include "vmr/training.hpp"

#include "vmr/checkpoint.hpp"
#include "vmr/evaluation.hpp"
#include "vmr/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace vmr {

using namespace nn;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0.0 ||
      grad_clip <= 0.0)
    throw ValidationError("train config: non-positive setting");
  if (lambda_h < 0.0) throw ValidationError("train config: lambda_h < 0");
  if (expansion_iou_threshold <= 0.0 || expansion_iou_threshold > 1.0)
    throw ValidationError("train config: bad expansion threshold");
  if (alpha < 0.0) throw ValidationError("train config: alpha < 0");
}

std::pair<std::vector<int>, std::vector<int>> expand_labels(
    const MomentAnnotation& ann, const std::vector<SnippetPeriod>& periods,
    double threshold) {
  const int L = static_cast<int>(periods.size());
  const auto gt = std::pair<double, double>{periods[ann.start_idx].t_start,
                                            periods[ann.end_idx].t_end};
  std::vector<int> starts, ends;
  for (int i = 0; i < L; ++i) {
    for (int j = i; j < L; ++j) {
      const double iou =
          temporal_iou({periods[i].t_start, periods[j].t_end}, gt);
      if (iou >= threshold) {
        starts.push_back(i);
        ends.push_back(j);
      }
    }
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  if (!std::binary_search(starts.begin(), starts.end(), ann.start_idx))
    starts.insert(
        std::lower_bound(starts.begin(), starts.end(), ann.start_idx),
        ann.start_idx);
  if (!std::binary_search(ends.begin(), ends.end(), ann.end_idx))
    ends.insert(std::lower_bound(ends.begin(), ends.end(), ann.end_idx),
                ann.end_idx);
  return {std::move(starts), std::move(ends)};
}

double vmr_loss(const Eigen::VectorXd& p_start, const Eigen::VectorXd& p_end,
                const std::vector<int>& candidate_starts,
                const std::vector<int>& candidate_ends) {
  if (candidate_starts.empty() || candidate_ends.empty())
    throw ValidationError("vmr_loss: empty candidate set");
  double ms = 0.0, me = 0.0;
  for (int i : candidate_starts) ms += p_start(i);
  for (int i : candidate_ends) me += p_end(i);
  return -std::log(std::max(ms, kLossEps)) - std::log(std::max(me, kLossEps));
}

double highlight_loss(const Eigen::VectorXd& h, const nn::Mask& vmask,
                      const std::vector<int>& candidate_starts,
                      const std::vector<int>& candidate_ends) {
  if (candidate_starts.empty() || candidate_ends.empty())
    throw ValidationError("highlight_loss: empty candidate set");
  const int lo = *std::min_element(candidate_starts.begin(),
                                   candidate_starts.end());
  const int hi = *std::max_element(candidate_ends.begin(),
                                   candidate_ends.end());
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!vmask[i]) continue;
    const double y = (i >= lo && i <= hi) ? 1.0 : 0.0;
    sum -= y * std::log(std::max(h(i), kLossEps)) +
           (1.0 - y) * std::log(std::max(1.0 - h(i), kLossEps));
    ++n;
  }
  return sum / n;
}

double total_loss(double vmr, double hl, double lambda_h) {
  return vmr + lambda_h * hl;
}

Node* vmr_loss_node(Graph& g, Node* p_start, Node* p_end,
                    const std::vector<int>& candidate_starts,
                    const std::vector<int>& candidate_ends) {
  if (candidate_starts.empty() || candidate_ends.empty())
    throw ValidationError("vmr_loss: empty candidate set");
  Node* ms = log_clamped(g, select_rows_sum(g, p_start, candidate_starts),
                         kLossEps);
  Node* me =
      log_clamped(g, select_rows_sum(g, p_end, candidate_ends), kLossEps);
  return neg(g, add(g, ms, me));
}

Node* highlight_loss_node(Graph& g, Node* h, const nn::Mask& vmask,
                          const std::vector<int>& candidate_starts,
                          const std::vector<int>& candidate_ends) {
  const int lo = *std::min_element(candidate_starts.begin(),
                                   candidate_starts.end());
  const int hi = *std::max_element(candidate_ends.begin(),
                                   candidate_ends.end());
  const Eigen::Index L = h->val.rows();
  Mat y(L, 1), one_minus_y(L, 1);
  for (Eigen::Index i = 0; i < L; ++i) {
    y(i, 0) = (i >= lo && i <= hi) ? 1.0 : 0.0;
    one_minus_y(i, 0) = 1.0 - y(i, 0);
  }
  Node* pos = cmul(g, log_clamped(g, h, kLossEps), y);
  Node* ng = cmul(g, log_clamped(g, affine(g, h, -1.0, 1.0), kLossEps),
                  one_minus_y);
  return neg(g, mean_masked(g, add(g, pos, ng), vmask));
}

Node* sample_loss_node(Graph& g, const Model::Forward& f,
                       const PreparedSample& sample, const TrainConfig& cfg) {
  Node* retrieval = nullptr;
  if (cfg.per_branch_loss) {
    Node* lv = vmr_loss_node(g, f.video.p_start, f.video.p_end,
                             sample.ann.candidate_starts,
                             sample.ann.candidate_ends);
    Node* lc = vmr_loss_node(g, f.para.p_start, f.para.p_end,
                             sample.ann.candidate_starts,
                             sample.ann.candidate_ends);
    retrieval = add(g, lv, lc);
  } else {
    const double norm = 1.0 / (1.0 + cfg.alpha);
    retrieval = vmr_loss_node(g, scale(g, f.fused_start, norm),
                              scale(g, f.fused_end, norm),
                              sample.ann.candidate_starts,
                              sample.ann.candidate_ends);
  }
  Node* hl = highlight_loss_node(g, f.video.highlight, sample.vmask,
                                 sample.ann.candidate_starts,
                                 sample.ann.candidate_ends);
  return add(g, retrieval, scale(g, hl, cfg.lambda_h));
}

void AdamOptimizer::step(const std::vector<Param*>& params, double lr) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, step_count);
  const double bc2 = 1.0 - std::pow(beta2, step_count);
  for (Param* p : params) {
    if (p->adam_m.size() == 0) {
      p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
      p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    p->adam_m = beta1 * p->adam_m + (1.0 - beta1) * p->grad;
    p->adam_v =
        beta2 * p->adam_v.array() + (1.0 - beta2) * p->grad.array().square();
    const Mat m_hat = p->adam_m / bc1;
    const Mat v_hat = p->adam_v / bc2;
    p->value.array() -=
        lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

double clip_gradients(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (Param* p : params) p->grad *= k;
  }
  return norm;
}

double dataset_miou(Model& model, const Dataset& data, double alpha) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : data) {
    auto pred = model.predict(s.tensors(), alpha);
    auto [ps, pe] =
        snippet_span_to_seconds(pred.start_idx, pred.end_idx, s.periods);
    sum += temporal_iou({ps, pe}, {s.ann.tau_s, s.ann.tau_e});
  }
  return sum / static_cast<double>(data.size());
}

namespace {
std::string diagnostic_snapshot(const std::vector<int>& batch,
                                const Dataset& data,
                                const std::vector<Param*>& params) {
  std::string ids;
  for (int i : batch)
    ids += (ids.empty() ? "" : ", ") + data[i].video_id + "/" +
           data[i].query_id;
  double pmax = 0.0;
  for (const Param* p : params)
    pmax = std::max(pmax, p->value.cwiseAbs().maxCoeff());
  return "batch ids [" + ids + "], max |param| " + std::to_string(pmax);
}
}  // namespace

FitResult fit(Model& model, const Dataset& train, const TrainConfig& cfg,
              const FitPaths& paths, bool resume, bool verbose,
              int stop_after_epoch) {
  cfg.validate();
  if (train.empty()) throw ValidationError("fit: empty training set");

  auto params = model.parameters();
  AdamOptimizer adam;
  FitResult result;
  int start_epoch = 0;

  if (resume) {
    if (paths.checkpoint_last.empty() ||
        !std::filesystem::exists(paths.checkpoint_last))
      throw CheckpointError("resume requested but no last checkpoint found");
    CheckpointMeta meta =
        load_checkpoint(paths.checkpoint_last, params,
                        model.config().fingerprint(), /*load_adam=*/true);
    adam.step_count = meta.adam_step;
    start_epoch = meta.epoch + 1;
    result.best_val_miou = meta.best_val;
  }

  // held-out shard of train for model selection
  std::vector<int> train_idx, val_idx;
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    if (train.size() >= 8 && i % 8 == 7)
      val_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  Dataset val_set, train_part;
  for (int i : val_idx) val_set.push_back(train[i]);
  for (int i : train_idx) train_part.push_back(train[i]);

  std::ofstream log;
  if (!paths.log_file.empty()) {
    log.open(paths.log_file, start_epoch > 0 ? std::ios::app : std::ios::out);
    if (start_epoch == 0)
      log << json{{"type", "run"},
                  {"version", kVersionString},
                  {"fingerprint", model.config().fingerprint()},
                  {"seed", cfg.seed},
                  {"epochs", cfg.epochs},
                  {"alpha", cfg.alpha}}
                 .dump()
          << "\n";
  }

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr =
        cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.epochs);

    std::mt19937_64 order_rng(cfg.seed ^
                              (0x9e3779b97f4a7c15ull * (epoch + 1)));
    std::mt19937_64 dropout_rng(cfg.seed * 1000003ull + epoch);
    std::vector<int> order = train_idx;
    std::shuffle(order.begin(), order.end(), order_rng);

    double epoch_loss = 0.0, epoch_vmr = 0.0, epoch_hl = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t take =
          std::min<std::size_t>(cfg.batch_size, order.size() - at);
      std::vector<int> batch(order.begin() + at, order.begin() + at + take);

      for (Param* p : params) p->zero_grad();
      double batch_loss = 0.0, batch_vmr = 0.0, batch_hl = 0.0;
      for (int idx : batch) {
        const PreparedSample& s = train[idx];
        Graph g;
        Model::Forward f =
            model.forward(g, s.tensors(), /*training=*/true, &dropout_rng);
        Node* loss = sample_loss_node(g, f, s, cfg);
        Node* scaled = scale(g, loss, 1.0 / static_cast<double>(take));
        g.backward(scaled);
        batch_loss += loss->val(0, 0) / take;
        // bookkeeping only
        SpanDistributions vd = extract(f.video);
        batch_hl += highlight_loss(vd.highlight, s.vmask,
                                   s.ann.candidate_starts,
                                   s.ann.candidate_ends) /
                    take;
      }
      batch_vmr = batch_loss - cfg.lambda_h * batch_hl;
      if (!std::isfinite(batch_loss))
        throw TrainingError("non-finite loss at epoch " +
                            std::to_string(epoch) + ": " +
                            diagnostic_snapshot(batch, train, params));
      clip_gradients(params, cfg.grad_clip);
      adam.step(params, lr);
      epoch_loss += batch_loss;
      epoch_vmr += batch_vmr;
      epoch_hl += batch_hl;
      ++batches;
    }

    EpochLog el;
    el.epoch = epoch;
    el.loss = epoch_loss / batches;
    el.vmr = epoch_vmr / batches;
    el.hl = epoch_hl / batches;
    el.lr = lr;
    el.train_miou = dataset_miou(model, train_part, cfg.alpha);
    el.val_miou = val_set.empty() ? el.train_miou
                                  : dataset_miou(model, val_set, cfg.alpha);
    el.seconds = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    result.epochs.push_back(el);

    const bool is_best = el.val_miou > result.best_val_miou;
    if (is_best) {
      result.best_val_miou = el.val_miou;
      result.best_epoch = epoch;
    }

    CheckpointMeta meta;
    meta.fingerprint = model.config().fingerprint();
    meta.seed = cfg.seed;
    meta.version = kVersionString;
    meta.epoch = epoch;
    meta.best_val = result.best_val_miou;
    meta.adam_step = adam.step_count;
    if (!paths.checkpoint_last.empty())
      save_checkpoint(paths.checkpoint_last, params, meta, /*include_adam=*/true);
    if (is_best && !paths.checkpoint_best.empty())
      save_checkpoint(paths.checkpoint_best, params, meta);

    if (log.is_open()) {
      log << json{{"type", "epoch"},     {"epoch", el.epoch},
                  {"loss", el.loss},     {"vmr", el.vmr},
                  {"hl", el.hl},         {"lr", el.lr},
                  {"train_miou", el.train_miou},
                  {"val_miou", el.val_miou},
                  {"seconds", el.seconds}}
                 .dump()
          << "\n";
      log.flush();
    }
    if (verbose) {
      std::cout << "epoch " << epoch << " loss " << el.loss << " train_miou "
                << el.train_miou << " val_miou " << el.val_miou << " lr " << lr
                << "\n";
    }
    if (stop_after_epoch >= 0 && epoch >= stop_after_epoch) break;
  }
  return result;
}

}  // namespace vmr
