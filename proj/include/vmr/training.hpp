#pragma once

#include "vmr/dataset.hpp"
#include "vmr/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace vmr {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 0.0005;  // decays linearly toward zero per epoch
  double grad_clip = 1.0;
  double lambda_h = 5.0;
  std::uint64_t seed = 0;
  double expansion_iou_threshold = 0.7;
  double alpha = 0.5;
  // Alternative supervision: per-branch retrieval losses instead of the
  // loss on fused scores.
  bool per_branch_loss = false;

  void validate() const;
};

// Epsilon used inside log and BCE; oracles must apply the same clamp.
inline constexpr double kLossEps = 1e-12;

// All snippet spans whose IoU with the ground-truth span reaches the
// threshold; the exact ground-truth endpoints are always included.
std::pair<std::vector<int>, std::vector<int>> expand_labels(
    const MomentAnnotation& ann, const std::vector<SnippetPeriod>& periods,
    double threshold);

double vmr_loss(const Eigen::VectorXd& p_start, const Eigen::VectorXd& p_end,
                const std::vector<int>& candidate_starts,
                const std::vector<int>& candidate_ends);

double highlight_loss(const Eigen::VectorXd& h, const nn::Mask& vmask,
                      const std::vector<int>& candidate_starts,
                      const std::vector<int>& candidate_ends);

double total_loss(double vmr, double hl, double lambda_h);

// Differentiable versions used by the training loop.
nn::Node* vmr_loss_node(nn::Graph& g, nn::Node* p_start, nn::Node* p_end,
                        const std::vector<int>& candidate_starts,
                        const std::vector<int>& candidate_ends);
nn::Node* highlight_loss_node(nn::Graph& g, nn::Node* h, const nn::Mask& vmask,
                              const std::vector<int>& candidate_starts,
                              const std::vector<int>& candidate_ends);

// Scalar training loss for one sample. Fused scores sum to 1 + alpha, so
// they are rescaled to a distribution before the retrieval loss; this only
// shifts the loss by log(1 + alpha) relative to the raw fused scores and
// leaves gradients identical.
nn::Node* sample_loss_node(nn::Graph& g, const Model::Forward& f,
                           const PreparedSample& sample,
                           const TrainConfig& cfg);

struct AdamOptimizer {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int step_count = 0;

  void step(const std::vector<nn::Param*>& params, double lr);
};

// Global-norm gradient clipping; returns the pre-clip norm.
double clip_gradients(const std::vector<nn::Param*>& params, double max_norm);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double vmr = 0.0;
  double hl = 0.0;
  double lr = 0.0;
  double train_miou = 0.0;
  double val_miou = 0.0;
  double seconds = 0.0;
};

struct FitResult {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_miou = -1.0;
};

struct FitPaths {
  std::filesystem::path checkpoint_best;
  std::filesystem::path checkpoint_last;
  std::filesystem::path log_file;
};

// Deterministic training loop: seeded init and dropout, fixed batch order
// per (seed, epoch), single-threaded over batches. Resumes from
// checkpoint_last when resume is set. stop_after_epoch simulates an
// interrupt after that epoch completes (-1 runs to cfg.epochs).
FitResult fit(Model& model, const Dataset& train, const TrainConfig& cfg,
              const FitPaths& paths = {}, bool resume = false,
              bool verbose = false, int stop_after_epoch = -1);

// Mean IoU of decoded predictions over a dataset at the given alpha.
double dataset_miou(Model& model, const Dataset& data, double alpha);

}  // namespace vmr
